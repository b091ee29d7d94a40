#include "cgprune/fusion_model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cgprune/error.hpp"
#include "cgprune/nn/loss.hpp"
#include "cgprune/nn/rng.hpp"
#include "cgprune/parallel.hpp"

namespace cgprune {

namespace {

using nlohmann::ordered_json;
using Layer = nn::DenseLayer<double>;
using Grad = nn::DenseGrad<double>;

struct Prepared {
    Eigen::VectorXd sem;
    Eigen::VectorXd structure;
};

struct Trace {
    Eigen::VectorXd sem_pre, struct_pre, fused, logits, prob;
};

Prepared prepare(const FusionModel& m, const SemVector& sem, const StructVector& structure) {
    Prepared p;
    if (m.config.uses_sem()) {
        if (static_cast<std::size_t>(sem.size()) != m.config.sem_dim) {
            throw ShapeError("semantic vector has " + std::to_string(sem.size()) + " entries, model expects " +
                             std::to_string(m.config.sem_dim));
        }
        p.sem = sem.cast<double>();
    }
    if (m.config.uses_struct()) {
        StructVector s = m.standardizer.apply(structure);
        p.structure = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    }
    return p;
}

Trace run_forward(const FusionModel& m, const Prepared& in) {
    Trace t;
    const auto h = static_cast<Eigen::Index>(m.config.hidden);
    t.fused.resize(m.classifier.in());
    Eigen::Index pos = 0;
    if (m.sem_proj) {
        t.sem_pre = nn::pre_activation(*m.sem_proj, in.sem);
        Eigen::VectorXd a = t.sem_pre;
        nn::apply_activation(m.sem_proj->activation, a);
        t.fused.segment(pos, h) = a;
        pos += h;
    }
    if (m.struct_proj) {
        t.struct_pre = nn::pre_activation(*m.struct_proj, in.structure);
        Eigen::VectorXd a = t.struct_pre;
        nn::apply_activation(m.struct_proj->activation, a);
        t.fused.segment(pos, h) = a;
    }
    t.logits = nn::forward(m.classifier, t.fused);
    t.prob = nn::softmax(t.logits);
    return t;
}

FusionGrads zero_grads(const FusionModel& m) {
    FusionGrads g;
    if (m.sem_proj) g.sem_proj.emplace(*m.sem_proj);
    if (m.struct_proj) g.struct_proj.emplace(*m.struct_proj);
    g.classifier = Grad(m.classifier);
    return g;
}

// Accumulates scale * dLoss/dparams into g; returns the unscaled loss.
double accumulate(const FusionModel& m, const Prepared& in, int label, double scale, FusionGrads& g) {
    Trace t = run_forward(m, in);
    const double loss = nn::cross_entropy(t.prob, label);
    Eigen::VectorXd upstream = scale * nn::softmax_xent_grad(t.prob, label);
    Eigen::VectorXd dfused = nn::backward(m.classifier, t.fused, t.logits, upstream, g.classifier);

    const auto h = static_cast<Eigen::Index>(m.config.hidden);
    Eigen::Index pos = 0;
    if (m.sem_proj) {
        nn::backward(*m.sem_proj, in.sem, t.sem_pre, dfused.segment(pos, h), *g.sem_proj);
        pos += h;
    }
    if (m.struct_proj) {
        nn::backward(*m.struct_proj, in.structure, t.struct_pre, dfused.segment(pos, h), *g.struct_proj);
    }
    return loss;
}

std::string encode_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw FormatError("cannot encode double");
    return std::string(buf, end);
}

double decode_double(const ordered_json& j) {
    if (!j.is_string()) throw FormatError("expected a decimal string");
    const auto& s = j.get_ref<const std::string&>();
    double v = 0.0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size()) throw FormatError("bad decimal string: " + s);
    return v;
}

ordered_json layer_to_json(const Layer& layer) {
    ordered_json j;
    j["rows"] = layer.out();
    j["cols"] = layer.in();
    j["activation"] = std::string(nn::to_string(layer.activation));
    ordered_json w = ordered_json::array();
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.push_back(encode_double(layer.weight(r, c)));
    }
    ordered_json b = ordered_json::array();
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) b.push_back(encode_double(layer.bias[r]));
    j["weight"] = std::move(w);
    j["bias"] = std::move(b);
    return j;
}

Layer layer_from_json(const ordered_json& j, Eigen::Index rows, Eigen::Index cols) {
    if (j.at("rows").get<Eigen::Index>() != rows || j.at("cols").get<Eigen::Index>() != cols) {
        throw FormatError("layer shape does not match config");
    }
    Layer layer(cols, rows, nn::parse_activation(j.at("activation").get<std::string>()));
    const auto& w = j.at("weight");
    const auto& b = j.at("bias");
    if (w.size() != static_cast<std::size_t>(rows * cols) || b.size() != static_cast<std::size_t>(rows)) {
        throw FormatError("layer parameter count does not match shape");
    }
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = decode_double(w[k++]);
    }
    for (Eigen::Index r = 0; r < rows; ++r) layer.bias[r] = decode_double(b[static_cast<std::size_t>(r)]);
    return layer;
}

ordered_json config_to_json(const FusionConfig& c) {
    ordered_json j;
    j["sem_dim"] = c.sem_dim;
    j["struct_dim"] = kStructDim;
    j["hidden"] = c.hidden;
    j["ablation"] = std::string(to_string(c.ablation));
    j["source_mode"] = std::string(to_string(c.source_mode));
    j["lr"] = encode_double(c.lr);
    j["batch"] = c.batch;
    j["epochs"] = c.epochs;
    j["seed"] = c.seed;
    j["beta1"] = encode_double(c.beta1);
    j["beta2"] = encode_double(c.beta2);
    j["epsilon"] = encode_double(c.epsilon);
    j["fusion_activation"] = std::string(nn::to_string(c.fusion_activation));
    j["standardize"] = c.standardize;
    j["class_weights"] = {encode_double(c.class_weights[0]), encode_double(c.class_weights[1])};
    return j;
}

// Numbers may be given as JSON numbers (config files) or decimal strings (model files).
double read_real(const ordered_json& j) { return j.is_string() ? decode_double(j) : j.get<double>(); }

void config_from_json(FusionConfig& c, const ordered_json& j) {
    if (j.contains("struct_dim") && j["struct_dim"].get<std::size_t>() != kStructDim) {
        throw FormatError("struct_dim must be " + std::to_string(kStructDim));
    }
    if (j.contains("sem_dim")) c.sem_dim = j["sem_dim"].get<std::size_t>();
    if (j.contains("hidden")) c.hidden = j["hidden"].get<std::size_t>();
    if (j.contains("ablation")) c.ablation = parse_ablation(j["ablation"].get<std::string>());
    if (j.contains("source_mode")) c.source_mode = parse_source_mode(j["source_mode"].get<std::string>());
    if (j.contains("lr")) c.lr = read_real(j["lr"]);
    if (j.contains("batch")) c.batch = j["batch"].get<std::size_t>();
    if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("beta1")) c.beta1 = read_real(j["beta1"]);
    if (j.contains("beta2")) c.beta2 = read_real(j["beta2"]);
    if (j.contains("epsilon")) c.epsilon = read_real(j["epsilon"]);
    if (j.contains("fusion_activation")) {
        c.fusion_activation = nn::parse_activation(j["fusion_activation"].get<std::string>());
    }
    if (j.contains("standardize")) c.standardize = j["standardize"].get<bool>();
    if (j.contains("class_weights")) {
        const auto& w = j["class_weights"];
        if (!w.is_array() || w.size() != 2) throw ConfigError("class_weights must have two entries");
        c.class_weights = {read_real(w[0]), read_real(w[1])};
    }
}

ordered_json struct_array(const StructVector& v) {
    ordered_json a = ordered_json::array();
    for (double x : v) a.push_back(encode_double(x));
    return a;
}

StructVector struct_from_json(const ordered_json& a) {
    if (!a.is_array() || a.size() != kStructDim) throw FormatError("standardizer arrays must have 22 entries");
    StructVector v{};
    for (std::size_t k = 0; k < kStructDim; ++k) v[k] = decode_double(a[k]);
    return v;
}

}  // namespace

Ablation parse_ablation(std::string_view s) {
    if (s == "both") return Ablation::Both;
    if (s == "sem-only") return Ablation::SemOnly;
    if (s == "struct-only") return Ablation::StructOnly;
    throw ConfigError("unknown ablation: " + std::string(s));
}

std::string_view to_string(Ablation a) {
    switch (a) {
        case Ablation::Both: return "both";
        case Ablation::SemOnly: return "sem-only";
        case Ablation::StructOnly: return "struct-only";
    }
    return "both";
}

void FusionConfig::validate() const {
    if (hidden < 1) throw ConfigError("hidden size must be >= 1");
    if (uses_sem() && sem_dim < 1) throw ConfigError("semantic dimension must be >= 1 unless struct-only");
    if (batch < 1) throw ConfigError("batch size must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
    for (double w : class_weights) {
        if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("class weights must be positive");
    }
}

FusionModel init_model(const FusionConfig& cfg, nn::Rng& rng) {
    cfg.validate();
    FusionModel m;
    m.config = cfg;
    const auto h = static_cast<Eigen::Index>(cfg.hidden);
    Eigen::Index fused = 0;
    if (cfg.uses_sem()) {
        m.sem_proj.emplace(static_cast<Eigen::Index>(cfg.sem_dim), h, cfg.fusion_activation);
        nn::init_uniform(*m.sem_proj, rng);
        fused += h;
    }
    if (cfg.uses_struct()) {
        m.struct_proj.emplace(static_cast<Eigen::Index>(kStructDim), h, cfg.fusion_activation);
        nn::init_uniform(*m.struct_proj, rng);
        fused += h;
    }
    m.classifier = Layer(fused, 2, nn::Activation::None);
    nn::init_uniform(m.classifier, rng);
    return m;
}

Eigen::Vector2d fuse_forward(const FusionModel& m, const SemVector& sem, const StructVector& structure) {
    return run_forward(m, prepare(m, sem, structure)).prob;
}

Label decide(const Eigen::Vector2d& prob) {
    return prob[1] > prob[0] ? Label::TruePositive : Label::FalsePositive;
}

Verdict classify_edge(const FusionModel& m, const SemVector& sem, const StructVector& structure) {
    Eigen::Vector2d prob = fuse_forward(m, sem, structure);
    return Verdict{decide(prob), prob[1]};
}

FusionLoss fusion_backward(const FusionModel& m, const SemVector& sem, const StructVector& structure, int label) {
    FusionLoss out;
    out.grads = zero_grads(m);
    out.loss = accumulate(m, prepare(m, sem, structure), label, 1.0, out.grads);
    return out;
}

std::vector<nn::ParamView<double>> param_views(FusionModel& m) {
    std::vector<nn::ParamView<double>> v;
    for (Layer* layer : {m.sem_proj ? &*m.sem_proj : nullptr, m.struct_proj ? &*m.struct_proj : nullptr, &m.classifier}) {
        if (!layer) continue;
        v.push_back(nn::view(layer->weight));
        v.push_back(nn::view(layer->bias));
    }
    return v;
}

std::vector<nn::ConstParamView<double>> grad_views(const FusionGrads& g) {
    std::vector<nn::ConstParamView<double>> v;
    for (const Grad* grad :
         {g.sem_proj ? &*g.sem_proj : nullptr, g.struct_proj ? &*g.struct_proj : nullptr, &g.classifier}) {
        if (!grad) continue;
        v.push_back(nn::cview(grad->weight));
        v.push_back(nn::cview(grad->bias));
    }
    return v;
}

FusionModel train(const FusionConfig& cfg, const TrainingSet& data, TrainLog* log) {
    cfg.validate();
    const std::size_t n = data.size();
    if (n == 0) throw TrainingError("training set is empty");
    if (data.structure.size() != n) throw TrainingError("structural rows do not match label count");
    if (cfg.uses_sem()) {
        if (static_cast<std::size_t>(data.sem.rows()) != n) throw TrainingError("semantic rows do not match label count");
        if (static_cast<std::size_t>(data.sem.cols()) != cfg.sem_dim) {
            throw TrainingError("semantic rows have " + std::to_string(data.sem.cols()) + " columns, config says " +
                                std::to_string(cfg.sem_dim));
        }
    }
    for (int y : data.labels) {
        if (y != 0 && y != 1) throw TrainingError("labels must be 0 (FP) or 1 (TP)");
    }

    nn::Rng rng(cfg.seed);
    FusionModel m = init_model(cfg, rng);
    m.standardizer = cfg.standardize ? fit_standardizer(data.structure) : Standardizer();

    std::vector<Prepared> inputs(n);
    const SemVector empty;
    for (std::size_t i = 0; i < n; ++i) {
        SemVector sem = cfg.uses_sem() ? SemVector(data.sem.row(static_cast<Eigen::Index>(i)).transpose()) : empty;
        inputs[i] = prepare(m, sem, data.structure[i]);
    }

    nn::AdamState<double> adam(nn::AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon});
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch) {
            const std::size_t end = std::min(n, start + cfg.batch);
            const double inv = 1.0 / static_cast<double>(end - start);
            FusionGrads grads = zero_grads(m);
            double batch_loss = 0.0;
            try {
                for (std::size_t k = start; k < end; ++k) {
                    const std::size_t i = order[k];
                    const double w = cfg.class_weights[static_cast<std::size_t>(data.labels[i])];
                    batch_loss += w * accumulate(m, inputs[i], data.labels[i], w * inv, grads);
                }
            } catch (const NumericError& ex) {
                throw NumericError("training diverged at step " + std::to_string(step) + ": " + ex.what());
            }
            batch_loss *= inv;
            if (!std::isfinite(batch_loss)) {
                throw NumericError("non-finite training loss at step " + std::to_string(step));
            }
            auto params = param_views(m);
            auto gviews = grad_views(grads);
            nn::adam_step<double>(adam, params, gviews);
            epoch_loss += batch_loss * static_cast<double>(end - start);
            ++step;
        }
        if (log) log->epoch_loss.push_back(epoch_loss / static_cast<double>(n));
    }
    for (auto* layer : {m.sem_proj ? &*m.sem_proj : nullptr, m.struct_proj ? &*m.struct_proj : nullptr, &m.classifier}) {
        if (layer && !nn::all_finite(*layer)) throw NumericError("non-finite parameters after training");
    }
    if (log) log->steps = step;
    return m;
}

std::vector<double> predict_tp(const FusionModel& m, const SemMatrix& sem, std::span<const StructVector> structure) {
    const std::size_t n = structure.size();
    if (m.config.uses_sem() && static_cast<std::size_t>(sem.rows()) != n) {
        throw AlignmentError("semantic rows (" + std::to_string(sem.rows()) + ") do not match structural rows (" +
                             std::to_string(n) + ")");
    }
    std::vector<double> probs(n);
    const SemVector empty;
    parallel_for(n, [&](std::size_t i) {
        SemVector v = m.config.uses_sem() ? SemVector(sem.row(static_cast<Eigen::Index>(i)).transpose()) : empty;
        probs[i] = fuse_forward(m, v, structure[i])[1];
    });
    return probs;
}

void write_model(const FusionModel& m, std::ostream& out) {
    ordered_json j;
    j["version"] = kModelVersion;
    j["config"] = config_to_json(m.config);
    j["standardizer"] = {{"mean", struct_array(m.standardizer.mean())}, {"scale", struct_array(m.standardizer.scale())}};
    ordered_json layers = ordered_json::object();
    if (m.sem_proj) layers["sem_proj"] = layer_to_json(*m.sem_proj);
    if (m.struct_proj) layers["struct_proj"] = layer_to_json(*m.struct_proj);
    layers["classifier"] = layer_to_json(m.classifier);
    j["layers"] = std::move(layers);
    out << j.dump(1) << '\n';
}

void save_model(const FusionModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model: " + path);
    write_model(m, out);
}

FusionModel read_model(std::istream& in, const std::string& source_name) {
    try {
        ordered_json j = ordered_json::parse(in);
        if (!j.contains("version") || j["version"] != kModelVersion) {
            throw FormatError("unsupported model version (expected " + std::to_string(kModelVersion) + ")");
        }
        FusionModel m;
        config_from_json(m.config, j.at("config"));
        m.config.validate();
        const auto& st = j.at("standardizer");
        m.standardizer = Standardizer(struct_from_json(st.at("mean")), struct_from_json(st.at("scale")));
        const auto& layers = j.at("layers");
        const auto h = static_cast<Eigen::Index>(m.config.hidden);
        Eigen::Index fused = 0;
        if (m.config.uses_sem()) {
            m.sem_proj = layer_from_json(layers.at("sem_proj"), h, static_cast<Eigen::Index>(m.config.sem_dim));
            fused += h;
        } else if (layers.contains("sem_proj")) {
            throw FormatError("struct-only model carries a sem_proj layer");
        }
        if (m.config.uses_struct()) {
            m.struct_proj = layer_from_json(layers.at("struct_proj"), h, static_cast<Eigen::Index>(kStructDim));
            fused += h;
        } else if (layers.contains("struct_proj")) {
            throw FormatError("sem-only model carries a struct_proj layer");
        }
        m.classifier = layer_from_json(layers.at("classifier"), 2, fused);
        return m;
    } catch (const FormatError& ex) {
        throw FormatError(source_name + ": " + ex.what());
    } catch (const Error&) {
        throw;
    } catch (const std::exception& ex) {
        throw FormatError(source_name + ": malformed model file: " + ex.what());
    }
}

FusionModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model: " + path);
    return read_model(in, path);
}

void apply_config_json(FusionConfig& cfg, const std::string& json_text) {
    try {
        config_from_json(cfg, ordered_json::parse(json_text));
    } catch (const Error&) {
        throw;
    } catch (const std::exception& ex) {
        throw ConfigError(std::string("bad training config: ") + ex.what());
    }
}

}  // namespace cgprune
