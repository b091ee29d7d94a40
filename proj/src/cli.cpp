#include "cgprune/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cgprune/callgraph.hpp"
#include "cgprune/error.hpp"
#include "cgprune/fusion_model.hpp"
#include "cgprune/pipeline.hpp"
#include "cgprune/prune_eval.hpp"
#include "cgprune/semantic_features.hpp"
#include "cgprune/structural_features.hpp"
#include "cgprune/synthgen.hpp"

namespace cgprune {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    std::string config_path;
    bool quiet = false;
};

struct Context {
    GlobalOptions global;
    std::ostream& out;
    std::ostream& err;

    void info(const std::string& msg) const {
        if (!global.quiet) out << msg << '\n';
    }
    void warn(const std::string& msg) const {
        if (!global.quiet) err << "warning: " << msg << '\n';
    }

    // Section of the --config JSON document, or an empty object.
    ordered_json config_section(const std::string& name) const {
        if (global.config_path.empty()) return ordered_json::object();
        std::ifstream in(global.config_path);
        if (!in) throw IoError("cannot open config: " + global.config_path);
        ordered_json j;
        try {
            j = ordered_json::parse(in);
        } catch (const std::exception& ex) {
            throw ConfigError("bad config file " + global.config_path + ": " + ex.what());
        }
        return j.contains(name) ? j[name] : ordered_json::object();
    }
};

void write_json(const ordered_json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

// One path per line; relative entries resolve against the list's directory.
std::vector<std::string> read_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open list: " + path);
    std::vector<std::string> items;
    const fs::path base = fs::path(path).parent_path();
    std::string line;
    while (std::getline(in, line)) {
        line.erase(line.find_last_not_of(" \t\r\n") + 1);
        line.erase(0, line.find_first_not_of(" \t"));
        if (line.empty() || line[0] == '#') continue;
        fs::path p(line);
        items.push_back(p.is_absolute() ? p.string() : (base / p).string());
    }
    return items;
}

std::string features_dir_for(const std::string& graph_path, const std::string& features_dir) {
    if (!features_dir.empty()) return features_dir;
    auto parent = fs::path(graph_path).parent_path();
    return parent.empty() ? "." : parent.string();
}

std::string feature_path(const std::string& dir, const std::string& id) { return (fs::path(dir) / (id + ".feat.jsonl")).string(); }
std::string embedding_path(const std::string& dir, const std::string& id) { return (fs::path(dir) / (id + ".emb")).string(); }

void write_features(const std::vector<StructVector>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ordered_json j;
        j["ordinal"] = i;
        j["struct"] = rows[i];
        out << j.dump() << '\n';
    }
}

std::vector<StructVector> read_features(const std::string& path, std::size_t expected) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open feature file: " + path);
    std::vector<StructVector> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            if (j.at("ordinal").get<std::size_t>() != rows.size()) throw std::invalid_argument("ordinal out of sequence");
            const auto& a = j.at("struct");
            if (!a.is_array() || a.size() != kStructDim) throw std::invalid_argument("struct must have 22 numbers");
            StructVector v{};
            for (std::size_t k = 0; k < kStructDim; ++k) v[k] = a[k].get<double>();
            rows.push_back(v);
        } catch (const std::exception& ex) {
            throw ParseError(path, lineno, ex.what());
        }
    }
    if (rows.size() != expected) {
        throw AlignmentError(path + ": " + std::to_string(rows.size()) + " feature rows for " + std::to_string(expected) +
                             " edges");
    }
    return rows;
}

// Loads a graph with its dumped features (and embeddings when the model uses them).
struct LoadedProgram {
    std::unique_ptr<CallGraph> graph;
    ProgramFeatures features;
};

LoadedProgram load_program(const std::string& graph_path, const std::string& features_dir, bool with_sem,
                           std::optional<std::size_t> sem_dim) {
    LoadedProgram p;
    p.graph = std::make_unique<CallGraph>(load_callgraph(graph_path));
    const std::string dir = features_dir_for(graph_path, features_dir);
    const std::string id = p.graph->program_id();
    p.features.graph = p.graph.get();
    p.features.structure = read_features(feature_path(dir, id), p.graph->edge_count());
    if (with_sem) {
        EmbeddingStore store = load_embeddings(embedding_path(dir, id), p.graph->edge_count());
        if (sem_dim && store.dimension() != *sem_dim) {
            throw AlignmentError(embedding_path(dir, id) + ": dimension " + std::to_string(store.dimension()) +
                                 ", model expects " + std::to_string(*sem_dim));
        }
        p.features.sem = store.rows();
    }
    return p;
}

ordered_json report_summary(const PruneReport& r) {
    return {{"precision", r.precision.mean}, {"recall", r.recall.mean}, {"f_measure", r.f_measure.mean}};
}

// ---- commands -------------------------------------------------------------

struct SynthArgs {
    std::string out_dir;
    std::optional<std::size_t> programs;
    std::optional<double> signal;
    std::optional<double> split;
};

int cmd_synth(const Context& ctx, const SynthArgs& a) {
    SynthConfig cfg;
    apply_synth_json(cfg, ctx.config_section("synth").dump());
    if (ctx.global.seed) cfg.seed = *ctx.global.seed;
    if (a.programs) cfg.programs = *a.programs;
    if (a.signal) cfg.signal = *a.signal;
    auto corpus = generate(cfg);
    write_corpus(corpus, cfg, a.out_dir);
    if (a.split) {
        auto [train, test] = split_indices(corpus.size(), *a.split, cfg.seed);
        for (auto [name, idx] : {std::pair{"train.txt", &train}, std::pair{"test.txt", &test}}) {
            std::ofstream list(fs::path(a.out_dir) / name, std::ios::binary);
            for (auto i : *idx) list << corpus[i].graph.program_id() << ".cg.jsonl\n";
        }
    }
    ctx.info("wrote " + std::to_string(corpus.size()) + " programs to " + a.out_dir);
    return kExitOk;
}

struct FeaturizeArgs {
    std::vector<std::string> graphs;
    std::string list;
    std::string src;
    std::string provider = "hash";
    std::string emb;
    std::size_t dim = kDefaultHashDim;
    std::string source_mode = "both";
    std::string out_dir;
};

int cmd_featurize(const Context& ctx, const FeaturizeArgs& a) {
    std::vector<std::string> graphs = a.graphs;
    if (!a.list.empty()) {
        auto listed = read_list(a.list);
        graphs.insert(graphs.end(), listed.begin(), listed.end());
    }
    if (graphs.empty()) throw ConfigError("featurize: give --graph or --list");
    if (a.provider != "hash" && a.provider != "emb") throw ConfigError("--provider must be hash or emb");
    if (a.provider == "emb" && (a.emb.empty() || graphs.size() != 1)) {
        throw ConfigError("--provider emb needs --emb and exactly one --graph");
    }
    if (!a.src.empty() && graphs.size() != 1) throw ConfigError("--src applies to a single --graph");
    const SourceMode mode = parse_source_mode(a.source_mode);

    for (const auto& graph_path : graphs) {
        CallGraph g = load_callgraph(graph_path);
        const std::string dir = a.out_dir.empty() ? features_dir_for(graph_path, "") : a.out_dir;
        fs::create_directories(dir);
        write_features(featurize_graph(g), feature_path(dir, g.program_id()));

        if (a.provider == "hash") {
            std::string src = a.src;
            if (src.empty()) {
                auto sibling = fs::path(graph_path).parent_path() / (g.program_id() + ".src.jsonl");
                if (fs::exists(sibling)) src = sibling.string();
            }
            SourceMap sources;
            if (src.empty()) {
                ctx.warn(g.program_id() + ": no source map, semantic halves are zero");
            } else {
                sources = load_sources(src);
            }
            HashProvider provider(a.dim, mode);
            SemMatrix sem = semantic_matrix(g, provider, sources);
            write_embeddings(EmbeddingStore(static_cast<std::uint32_t>(a.dim), std::move(sem)),
                             embedding_path(dir, g.program_id()));
        } else {
            if (mode != SourceMode::Both) {
                throw ConfigError("source-mode ablations for embedding files are applied at export time");
            }
            // Validates alignment; the file is used in place.
            EmbeddingStore store = load_embeddings(a.emb, g.edge_count());
            const std::string target = embedding_path(dir, g.program_id());
            if (!fs::exists(target) || !fs::equivalent(a.emb, target)) write_embeddings(store, target);
        }
        ctx.info(g.program_id() + ": " + std::to_string(g.edge_count()) + " edges featurized");
    }
    return kExitOk;
}

struct TrainArgs {
    std::string list;
    std::string features_dir;
    std::string out;
    std::optional<std::string> ablation;
    std::optional<std::string> source_mode;
    std::optional<std::size_t> hidden;
    std::optional<double> lr;
    std::optional<std::size_t> batch;
    std::optional<std::size_t> epochs;
};

FusionConfig training_config(const Context& ctx, const TrainArgs& a) {
    FusionConfig cfg;
    apply_config_json(cfg, ctx.config_section("train").dump());
    if (ctx.global.seed) cfg.seed = *ctx.global.seed;
    if (a.ablation) cfg.ablation = parse_ablation(*a.ablation);
    if (a.source_mode) cfg.source_mode = parse_source_mode(*a.source_mode);
    if (a.hidden) cfg.hidden = *a.hidden;
    if (a.lr) cfg.lr = *a.lr;
    if (a.batch) cfg.batch = *a.batch;
    if (a.epochs) cfg.epochs = *a.epochs;
    return cfg;
}

int cmd_train(const Context& ctx, const TrainArgs& a) {
    FusionConfig cfg = training_config(ctx, a);
    std::vector<LoadedProgram> programs;
    for (const auto& path : read_list(a.list)) {
        programs.push_back(load_program(path, a.features_dir, cfg.uses_sem(), std::nullopt));
    }
    if (programs.empty()) throw TrainingError("training list is empty");
    std::vector<ProgramFeatures> features;
    for (const auto& p : programs) features.push_back(p.features);
    if (cfg.uses_sem()) cfg.sem_dim = static_cast<std::size_t>(features.front().sem.cols());

    TrainLog log;
    FusionModel model = train(cfg, assemble_training_set(features, cfg.uses_sem()), &log);
    save_model(model, a.out);
    ctx.info("trained " + std::string(to_string(cfg.ablation)) + " model for " + std::to_string(log.steps) +
             " steps, final epoch loss " + (log.epoch_loss.empty() ? std::string("n/a") : std::to_string(log.epoch_loss.back())));
    return kExitOk;
}

struct PruneArgs {
    std::string model;
    std::string graph;
    std::string features_dir;
    std::string out;
    std::string probs_out;
    bool argmax = false;
    std::optional<double> threshold;
    std::optional<double> random_percent;
};

int cmd_prune(const Context& ctx, const PruneArgs& a) {
    CallGraph pruned;
    if (a.random_percent) {
        CallGraph g = load_callgraph(a.graph);
        pruned = random_prune(g, *a.random_percent, ctx.global.seed.value_or(0));
    } else {
        if (a.model.empty()) throw ConfigError("prune: --model is required unless --random-percent is given");
        FusionModel model = load_model(a.model);
        LoadedProgram p = load_program(a.graph, a.features_dir, model.config.uses_sem(),
                                       model.config.uses_sem() ? std::optional(model.config.sem_dim) : std::nullopt);
        std::vector<double> probs = edge_probabilities(model, p.features);
        if (a.threshold) {
            pruned = prune_threshold(*p.graph, probs, *a.threshold);
        } else {
            const SemVector empty;
            pruned = prune(*p.graph, [&](std::size_t i, const Edge&) {
                SemVector sem = model.config.uses_sem()
                                    ? SemVector(p.features.sem.row(static_cast<Eigen::Index>(i)).transpose())
                                    : empty;
                return classify_edge(model, sem, p.features.structure[i]).label;
            });
        }
        if (!a.probs_out.empty()) write_json(ordered_json{{"program_id", p.graph->program_id()}, {"prob_tp", probs}}, a.probs_out);
    }
    save_callgraph(pruned, a.out);
    ctx.info(pruned.program_id() + ": kept " + std::to_string(pruned.edge_count()) + " edges");
    return kExitOk;
}

struct CalibrateArgs {
    std::string model;
    std::string list;
    std::string features_dir;
    std::string out;
};

int cmd_calibrate(const Context& ctx, const CalibrateArgs& a) {
    FusionModel model = load_model(a.model);
    std::vector<LoadedProgram> programs;
    std::vector<CalibrationProgram> cal;
    for (const auto& path : read_list(a.list)) {
        programs.push_back(load_program(path, a.features_dir, model.config.uses_sem(),
                                        model.config.uses_sem() ? std::optional(model.config.sem_dim) : std::nullopt));
    }
    for (const auto& p : programs) cal.push_back(CalibrationProgram{p.graph.get(), edge_probabilities(model, p.features)});
    CalibrationResult r = calibrate_balanced(cal);
    write_json({{"tau", r.tau}, {"mean_precision", r.mean_precision}, {"mean_recall", r.mean_recall}}, a.out);
    ctx.info("balanced threshold " + std::to_string(r.tau));
    if (r.mean_precision == 0.0 && r.mean_recall == 0.0) {
        ctx.warn("balanced threshold prunes every edge (precision = recall = 0)");
    }
    return kExitOk;
}

struct EvalArgs {
    std::vector<std::string> pred;
    std::vector<std::string> truth;
    std::string truth_list;
    std::string pred_dir;
    std::string out;
};

std::vector<std::pair<std::string, std::string>> eval_pairs(const EvalArgs& a) {
    std::vector<std::pair<std::string, std::string>> pairs;
    if (!a.truth_list.empty()) {
        if (a.pred_dir.empty()) throw ConfigError("--truth-list needs --pred-dir");
        for (const auto& t : read_list(a.truth_list)) {
            pairs.emplace_back((fs::path(a.pred_dir) / fs::path(t).filename()).string(), t);
        }
    }
    if (a.pred.size() != a.truth.size()) throw ConfigError("--pred and --truth must be given the same number of times");
    for (std::size_t i = 0; i < a.pred.size(); ++i) pairs.emplace_back(a.pred[i], a.truth[i]);
    if (pairs.empty()) throw ConfigError("nothing to evaluate");
    return pairs;
}

int cmd_eval(const Context& ctx, const EvalArgs& a, bool monomorph) {
    std::vector<MetricsRow> rows;
    for (const auto& [pred_path, truth_path] : eval_pairs(a)) {
        CallGraph pred = load_callgraph(pred_path);
        CallGraph truth = load_callgraph(truth_path);
        if (pred.program_id() != truth.program_id()) {
            throw AlignmentError("program mismatch: " + pred.program_id() + " vs " + truth.program_id());
        }
        rows.push_back(monomorph ? monomorph_score(pred, truth_graph(truth)) : score(pred, truth_edges(truth)));
    }
    PruneReport report = aggregate(std::move(rows));
    save_report(report, a.out);
    ctx.info(report_summary(report).dump());
    return kExitOk;
}

int exit_code_for(const Error& ex) {
    if (dynamic_cast<const NumericError*>(&ex)) return kExitNumeric;
    if (dynamic_cast<const ConfigError*>(&ex)) return kExitUsage;
    if (dynamic_cast<const ParseError*>(&ex) || dynamic_cast<const DuplicateEdgeError*>(&ex) ||
        dynamic_cast<const FormatError*>(&ex) || dynamic_cast<const AlignmentError*>(&ex) ||
        dynamic_cast<const LengthError*>(&ex) || dynamic_cast<const ShapeError*>(&ex) ||
        dynamic_cast<const IndexError*>(&ex) || dynamic_cast<const TrainingError*>(&ex)) {
        return kExitFormat;
    }
    return kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"cgprune: call-graph pruning with fused structural and semantic edge features", "cgprune"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions global;
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Seed for training, synthesis and random pruning");
    app.add_option("--config", global.config_path, "JSON config with optional 'synth' and 'train' sections")
        ->check(CLI::ExistingFile);
    app.add_flag("--quiet", global.quiet, "Suppress progress and warnings");

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a seeded synthetic labeled corpus");
    synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
    synth_cmd->add_option("--programs", synth.programs, "Number of programs");
    synth_cmd->add_option("--signal", synth.signal, "Semantic signal strength in [0, 1]");
    synth_cmd->add_option("--split", synth.split, "Also write train.txt/test.txt with this train fraction");

    FeaturizeArgs feat;
    auto* feat_cmd = app.add_subcommand("featurize", "Dump structural features and semantic embeddings per edge");
    feat_cmd->add_option("--graph", feat.graphs, "Edges file (*.cg.jsonl); repeatable");
    feat_cmd->add_option("--list", feat.list, "File listing edges files, one per line");
    feat_cmd->add_option("--src", feat.src, "Source map (*.src.jsonl); defaults to the graph's sibling");
    feat_cmd->add_option("--provider", feat.provider, "Semantic provider: hash or emb")->check(CLI::IsMember({"hash", "emb"}));
    feat_cmd->add_option("--emb", feat.emb, "Embedding file for --provider emb");
    feat_cmd->add_option("--dim", feat.dim, "Hash encoder dimension (even)");
    feat_cmd->add_option("--source-mode", feat.source_mode, "both, caller-only or callee-only");
    feat_cmd->add_option("--out-dir", feat.out_dir, "Output directory; defaults to the graph's directory");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train the fusion classifier on labeled programs");
    train_cmd->add_option("--list", tr.list, "File listing training edges files")->required();
    train_cmd->add_option("--features", tr.features_dir, "Directory holding *.feat.jsonl and *.emb");
    train_cmd->add_option("--out", tr.out, "Model file (*.apm.json)")->required();
    train_cmd->add_option("--ablation", tr.ablation, "both, sem-only or struct-only");
    train_cmd->add_option("--source-mode", tr.source_mode, "Recorded source mode of the embeddings");
    train_cmd->add_option("--hidden", tr.hidden, "Hidden size h");
    train_cmd->add_option("--lr", tr.lr, "Adam learning rate");
    train_cmd->add_option("--batch", tr.batch, "Mini-batch size");
    train_cmd->add_option("--epochs", tr.epochs, "Epochs");

    PruneArgs pr;
    auto* prune_cmd = app.add_subcommand("prune", "Remove edges classified as false positives");
    prune_cmd->add_option("--model", pr.model, "Model file");
    prune_cmd->add_option("--graph", pr.graph, "Edges file to prune")->required();
    prune_cmd->add_option("--features", pr.features_dir, "Directory holding *.feat.jsonl and *.emb");
    prune_cmd->add_option("--out", pr.out, "Pruned edges file")->required();
    prune_cmd->add_option("--probs-out", pr.probs_out, "Write prob_TP per edge as JSON");
    auto* argmax_opt = prune_cmd->add_flag("--argmax", pr.argmax, "Keep iff prob_TP > prob_FP (default)");
    auto* thr_opt = prune_cmd->add_option("--threshold", pr.threshold, "Keep iff prob_TP >= threshold")
                        ->check(CLI::Range(0.0, 1.0));
    auto* rand_opt = prune_cmd->add_option("--random-percent", pr.random_percent, "Random baseline: drop N% of edges")
                         ->check(CLI::Range(0.0, 100.0));
    argmax_opt->excludes(thr_opt)->excludes(rand_opt);
    thr_opt->excludes(rand_opt);

    CalibrateArgs cal;
    auto* cal_cmd = app.add_subcommand("calibrate", "Find the balanced-point threshold on training programs");
    cal_cmd->add_option("--model", cal.model, "Model file")->required();
    cal_cmd->add_option("--list", cal.list, "File listing labeled edges files")->required();
    cal_cmd->add_option("--features", cal.features_dir, "Directory holding *.feat.jsonl and *.emb");
    cal_cmd->add_option("--out", cal.out, "Calibration result JSON")->required();

    EvalArgs ev;
    EvalArgs mono;
    auto add_eval_options = [](CLI::App* cmd, EvalArgs& e) {
        cmd->add_option("--pred", e.pred, "Predicted edges file; repeatable, paired with --truth");
        cmd->add_option("--truth", e.truth, "Labeled edges file; repeatable");
        cmd->add_option("--truth-list", e.truth_list, "File listing labeled edges files");
        cmd->add_option("--pred-dir", e.pred_dir, "Directory of predicted files named like the truth files");
        cmd->add_option("--out", e.out, "Report JSON")->required();
    };
    auto* eval_cmd = app.add_subcommand("eval", "Precision/recall/F-measure of pruned graphs against ground truth");
    add_eval_options(eval_cmd, ev);
    auto* mono_cmd = app.add_subcommand("monomorph", "Score monomorphic call-site detection against ground truth");
    add_eval_options(mono_cmd, mono);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitUsage;
    }
    if (seed_opt->count() > 0) global.seed = seed;

    Context ctx{global, out, err};
    try {
        if (synth_cmd->parsed()) return cmd_synth(ctx, synth);
        if (feat_cmd->parsed()) return cmd_featurize(ctx, feat);
        if (train_cmd->parsed()) return cmd_train(ctx, tr);
        if (prune_cmd->parsed()) return cmd_prune(ctx, pr);
        if (cal_cmd->parsed()) return cmd_calibrate(ctx, cal);
        if (eval_cmd->parsed()) return cmd_eval(ctx, ev, false);
        if (mono_cmd->parsed()) return cmd_eval(ctx, mono, true);
    } catch (const Error& ex) {
        err << "error: " << ex.what() << '\n';
        return exit_code_for(ex);
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace cgprune
