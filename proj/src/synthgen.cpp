#include "cgprune/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

#include "cgprune/error.hpp"
#include "cgprune/nn/rng.hpp"

namespace cgprune {

namespace {

constexpr std::uint64_t kVocabStream = 0xC0FFEE;
constexpr std::uint64_t kSplitStream = 0x5B117;

struct Vocabulary {
    std::vector<std::vector<std::string>> topic_words;
    std::vector<std::string> common;
};

// Pronounceable lowercase words, unique across the whole vocabulary.
Vocabulary make_vocabulary(const SynthConfig& cfg) {
    static const char* syllables[] = {"ka", "lo", "mi", "ren", "tu", "sa", "vor", "pel", "din", "qua", "zo",
                                      "bri", "fen", "gal", "hu", "jex", "mor", "nal", "pri", "sto", "tar", "ul",
                                      "vex", "wyn", "yar", "cor", "dra", "el", "fi", "gor", "is", "ob"};
    constexpr std::size_t kSyllables = sizeof(syllables) / sizeof(syllables[0]);
    nn::Rng rng(nn::derive_seed(cfg.seed, kVocabStream));
    std::set<std::string> used;
    auto word = [&] {
        for (;;) {
            std::string w;
            const auto parts = rng.between(2, 3);
            for (std::int64_t k = 0; k < parts; ++k) w += syllables[rng.below(kSyllables)];
            if (used.insert(w).second) return w;
        }
    };
    Vocabulary v;
    v.topic_words.resize(cfg.topics);
    for (auto& words : v.topic_words) {
        for (std::size_t k = 0; k < cfg.topic_vocab; ++k) words.push_back(word());
    }
    for (std::size_t k = 0; k < cfg.common_vocab; ++k) v.common.push_back(word());
    return v;
}

std::string capitalize(std::string w) {
    if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
}

struct PendingEdge {
    std::size_t caller;
    std::size_t callee;
    std::uint64_t offset;
    bool truth;
};

class ProgramBuilder {
public:
    ProgramBuilder(const SynthConfig& cfg, const Vocabulary& vocab, std::size_t index)
        : cfg_(cfg), vocab_(vocab), rng_(nn::derive_seed(cfg.seed, index)) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "prog%03zu", index);
        id_ = buf;
    }

    SynthProgram build() {
        const auto n = static_cast<std::size_t>(
            rng_.between(static_cast<std::int64_t>(cfg_.min_nodes), static_cast<std::int64_t>(cfg_.max_nodes)));
        topic_.resize(n);
        for (auto& t : topic_) t = static_cast<std::size_t>(rng_.below(cfg_.topics));
        by_topic_.assign(cfg_.topics, {});
        for (std::size_t i = 0; i < n; ++i) by_topic_[topic_[i]].push_back(i);
        next_offset_.assign(n, 0);

        // Spanning backbone: every function is reachable from main (node 0).
        for (std::size_t i = 1; i < n; ++i) {
            std::size_t parent;
            if (rng_.bernoulli(cfg_.signal)) {
                std::vector<std::size_t> same;
                for (std::size_t j = 0; j < i; ++j) {
                    if (topic_[j] == topic_[i]) same.push_back(j);
                }
                parent = same.empty() ? 0 : same[rng_.below(same.size())];
            } else {
                parent = static_cast<std::size_t>(rng_.below(i));
            }
            add_site_edge(parent, i, true);
        }
        const auto extra = static_cast<std::size_t>(std::llround(cfg_.true_density * static_cast<double>(n)));
        for (std::size_t k = 0; k < extra; ++k) {
            std::size_t caller = static_cast<std::size_t>(rng_.below(n));
            add_site_edge(caller, true_callee(caller), true);
        }

        // Polymorphic sites: the whole fanout is true.
        std::size_t poly = 0;
        const std::size_t true_sites = sites_.size();
        for (std::size_t s = 0; s < true_sites; ++s) {
            if (!rng_.bernoulli(cfg_.poly_rate)) continue;
            const auto fanout = static_cast<std::size_t>(rng_.between(static_cast<std::int64_t>(cfg_.poly_fanout_min),
                                                                      static_cast<std::int64_t>(cfg_.poly_fanout_max)));
            const auto [caller, offset] = sites_[s];
            bool grew = false;
            for (std::size_t k = 1; k < fanout; ++k) grew |= try_add(caller, true_callee(caller), offset, true);
            poly += grew ? 1 : 0;
            if (grew) poly_sites_.insert(sites_[s]);
        }
        // False edges never land on a polymorphic site.
        std::vector<std::pair<std::size_t, std::uint64_t>> reusable;
        for (const auto& site : sites_) {
            if (!poly_sites_.contains(site)) reusable.push_back(site);
        }

        std::size_t true_edges = edges_.size();
        const auto false_edges =
            static_cast<std::size_t>(std::llround(cfg_.false_density * static_cast<double>(true_edges)));
        for (std::size_t k = 0; k < false_edges; ++k) {
            for (int attempt = 0; attempt < 32; ++attempt) {
                bool reuse = !reusable.empty() && rng_.bernoulli(cfg_.false_site_reuse);
                std::size_t caller;
                std::uint64_t offset;
                if (reuse) {
                    std::tie(caller, offset) = reusable[rng_.below(reusable.size())];
                } else {
                    caller = static_cast<std::size_t>(rng_.below(n));
                    offset = next_offset_[caller];
                }
                if (!try_add(caller, false_callee(caller), offset, false)) continue;
                if (!reuse) reusable.emplace_back(caller, open_site(caller));
                break;
            }
        }

        return finish(n, poly);
    }

private:
    std::size_t uniform_node() { return static_cast<std::size_t>(rng_.below(topic_.size())); }

    std::size_t true_callee(std::size_t caller) {
        if (rng_.bernoulli(cfg_.signal)) {
            const auto& same = by_topic_[topic_[caller]];
            return same[rng_.below(same.size())];
        }
        return uniform_node();
    }

    std::size_t false_callee(std::size_t caller) {
        if (rng_.bernoulli(cfg_.signal)) {
            std::vector<std::size_t> other;
            for (std::size_t i = 0; i < topic_.size(); ++i) {
                if (topic_[i] != topic_[caller]) other.push_back(i);
            }
            if (!other.empty()) return other[rng_.below(other.size())];
        }
        return uniform_node();
    }

    std::uint64_t open_site(std::size_t caller) {
        std::uint64_t offset = next_offset_[caller];
        next_offset_[caller] += 1 + rng_.below(4);
        sites_.emplace_back(caller, offset);
        return offset;
    }

    void add_site_edge(std::size_t caller, std::size_t callee, bool truth) {
        std::uint64_t offset = open_site(caller);
        try_add(caller, callee, offset, truth);
    }

    bool try_add(std::size_t caller, std::size_t callee, std::uint64_t offset, bool truth) {
        if (!seen_.insert({caller, callee, offset}).second) return false;
        edges_.push_back(PendingEdge{caller, callee, offset, truth});
        return true;
    }

    std::string signature(std::size_t node) const {
        if (node == 0) return id_ + ".Main.main()";
        const auto& words = vocab_.topic_words[topic_[node]];
        const std::string& cls = words[node % words.size()];
        const std::string& verb = words[(node * 7 + 3) % words.size()];
        return id_ + "." + capitalize(cls) + ".run" + capitalize(verb) + std::to_string(node) + "(" +
               std::to_string(node % 3) + ")";
    }

    std::string source(std::size_t node) {
        const auto& words = vocab_.topic_words[topic_[node]];
        std::string sig = signature(node);
        std::string code = "void " + std::string(simple_name(sig)) + "() {";
        for (std::size_t k = 0; k < cfg_.body_tokens; ++k) {
            const auto& pool = rng_.bernoulli(cfg_.topic_purity) ? words : vocab_.common;
            code += ' ';
            code += pool[rng_.below(pool.size())];
            if (k % 4 == 3) code += ";";
        }
        code += " }";
        return code;
    }

    SynthProgram finish(std::size_t n, std::size_t poly) {
        std::vector<std::size_t> order(edges_.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng_.shuffle(std::span<std::size_t>(order));

        CallGraphBuilder b(id_);
        for (std::size_t k : order) {
            const auto& e = edges_[k];
            b.add_edge(signature(e.caller), signature(e.callee), e.offset,
                       e.truth ? Label::TruePositive : Label::FalsePositive);
        }
        SynthProgram p;
        p.graph = std::move(b).build();
        p.polymorphic_sites = poly;
        p.topics.resize(p.graph.node_count());
        for (std::size_t i = 0; i < n; ++i) {
            std::string sig = signature(i);
            auto id = p.graph.find_node(sig);
            if (id) p.topics[*id] = topic_[i];
            if (i != 0 && rng_.bernoulli(cfg_.missing_source_rate)) continue;
            p.sources.insert(sig, source(i));
        }
        return p;
    }

    const SynthConfig& cfg_;
    const Vocabulary& vocab_;
    nn::Rng rng_;
    std::string id_;
    std::vector<std::size_t> topic_;
    std::vector<std::vector<std::size_t>> by_topic_;
    std::vector<std::uint64_t> next_offset_;
    std::vector<std::pair<std::size_t, std::uint64_t>> sites_;
    std::set<std::pair<std::size_t, std::uint64_t>> poly_sites_;
    std::set<std::tuple<std::size_t, std::size_t, std::uint64_t>> seen_;
    std::vector<PendingEdge> edges_;
};

nlohmann::ordered_json config_json(const SynthConfig& c) {
    return {{"seed", c.seed},
            {"programs", c.programs},
            {"min_nodes", c.min_nodes},
            {"max_nodes", c.max_nodes},
            {"true_density", c.true_density},
            {"false_density", c.false_density},
            {"false_site_reuse", c.false_site_reuse},
            {"poly_rate", c.poly_rate},
            {"poly_fanout_min", c.poly_fanout_min},
            {"poly_fanout_max", c.poly_fanout_max},
            {"topics", c.topics},
            {"topic_vocab", c.topic_vocab},
            {"common_vocab", c.common_vocab},
            {"body_tokens", c.body_tokens},
            {"topic_purity", c.topic_purity},
            {"missing_source_rate", c.missing_source_rate},
            {"signal", c.signal}};
}

}  // namespace

void SynthConfig::validate() const {
    auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (programs < 1) throw ConfigError("synth: need at least one program");
    if (min_nodes < 2 || max_nodes < min_nodes) throw ConfigError("synth: node range must satisfy 2 <= min <= max");
    if (!(true_density >= 0.0) || !(false_density >= 0.0)) throw ConfigError("synth: densities must be >= 0");
    if (!unit(false_site_reuse) || !unit(poly_rate) || !unit(topic_purity) || !unit(missing_source_rate) ||
        !unit(signal)) {
        throw ConfigError("synth: rates and signal must lie in [0, 1]");
    }
    if (poly_fanout_min < 2 || poly_fanout_max < poly_fanout_min) {
        throw ConfigError("synth: polymorphic fanout range must satisfy 2 <= min <= max");
    }
    if (topics < 1 || topic_vocab < 1 || common_vocab < 1) throw ConfigError("synth: vocabularies must be non-empty");
}

SynthProgram generate_program(const SynthConfig& cfg, std::size_t index) {
    cfg.validate();
    Vocabulary vocab = make_vocabulary(cfg);
    return ProgramBuilder(cfg, vocab, index).build();
}

std::vector<SynthProgram> generate(const SynthConfig& cfg) {
    cfg.validate();
    Vocabulary vocab = make_vocabulary(cfg);
    std::vector<SynthProgram> corpus;
    corpus.reserve(cfg.programs);
    for (std::size_t p = 0; p < cfg.programs; ++p) corpus.push_back(ProgramBuilder(cfg, vocab, p).build());
    return corpus;
}

void write_corpus(const std::vector<SynthProgram>& corpus, const SynthConfig& cfg, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["config"] = config_json(cfg);
    manifest["programs"] = nlohmann::ordered_json::array();
    for (const auto& p : corpus) {
        const std::string id = p.graph.program_id();
        const std::string graph_file = id + ".cg.jsonl";
        const std::string src_file = id + ".src.jsonl";
        save_callgraph(p.graph, (fs::path(dir) / graph_file).string());
        save_sources(p.sources, p.graph.nodes(), (fs::path(dir) / src_file).string());
        manifest["programs"].push_back({{"id", id},
                                        {"graph", graph_file},
                                        {"sources", src_file},
                                        {"nodes", p.graph.node_count()},
                                        {"edges", p.graph.edge_count()},
                                        {"true_edges", truth_edges(p.graph).size()},
                                        {"polymorphic_sites", p.polymorphic_sites}});
    }
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
    if (!out) throw IoError("cannot write manifest in " + dir);
    out << manifest.dump(2) << '\n';
}

std::string synth_config_json(const SynthConfig& cfg) { return config_json(cfg).dump(2); }

void apply_synth_json(SynthConfig& cfg, const std::string& json_text) {
    try {
        auto j = nlohmann::json::parse(json_text);
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
        };
        get("seed", cfg.seed);
        get("programs", cfg.programs);
        get("min_nodes", cfg.min_nodes);
        get("max_nodes", cfg.max_nodes);
        get("true_density", cfg.true_density);
        get("false_density", cfg.false_density);
        get("false_site_reuse", cfg.false_site_reuse);
        get("poly_rate", cfg.poly_rate);
        get("poly_fanout_min", cfg.poly_fanout_min);
        get("poly_fanout_max", cfg.poly_fanout_max);
        get("topics", cfg.topics);
        get("topic_vocab", cfg.topic_vocab);
        get("common_vocab", cfg.common_vocab);
        get("body_tokens", cfg.body_tokens);
        get("topic_purity", cfg.topic_purity);
        get("missing_source_rate", cfg.missing_source_rate);
        get("signal", cfg.signal);
    } catch (const std::exception& ex) {
        throw ConfigError(std::string("bad synth config: ") + ex.what());
    }
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double train_fraction,
                                                                            std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must be in (0, 1)");
    const auto train_count = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    if (n < 2 || train_count == 0 || train_count >= n) {
        throw ConfigError("too few programs (" + std::to_string(n) + ") to split at " + std::to_string(train_fraction));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    nn::Rng rng(nn::derive_seed(seed, kSplitStream));
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count));
    std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(train_count), order.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {train, test};
}

}  // namespace cgprune
