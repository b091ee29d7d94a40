#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cgprune/error.hpp"
#include "cgprune/fusion_model.hpp"
#include "cgprune/pipeline.hpp"
#include "cgprune/prune_eval.hpp"
#include "cgprune/synthgen.hpp"

using namespace cgprune;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SynthConfig small() {
    SynthConfig c;
    c.programs = 6;
    return c;
}

}  // namespace

TEST(Synth, ProgramShape) {
    auto corpus = generate(small());
    ASSERT_EQ(corpus.size(), 6u);
    for (const auto& p : corpus) {
        const auto& g = p.graph;
        ASSERT_TRUE(g.entry().has_value()) << g.program_id();
        EXPECT_GE(g.node_count(), 40u);
        EXPECT_LE(g.node_count(), 80u);
        EXPECT_EQ(p.topics.size(), g.node_count());
        for (const auto& e : g.edges()) EXPECT_NE(e.label, Label::Unknown);

        // Every function is reachable from main through true edges.
        auto truth = truth_graph(g);
        for (NodeId v = 0; v < g.node_count(); ++v) EXPECT_GE(truth.depth(v), 0) << g.sig(v);

        EXPECT_TRUE(p.sources.lookup(g.sig(*g.entry())).has_value());
    }
}

TEST(Synth, PolymorphicSitesAreAllTrue) {
    auto corpus = generate(small());
    std::size_t planted = 0;
    std::size_t all_true_poly = 0;
    for (const auto& p : corpus) {
        planted += p.polymorphic_sites;
        std::map<std::pair<NodeId, std::uint64_t>, std::pair<int, int>> sites;
        for (const auto& e : p.graph.edges()) {
            auto& s = sites[{e.caller, e.offset}];
            (e.label == Label::TruePositive ? s.first : s.second) += 1;
        }
        for (const auto& [k, v] : sites) all_true_poly += v.first >= 2 && v.second == 0;
    }
    EXPECT_GT(planted, 0u);
    EXPECT_GE(all_true_poly, planted);
}

TEST(Synth, SignalSeparatesTopics) {
    SynthConfig c = small();
    c.signal = 1.0;
    std::size_t true_same = 0;
    std::size_t true_n = 0;
    std::size_t false_cross = 0;
    std::size_t false_n = 0;
    for (const auto& p : generate(c)) {
        for (const auto& e : p.graph.edges()) {
            const bool same = p.topics[e.caller] == p.topics[e.callee];
            if (e.label == Label::TruePositive) {
                ++true_n;
                true_same += same;
            } else {
                ++false_n;
                false_cross += !same;
            }
        }
    }
    EXPECT_GT(static_cast<double>(true_same) / true_n, 0.9);
    EXPECT_EQ(false_cross, false_n);
}

TEST(Synth, SameSeedSameBytes) {
    auto a = fs::temp_directory_path() / "cgprune_synth_a";
    auto b = fs::temp_directory_path() / "cgprune_synth_b";
    fs::remove_all(a);
    fs::remove_all(b);
    auto cfg = small();
    write_corpus(generate(cfg), cfg, a.string());
    write_corpus(generate(cfg), cfg, b.string());
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        ++files;
        EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path();
    }
    EXPECT_EQ(files, 2 * cfg.programs + 1);
    auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    EXPECT_EQ(manifest["programs"].size(), cfg.programs);
    EXPECT_EQ(manifest["config"]["seed"], 42);

    auto g = load_callgraph((a / "prog000.cg.jsonl").string());
    EXPECT_EQ(g.program_id(), "prog000");
    auto c = cfg;
    c.seed = 43;
    EXPECT_NE(edge_keys(generate_program(c, 0).graph), edge_keys(g));
}

TEST(Synth, ProgramsAreIndependentOfCorpusSize) {
    auto cfg = small();
    auto corpus = generate(cfg);
    auto alone = generate_program(cfg, 3);
    EXPECT_EQ(edge_keys(alone.graph), edge_keys(corpus[3].graph));
}

TEST(Synth, InvalidConfigs) {
    SynthConfig c;
    c.signal = 1.5;
    EXPECT_THROW(generate(c), ConfigError);
    c = SynthConfig{};
    c.min_nodes = 90;
    EXPECT_THROW(generate(c), ConfigError);
    c = SynthConfig{};
    c.min_nodes = 1;
    EXPECT_THROW(generate(c), ConfigError);
    c = SynthConfig{};
    c.programs = 0;
    EXPECT_THROW(generate(c), ConfigError);
    c = SynthConfig{};
    c.topic_vocab = 0;
    EXPECT_THROW(generate(c), ConfigError);
}

TEST(Synth, JsonConfigRoundTrip) {
    SynthConfig c;
    c.signal = 0.25;
    c.programs = 9;
    SynthConfig d;
    apply_synth_json(d, synth_config_json(c));
    EXPECT_EQ(d.signal, 0.25);
    EXPECT_EQ(d.programs, 9u);
    EXPECT_THROW(apply_synth_json(d, R"({"programs": "many"})"), ConfigError);
}

TEST(Split, TwentyFive) {
    auto [train, test] = split_indices(25, 0.8, 42);
    EXPECT_EQ(train.size(), 20u);
    EXPECT_EQ(test.size(), 5u);
    std::vector<bool> seen(25, false);
    for (auto i : train) seen[i] = true;
    for (auto i : test) {
        EXPECT_FALSE(seen[i]);
        seen[i] = true;
    }
    EXPECT_EQ(std::count(seen.begin(), seen.end(), true), 25);
    EXPECT_EQ(split_indices(25, 0.8, 42), split_indices(25, 0.8, 42));
    EXPECT_NE(split_indices(25, 0.8, 42), split_indices(25, 0.8, 7));
}

TEST(Split, Errors) {
    EXPECT_THROW(split_indices(1, 0.5, 0), ConfigError);
    EXPECT_THROW(split_indices(10, 0.0, 0), ConfigError);
    EXPECT_THROW(split_indices(10, 1.0, 0), ConfigError);
    EXPECT_THROW(split_indices(3, 0.9, 0), ConfigError);
}

TEST(Split, ProgramLevel) {
    auto corpus = generate(small());
    std::vector<std::string> ids;
    for (const auto& p : corpus) ids.push_back(p.graph.program_id());
    auto [train, test] = split(ids, 0.5, 1);
    for (const auto& t : test) EXPECT_EQ(std::count(train.begin(), train.end(), t), 0);
}

// With no semantic signal and equal true/false densities, a sem-only model has
// nothing to learn.
TEST(Synth, NoSignalControl) {
    SynthConfig sc;
    sc.signal = 0.0;
    sc.false_density = 1.0;
    auto corpus = generate(sc);
    auto [train_idx, test_idx] = split_indices(corpus.size(), 0.8, sc.seed);

    HashProvider provider(256);
    std::vector<ProgramFeatures> feats;
    for (const auto& p : corpus) feats.push_back(featurize_program(p.graph, &provider, p.sources));
    std::vector<ProgramFeatures> train_feats;
    for (auto i : train_idx) train_feats.push_back(feats[i]);

    FusionConfig fc;
    fc.sem_dim = 256;
    fc.ablation = Ablation::SemOnly;
    fc.lr = 5e-4;
    fc.epochs = 40;
    fc.seed = 42;
    auto model = train(fc, assemble_training_set(train_feats, true));

    std::vector<MetricsRow> rows;
    for (auto i : test_idx) {
        const auto& f = feats[i];
        auto pruned = prune(*f.graph, [&](std::size_t k, const Edge&) {
            return classify_edge(model, f.sem.row(static_cast<Eigen::Index>(k)).transpose(), f.structure[k]).label;
        });
        rows.push_back(score(pruned, truth_edges(*f.graph)));
    }
    EXPECT_NEAR(aggregate(rows).f_measure.mean, 0.5, 0.1);
}
