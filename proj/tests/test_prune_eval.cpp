#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cgprune/error.hpp"
#include "cgprune/prune_eval.hpp"
#include "oracles.hpp"

using namespace cgprune;

namespace {

CallGraph five_edges() {
    CallGraphBuilder b("five");
    b.add_node("lonely");
    b.add_edge("main", "a", 0, Label::TruePositive);
    b.add_edge("main", "b", 0, Label::FalsePositive);
    b.add_edge("a", "c", 1, Label::TruePositive);
    b.add_edge("b", "c", 2, Label::FalsePositive);
    b.add_edge("c", "a", 0, Label::TruePositive);
    return std::move(b).build();
}

std::vector<EdgeKey> random_keys(std::mt19937_64& rng) {
    std::vector<EdgeKey> out;
    const auto n = rng() % 12;
    for (std::size_t i = 0; i < n; ++i) {
        EdgeKey k{"f" + std::to_string(rng() % 4), "g" + std::to_string(rng() % 4), rng() % 3};
        if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
    }
    return out;
}

CallGraph graph_from(const std::vector<EdgeKey>& keys, const std::string& id = "p") {
    CallGraphBuilder b(id);
    for (const auto& k : keys) b.add_edge(k.caller, k.callee, k.offset, Label::TruePositive);
    return std::move(b).build();
}

}  // namespace

TEST(Prune, ConstantClassifiers) {
    auto g = five_edges();
    auto all = prune(g, [](std::size_t, const Edge&) { return Label::TruePositive; });
    EXPECT_EQ(edge_keys(all), edge_keys(g));
    EXPECT_EQ(all.node_count(), g.node_count());
    auto none = prune(g, [](std::size_t, const Edge&) { return Label::FalsePositive; });
    EXPECT_EQ(none.edge_count(), 0u);
    EXPECT_EQ(none.node_count(), g.node_count());
}

TEST(Prune, EvenOrdinals) {
    auto g = five_edges();
    auto h = prune(g, [](std::size_t i, const Edge&) { return i % 2 == 0 ? Label::TruePositive : Label::FalsePositive; });
    ASSERT_EQ(h.edge_count(), 3u);
    EXPECT_EQ(h.key(0), g.key(0));
    EXPECT_EQ(h.key(1), g.key(2));
    EXPECT_EQ(h.key(2), g.key(4));
}

TEST(Prune, ClassifierFailureNamesOrdinal) {
    auto g = five_edges();
    try {
        prune(g, [](std::size_t i, const Edge&) {
            if (i == 3) throw std::runtime_error("boom");
            return Label::TruePositive;
        });
        FAIL();
    } catch (const Error& ex) {
        EXPECT_NE(std::string(ex.what()).find("ordinal 3"), std::string::npos);
    }
    EXPECT_THROW(prune(g, [](std::size_t, const Edge&) { return Label::Unknown; }), Error);
}

TEST(Prune, AlgorithmOneOnRandomClassifiers) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        auto g = oracle::random_graph(rng);
        std::vector<Label> verdicts(g.edge_count());
        for (auto& v : verdicts) v = rng() % 2 ? Label::TruePositive : Label::FalsePositive;
        auto h = prune(g, [&](std::size_t i, const Edge&) { return verdicts[i]; });
        ASSERT_EQ(std::vector<std::string>(h.nodes().begin(), h.nodes().end()),
                  std::vector<std::string>(g.nodes().begin(), g.nodes().end()));
        std::vector<EdgeKey> expect;
        for (std::size_t i = 0; i < g.edge_count(); ++i) {
            if (verdicts[i] == Label::TruePositive) expect.push_back(g.key(i));
        }
        std::vector<EdgeKey> got;
        for (std::size_t i = 0; i < h.edge_count(); ++i) got.push_back(h.key(i));
        ASSERT_EQ(got, expect);
    }
}

TEST(Threshold, Boundaries) {
    auto g = five_edges();
    std::vector<double> probs{0.0, 1.0, 0.5, 0.99, 1.0};
    EXPECT_EQ(prune_threshold(g, probs, 0.0).edge_count(), 5u);
    EXPECT_EQ(prune_threshold(g, probs, 1.0).edge_count(), 2u);
    EXPECT_EQ(prune_threshold(g, probs, 0.5).edge_count(), 4u);
    std::vector<double> short_probs{0.1};
    EXPECT_THROW(prune_threshold(g, short_probs, 0.5), LengthError);
}

TEST(Threshold, MonotoneOverGrid) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> probs(1 + rng() % 40);
        for (auto& p : probs) p = rng() % 5 == 0 ? std::round(u(rng) * 100) / 100 : u(rng);
        auto grid = calibration_grid();
        for (std::size_t a = 0; a + 1 < grid.size(); ++a) {
            auto lo = threshold_mask(probs, grid[a]);
            auto hi = threshold_mask(probs, grid[a + 1]);
            for (std::size_t i = 0; i < probs.size(); ++i) ASSERT_TRUE(!hi[i] || lo[i]);
        }
    }
}

TEST(Random, Extremes) {
    auto g = five_edges();
    EXPECT_EQ(random_prune(g, 0, 1).edge_count(), 5u);
    EXPECT_EQ(random_prune(g, 100, 1).edge_count(), 0u);
    EXPECT_EQ(random_prune(g, 40, 1).edge_count(), 3u);
    EXPECT_EQ(random_prune(g, 100, 1).node_count(), g.node_count());
    EXPECT_THROW(random_prune(g, 101, 1), ConfigError);
}

TEST(Random, SeededAndReproducible) {
    auto g = five_edges();
    EXPECT_EQ(edge_keys(random_prune(g, 40, 9)), edge_keys(random_prune(g, 40, 9)));
}

TEST(Random, MonteCarloRecall) {
    CallGraphBuilder b("all_true");
    for (int i = 0; i < 60; ++i) b.add_edge("f" + std::to_string(i % 7), "g" + std::to_string(i), 0, Label::TruePositive);
    auto g = std::move(b).build();
    auto truth = truth_edges(g);
    for (double pct : {10.0, 37.0, 75.0}) {
        double total = 0;
        for (std::uint64_t seed = 0; seed < 1000; ++seed) total += score(random_prune(g, pct, seed), truth).recall;
        EXPECT_NEAR(total / 1000.0, 1.0 - pct / 100.0, 0.02);
    }
}

TEST(Score, HandCount) {
    EdgeKeySet s{{"a", "1", 0}, {"a", "2", 0}, {"a", "3", 0}};
    EdgeKeySet g{{"a", "1", 0}, {"a", "2", 0}, {"a", "4", 0}};
    auto r = score_sets("p", s, g);
    EXPECT_DOUBLE_EQ(r.precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.recall, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.f_measure, 2.0 / 3.0);
    auto same = score_sets("p", s, s);
    EXPECT_EQ(same.f_measure, 1.0);
}

TEST(Score, EmptyConventions) {
    EdgeKeySet none;
    EdgeKeySet one{{"a", "b", 0}};
    auto r = score_sets("p", none, one);
    EXPECT_EQ(r.precision, 0.0);
    EXPECT_EQ(r.recall, 0.0);
    EXPECT_EQ(r.f_measure, 0.0);
    auto q = score_sets("p", one, none);
    EXPECT_EQ(q.recall, 0.0);
}

TEST(Score, MatchesNaiveOracle) {
    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 500; ++trial) {
        auto s = random_keys(rng);
        auto g = random_keys(rng);
        auto ref = oracle::naive_prf(s, g);
        auto row = score(graph_from(s), EdgeKeySet(g.begin(), g.end()));
        ASSERT_EQ(row.precision, ref.p);
        ASSERT_EQ(row.recall, ref.r);
        ASSERT_EQ(row.f_measure, ref.f);
        if (row.precision + row.recall > 0) {
            ASSERT_NEAR(row.f_measure, 2 * row.precision * row.recall / (row.precision + row.recall), 1e-12);
        }
        EXPECT_GE(row.f_measure, 0.0);
        EXPECT_LE(row.f_measure, 1.0);
    }
}

TEST(Score, UnprunedGraphHasFullRecall) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        auto g = oracle::random_graph(rng);
        auto truth = truth_edges(g);
        if (truth.empty()) continue;
        EXPECT_EQ(score(g, truth).recall, 1.0);
    }
}

TEST(Aggregate, MeanAndPopulationStd) {
    auto one = aggregate({metrics_from_counts("a", 4, 4, 3)});
    EXPECT_EQ(one.precision.mean, 0.75);
    EXPECT_EQ(one.precision.std, 0.0);

    MetricsRow a;
    a.precision = 0.2;
    MetricsRow b;
    b.precision = 0.6;
    auto two = aggregate({a, b});
    EXPECT_NEAR(two.precision.mean, 0.4, 1e-15);
    EXPECT_NEAR(two.precision.std, 0.2, 1e-15);
    EXPECT_THROW(aggregate({}), ConfigError);
}

TEST(Aggregate, MatchesStreamingRecomputation) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<MetricsRow> rows(37);
    for (auto& r : rows) {
        r.precision = u(rng);
        r.recall = u(rng);
        r.f_measure = u(rng);
    }
    auto rep = aggregate(rows);
    // Welford.
    double mean = 0;
    double m2 = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double d = rows[i].recall - mean;
        mean += d / static_cast<double>(i + 1);
        m2 += d * (rows[i].recall - mean);
    }
    EXPECT_NEAR(rep.recall.mean, mean, 1e-12);
    EXPECT_NEAR(rep.recall.std, std::sqrt(m2 / static_cast<double>(rows.size())), 1e-12);
}

TEST(Report, JsonShape) {
    auto rep = aggregate({metrics_from_counts("p1", 4, 4, 3), metrics_from_counts("p2", 2, 5, 2)});
    std::ostringstream out;
    write_report(rep, out);
    auto j = nlohmann::json::parse(out.str());
    ASSERT_EQ(j["per_program"].size(), 2u);
    EXPECT_EQ(j["per_program"][1]["program_id"], "p2");
    EXPECT_EQ(j["per_program"][1]["overlap"], 2);
    for (auto k : {"precision", "recall", "f_measure"}) {
        EXPECT_TRUE(j["aggregate"][k].contains("mean"));
        EXPECT_TRUE(j["aggregate"][k].contains("std"));
    }
}

TEST(Calibrate, PerfectClassifierPicksSmallestPositiveTau) {
    auto g = five_edges();
    std::vector<double> probs;
    for (const auto& e : g.edges()) probs.push_back(e.label == Label::TruePositive ? 1.0 : 0.0);
    std::vector<CalibrationProgram> progs{{&g, probs}};
    auto r = calibrate_balanced(progs);
    EXPECT_EQ(r.tau, 0.01);
    EXPECT_EQ(r.mean_precision, 1.0);
    EXPECT_EQ(r.mean_recall, 1.0);
}

TEST(Calibrate, GridMinimizesGapExhaustively) {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<CallGraph> graphs;
        for (int k = 0; k < 3; ++k) graphs.push_back(oracle::random_graph(rng, {}, "g" + std::to_string(k)));
        std::vector<CalibrationProgram> progs;
        for (const auto& g : graphs) {
            std::vector<double> probs(g.edge_count());
            for (std::size_t i = 0; i < probs.size(); ++i) {
                const double bias = g.edge(i).label == Label::TruePositive ? 0.3 : 0.0;
                probs[i] = std::min(1.0, u(rng) * 0.7 + bias);
            }
            progs.push_back({&g, probs});
        }
        auto best = calibrate_balanced(progs);
        const double best_gap = std::abs(best.mean_precision - best.mean_recall);
        for (double tau : calibration_grid()) {
            double p = 0;
            double r = 0;
            for (const auto& pr : progs) {
                auto kept = prune_threshold(*pr.graph, pr.probs, tau);
                auto row = score(kept, truth_edges(*pr.graph));
                p += row.precision;
                r += row.recall;
            }
            const double gap = std::abs(p / 3 - r / 3);
            ASSERT_LE(best_gap, gap + 1e-15) << "tau " << tau;
            if (tau < best.tau) ASSERT_GT(gap, best_gap) << "tie must pick smallest tau";
        }
    }
}

TEST(Calibrate, Errors) {
    std::vector<CalibrationProgram> none;
    EXPECT_THROW(calibrate_balanced(none), ConfigError);
    auto g = five_edges();
    std::vector<CalibrationProgram> bad{{&g, {0.5}}};
    EXPECT_THROW(calibrate_balanced(bad), LengthError);
}

TEST(Monomorph, Basics) {
    CallGraphBuilder b("m");
    b.add_edge("a", "b", 0);
    b.add_edge("c", "d", 0);
    b.add_edge("c", "e", 0);
    auto g = std::move(b).build();
    auto sites = monomorphic_sites(g);
    EXPECT_EQ(sites, (CallSiteSet{{"a", 0}}));
}

TEST(Monomorph, PolymorphicNoiseLowersRecall) {
    CallGraphBuilder t("m");
    t.add_edge("a", "b", 0, Label::TruePositive);
    t.add_edge("a", "c", 1, Label::TruePositive);
    auto truth = std::move(t).build();
    CallGraphBuilder p("m");
    p.add_edge("a", "b", 0);
    p.add_edge("a", "x", 0);
    p.add_edge("a", "c", 1);
    auto pred = std::move(p).build();
    EXPECT_EQ(monomorph_score(truth, truth).f_measure, 1.0);
    auto r = monomorph_score(pred, truth);
    EXPECT_EQ(r.recall, 0.5);
    EXPECT_EQ(r.precision, 1.0);
}

TEST(Monomorph, MatchesBruteForce) {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 500; ++trial) {
        auto g = oracle::random_graph(rng);
        auto ref = oracle::monomorphic(g);
        ASSERT_EQ(monomorphic_sites(g), CallSiteSet(ref.begin(), ref.end()));
    }
    for (int trial = 0; trial < 100; ++trial) {
        auto g = oracle::random_graph(rng);
        std::vector<bool> keep(g.edge_count());
        for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = rng() % 3 != 0;
        auto pred = g.filter_edges(keep);
        auto truth = truth_graph(g);
        auto ref = oracle::naive_prf(oracle::monomorphic(pred), oracle::monomorphic(truth));
        auto row = monomorph_score(pred, truth);
        ASSERT_EQ(row.precision, ref.p);
        ASSERT_EQ(row.recall, ref.r);
        ASSERT_EQ(row.f_measure, ref.f);
    }
}
