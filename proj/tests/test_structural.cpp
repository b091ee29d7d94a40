#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <random>

#include "cgprune/error.hpp"
#include "cgprune/structural_features.hpp"
#include "oracles.hpp"

using namespace cgprune;

namespace {

CallGraph chain3() {
    CallGraphBuilder b("c");
    b.add_edge("main", "a", 0);
    b.add_edge("a", "b", 0);
    return std::move(b).build();
}

}  // namespace

TEST(Direct, ChainExample) {
    auto g = chain3();
    auto f = direct_features(g, EdgeKey{"a", "b", 0});
    FeatureBlock expect{1, 1, 1, 0, 1, 1, 1, 3, 2, 2.0 / 3.0, 1};
    for (std::size_t k = 0; k < kFeatureTypes; ++k) EXPECT_DOUBLE_EQ(f[k], expect[k]) << "feature " << k;
}

TEST(Direct, StarFanout) {
    CallGraphBuilder b("s");
    for (auto c : {"b", "c", "d"}) b.add_edge("a", c, 5);
    auto g = std::move(b).build();
    auto f = direct_features(g, EdgeKey{"a", "b", 5});
    EXPECT_EQ(f[static_cast<std::size_t>(FeatureType::LFanout)], 3.0);
    EXPECT_EQ(f[static_cast<std::size_t>(FeatureType::RepeatedEdges)], 1.0);
}

TEST(Direct, SelfLoop) {
    CallGraphBuilder b("l");
    b.add_edge("a", "a", 0);
    auto g = std::move(b).build();
    auto f = direct_features(g, EdgeKey{"a", "a", 0});
    for (std::size_t k : {0, 1, 2, 3, 5, 6, 7, 8}) EXPECT_EQ(f[k], 1.0) << k;
    EXPECT_EQ(f[4], -1.0);
}

TEST(Direct, MissingEdgeThrows) {
    auto g = chain3();
    EXPECT_THROW(direct_features(g, EdgeKey{"a", "main", 0}), NotFoundError);
    EXPECT_THROW(transitive_features(g, EdgeKey{"a", "b", 9}), NotFoundError);
}

TEST(Transitive, ChainExample) {
    CallGraphBuilder b("c");
    b.add_edge("a", "b", 0);
    b.add_edge("b", "c", 0);
    auto g = std::move(b).build();
    auto t = transitive_features(g, EdgeKey{"a", "b", 0});
    EXPECT_EQ(t[1], 2.0);
    EXPECT_EQ(t[5], 1.0);
    EXPECT_EQ(t[6], 2.0);
}

TEST(Transitive, LeafCallee) {
    CallGraphBuilder b("c");
    b.add_edge("a", "b", 0);
    auto g = std::move(b).build();
    auto t = transitive_features(g, EdgeKey{"a", "b", 0});
    EXPECT_EQ(t[3], 0.0);
    EXPECT_EQ(t[6], 1.0);
}

TEST(Featurize, EmptyGraph) {
    auto g = CallGraphBuilder("e").build();
    EXPECT_TRUE(featurize_graph(g).empty());
}

TEST(Featurize, ChainComposesDirectBlock) {
    auto g = chain3();
    auto rows = featurize_graph(g);
    ASSERT_EQ(rows.size(), 2u);
    auto d = direct_features(g, g.key(1));
    for (std::size_t k = 0; k < kFeatureTypes; ++k) EXPECT_EQ(rows[1][k], d[k]);
}

TEST(Featurize, MatchesBruteForceOracle) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 500; ++trial) {
        auto g = oracle::random_graph(rng, {.max_nodes = 20, .max_edges = 50});
        auto rows = featurize_graph(g);
        ASSERT_EQ(rows.size(), g.edge_count());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto ref = oracle::struct_features(g, i);
            for (std::size_t k = 0; k < kStructDim; ++k) {
                ASSERT_EQ(rows[i][k], ref[k]) << "trial " << trial << " edge " << i << " feature "
                                              << struct_feature_names()[k];
            }
        }
    }
}

TEST(Featurize, InvariantsOnRandomGraphs) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        auto g = oracle::random_graph(rng);
        auto rows = featurize_graph(g);
        for (const auto& r : rows) {
            for (std::size_t k : {7, 8, 9, 10, 18, 19, 20, 21}) EXPECT_EQ(r[k], rows.front()[k]);
            EXPECT_GE(r[6], 1.0);
            EXPECT_GE(r[5], 1.0);
            EXPECT_EQ(r[16], 1.0);
            EXPECT_GE(r[4], -1.0);
            for (double x : r) EXPECT_TRUE(std::isfinite(x));
        }
    }
}

TEST(Featurize, PermutedInputPermutesRows) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        auto g = oracle::random_graph(rng);
        std::vector<std::size_t> perm(g.edge_count());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
        CallGraphBuilder b("p");
        for (auto s : g.nodes()) b.add_node(s);
        for (auto i : perm) {
            auto k = g.key(i);
            b.add_edge(k.caller, k.callee, k.offset, g.edge(i).label);
        }
        auto h = std::move(b).build();
        auto rg = featurize_graph(g);
        auto rh = featurize_graph(h);
        for (std::size_t j = 0; j < perm.size(); ++j) EXPECT_EQ(rh[j], rg[perm[j]]);
    }
}

TEST(Featurize, AddingEdgeNeverShrinksCounts) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        auto g = oracle::random_graph(rng, {.max_nodes = 12});
        if (g.edge_count() < 2) continue;
        std::vector<bool> keep(g.edge_count(), true);
        keep.back() = false;
        auto smaller = g.filter_edges(keep);
        auto big = featurize_graph(g);
        auto small = featurize_graph(smaller);
        for (std::size_t i = 0; i + 1 < g.edge_count(); ++i) {
            EXPECT_GE(big[i][8], small[i][8]);
            EXPECT_GE(big[i][19], small[i][19]);
            for (std::size_t k : {11, 12, 13, 14}) EXPECT_GE(big[i][k], small[i][k]);
        }
    }
}

TEST(Featurize, ThreadCountDoesNotChangeOutput) {
    std::mt19937_64 rng(31);
    auto g = oracle::random_graph(rng, {.max_nodes = 30, .max_edges = 200});
    setenv("CGPRUNE_THREADS", "1", 1);
    auto one = featurize_graph(g);
    setenv("CGPRUNE_THREADS", "4", 1);
    auto four = featurize_graph(g);
    unsetenv("CGPRUNE_THREADS");
    EXPECT_EQ(one, four);
}

TEST(Standardizer, IdenticalVectorsGiveZero) {
    StructVector v{};
    v.fill(3.5);
    std::vector<StructVector> corpus(4, v);
    auto s = fit_standardizer(corpus);
    for (double x : s.apply(v)) EXPECT_EQ(x, 0.0);
}

TEST(Standardizer, TwoPointSymmetry) {
    StructVector a{};
    StructVector b{};
    b[0] = 2.0;
    std::vector<StructVector> corpus{a, b};
    auto s = fit_standardizer(corpus);
    EXPECT_DOUBLE_EQ(s.apply(a)[0], -1.0);
    EXPECT_DOUBLE_EQ(s.apply(b)[0], 1.0);
}

TEST(Standardizer, StandardizedCorpusHasZeroMean) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-50, 400);
    std::vector<StructVector> corpus(137);
    for (auto& v : corpus)
        for (auto& x : v) x = u(rng);
    auto s = fit_standardizer(corpus);
    StructVector sum{};
    for (const auto& v : corpus) {
        auto z = s.apply(v);
        for (std::size_t k = 0; k < kStructDim; ++k) sum[k] += z[k];
    }
    for (double x : sum) EXPECT_NEAR(x / 137.0, 0.0, 1e-9);
}

TEST(Standardizer, EmptyCorpusThrows) {
    std::vector<StructVector> none;
    EXPECT_THROW(fit_standardizer(none), ConfigError);
}

TEST(Standardizer, RejectsNonPositiveScale) {
    StructVector mean{};
    StructVector scale{};
    EXPECT_THROW(Standardizer(mean, scale), ConfigError);
}
