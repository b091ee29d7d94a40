#include "cgprune/structural_features.hpp"

#include <cmath>
#include <map>
#include <utility>

#include "cgprune/error.hpp"
#include "cgprune/parallel.hpp"

namespace cgprune {

namespace {

double mean_or_zero(double total, std::size_t count) {
    return count == 0 ? 0.0 : total / static_cast<double>(count);
}

std::size_t at(FeatureType t) { return static_cast<std::size_t>(t); }

}  // namespace

const std::array<const char*, kStructDim>& struct_feature_names() {
    static const std::array<const char*, kStructDim> names = {
        "src-node-in-deg",    "src-node-out-deg",    "dest-node-in-deg",    "dest-node-out-deg",
        "depth",              "repeated-edges",      "L-fanout",            "node-count",
        "edge-count",         "avg-degree",          "avg-L-fanout",        "trans-src-node-in-deg",
        "trans-src-node-out-deg", "trans-dest-node-in-deg", "trans-dest-node-out-deg", "trans-depth",
        "trans-repeated-edges", "trans-L-fanout",    "trans-node-count",    "trans-edge-count",
        "trans-avg-degree",   "trans-avg-L-fanout",
    };
    return names;
}

StructuralContext::StructuralContext(const CallGraph& g) : g_(g), closure_(g) {
    const std::size_t n = g.node_count();
    const std::size_t m = g.edge_count();

    in_deg_.assign(n, 0);
    out_deg_.assign(n, 0);
    for (const Edge& e : g.edges()) {
        ++out_deg_[e.caller];
        ++in_deg_[e.callee];
    }

    std::map<std::pair<NodeId, NodeId>, std::size_t> pairs;
    std::map<std::pair<NodeId, std::uint64_t>, std::size_t> site_ids;
    site_index_.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const Edge& e = g.edge(i);
        ++pairs[{e.caller, e.callee}];
        auto [it, inserted] = site_ids.try_emplace({e.caller, e.offset}, sites_.size());
        if (inserted) sites_.emplace_back();
        site_index_[i] = it->second;
        ++sites_[it->second].fanout;
    }
    pair_count_.resize(m);
    for (std::size_t i = 0; i < m; ++i) pair_count_[i] = pairs[{g.edge(i).caller, g.edge(i).callee}];

    // Union of each call site's targets and everything they reach.
    std::vector<NodeSet> site_sets(sites_.size(), NodeSet(n));
    for (std::size_t i = 0; i < m; ++i) {
        NodeSet& s = site_sets[site_index_[i]];
        s.set(g.edge(i).callee);
        s |= closure_.reach_set(g.edge(i).callee);
    }
    double fanout_total = 0.0;
    double site_reach_total = 0.0;
    for (std::size_t s = 0; s < sites_.size(); ++s) {
        sites_[s].reach_union = site_sets[s].count();
        fanout_total += static_cast<double>(sites_[s].fanout);
        site_reach_total += static_cast<double>(sites_[s].reach_union);
    }

    double reach_total = 0.0;
    for (NodeId u = 0; u < n; ++u) reach_total += static_cast<double>(closure_.reach_out(u));

    avg_degree_ = mean_or_zero(static_cast<double>(m), n);
    avg_fanout_ = mean_or_zero(fanout_total, sites_.size());
    avg_reach_out_ = mean_or_zero(reach_total, n);
    avg_site_reach_ = mean_or_zero(site_reach_total, sites_.size());
}

FeatureBlock StructuralContext::direct(std::size_t ordinal) const {
    const Edge& e = g_.edge(ordinal);
    FeatureBlock f{};
    f[at(FeatureType::SrcInDeg)] = static_cast<double>(in_deg_[e.caller]);
    f[at(FeatureType::SrcOutDeg)] = static_cast<double>(out_deg_[e.caller]);
    f[at(FeatureType::DestInDeg)] = static_cast<double>(in_deg_[e.callee]);
    f[at(FeatureType::DestOutDeg)] = static_cast<double>(out_deg_[e.callee]);
    f[at(FeatureType::Depth)] = static_cast<double>(g_.depth(e.caller));
    f[at(FeatureType::RepeatedEdges)] = static_cast<double>(pair_count_[ordinal]);
    f[at(FeatureType::LFanout)] = static_cast<double>(sites_[site_index_[ordinal]].fanout);
    f[at(FeatureType::NodeCount)] = static_cast<double>(g_.node_count());
    f[at(FeatureType::EdgeCount)] = static_cast<double>(g_.edge_count());
    f[at(FeatureType::AvgDegree)] = avg_degree_;
    f[at(FeatureType::AvgLFanout)] = avg_fanout_;
    return f;
}

FeatureBlock StructuralContext::transitive(std::size_t ordinal) const {
    const Edge& e = g_.edge(ordinal);
    FeatureBlock t{};
    t[at(FeatureType::SrcInDeg)] = static_cast<double>(closure_.reach_in(e.caller));
    t[at(FeatureType::SrcOutDeg)] = static_cast<double>(closure_.reach_out(e.caller));
    t[at(FeatureType::DestInDeg)] = static_cast<double>(closure_.reach_in(e.callee));
    t[at(FeatureType::DestOutDeg)] = static_cast<double>(closure_.reach_out(e.callee));
    t[at(FeatureType::Depth)] = static_cast<double>(g_.depth(e.caller));
    // Always 1 for an existing edge: the edge itself is a path.
    t[at(FeatureType::RepeatedEdges)] = closure_.reachable(e.caller, e.callee) ? 1.0 : 0.0;
    t[at(FeatureType::LFanout)] = static_cast<double>(sites_[site_index_[ordinal]].reach_union);
    t[at(FeatureType::NodeCount)] = static_cast<double>(g_.node_count());
    t[at(FeatureType::EdgeCount)] = static_cast<double>(closure_.closure_edge_count());
    t[at(FeatureType::AvgDegree)] = avg_reach_out_;
    t[at(FeatureType::AvgLFanout)] = avg_site_reach_;
    return t;
}

StructVector StructuralContext::features(std::size_t ordinal) const {
    StructVector v{};
    auto d = direct(ordinal);
    auto t = transitive(ordinal);
    std::copy(d.begin(), d.end(), v.begin());
    std::copy(t.begin(), t.end(), v.begin() + kFeatureTypes);
    return v;
}

FeatureBlock direct_features(const CallGraph& g, const EdgeKey& e) {
    std::size_t ordinal = g.edge_ordinal(e);
    return StructuralContext(g).direct(ordinal);
}

FeatureBlock transitive_features(const CallGraph& g, const EdgeKey& e) {
    std::size_t ordinal = g.edge_ordinal(e);
    return StructuralContext(g).transitive(ordinal);
}

std::vector<StructVector> featurize_graph(const CallGraph& g) {
    std::vector<StructVector> rows(g.edge_count());
    if (rows.empty()) return rows;
    StructuralContext ctx(g);
    parallel_for(rows.size(), [&](std::size_t i) { rows[i] = ctx.features(i); });
    return rows;
}

Standardizer::Standardizer() {
    mean_.fill(0.0);
    scale_.fill(1.0);
}

Standardizer::Standardizer(StructVector mean, StructVector scale) : mean_(mean), scale_(scale) {
    for (double s : scale_) {
        if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("standardizer scale must be positive and finite");
    }
}

StructVector Standardizer::apply(const StructVector& v) const {
    StructVector out{};
    for (std::size_t k = 0; k < kStructDim; ++k) out[k] = (v[k] - mean_[k]) / scale_[k];
    return out;
}

Standardizer fit_standardizer(std::span<const StructVector> corpus) {
    if (corpus.empty()) throw ConfigError("cannot fit a standardizer on an empty corpus");
    const double n = static_cast<double>(corpus.size());
    StructVector mean{}, scale{};
    for (std::size_t k = 0; k < kStructDim; ++k) {
        double total = 0.0;
        for (const auto& v : corpus) total += v[k];
        mean[k] = total / n;
        double sq = 0.0;
        for (const auto& v : corpus) sq += (v[k] - mean[k]) * (v[k] - mean[k]);
        double sd = std::sqrt(sq / n);
        scale[k] = sd > 0.0 ? sd : 1.0;
    }
    return Standardizer(mean, scale);
}

}  // namespace cgprune
