#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "cgprune/callgraph.hpp"
#include "cgprune/reachability.hpp"

namespace cgprune {

inline constexpr std::size_t kFeatureTypes = 11;
inline constexpr std::size_t kStructDim = 2 * kFeatureTypes;

// Index of each feature type inside the direct (and, shifted by 11, transitive) block.
enum class FeatureType : std::size_t {
    SrcInDeg = 0,
    SrcOutDeg,
    DestInDeg,
    DestOutDeg,
    Depth,
    RepeatedEdges,
    LFanout,
    NodeCount,
    EdgeCount,
    AvgDegree,
    AvgLFanout,
};

using FeatureBlock = std::array<double, kFeatureTypes>;
// [direct f1..f11, transitive t1..t11], raw counts before standardization.
using StructVector = std::array<double, kStructDim>;

const std::array<const char*, kStructDim>& struct_feature_names();

// Precomputed degree, call-site and closure tables for one graph. Build once and
// query per edge; the free functions below rebuild it on every call.
class StructuralContext {
public:
    explicit StructuralContext(const CallGraph& g);

    FeatureBlock direct(std::size_t ordinal) const;
    FeatureBlock transitive(std::size_t ordinal) const;
    StructVector features(std::size_t ordinal) const;

    const ClosureView& closure() const noexcept { return closure_; }

private:
    struct SiteStats {
        std::size_t fanout = 0;
        std::size_t reach_union = 0;
    };

    const SiteStats& site(NodeId caller, std::uint64_t offset) const;

    const CallGraph& g_;
    ClosureView closure_;
    std::vector<std::size_t> in_deg_;
    std::vector<std::size_t> out_deg_;
    std::vector<std::size_t> pair_count_;  // by edge ordinal: #edges with same (caller, callee)
    std::vector<std::size_t> site_index_;  // by edge ordinal
    std::vector<SiteStats> sites_;
    double avg_degree_ = 0.0;
    double avg_fanout_ = 0.0;
    double avg_reach_out_ = 0.0;
    double avg_site_reach_ = 0.0;
};

FeatureBlock direct_features(const CallGraph& g, const EdgeKey& e);
FeatureBlock transitive_features(const CallGraph& g, const EdgeKey& e);

// One row per edge ordinal. Rows are computed in parallel (CGPRUNE_THREADS).
std::vector<StructVector> featurize_graph(const CallGraph& g);

// Per-dimension z-score fitted on a training corpus. Zero-variance dimensions
// divide by 1.
class Standardizer {
public:
    Standardizer();
    Standardizer(StructVector mean, StructVector scale);

    StructVector apply(const StructVector& v) const;
    const StructVector& mean() const noexcept { return mean_; }
    const StructVector& scale() const noexcept { return scale_; }

private:
    StructVector mean_;
    StructVector scale_;
};

Standardizer fit_standardizer(std::span<const StructVector> corpus);

}  // namespace cgprune
