#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "cgprune/callgraph.hpp"

namespace cgprune {

using NodeSet = boost::dynamic_bitset<std::uint64_t>;

// Transitive closure over the simple projection of a call graph (offsets and
// parallel edges collapsed). reachable(u, v) requires a path of length >= 1, so
// reachable(u, u) holds only for nodes on a cycle.
class ClosureView {
public:
    ClosureView() = default;
    explicit ClosureView(const CallGraph& g);

    std::size_t node_count() const noexcept { return component_of_.size(); }

    bool reachable(NodeId from, NodeId to) const { return rows_[component_of_.at(from)].test(to); }
    const NodeSet& reach_set(NodeId from) const { return rows_[component_of_.at(from)]; }

    std::size_t reach_out(NodeId u) const { return reach_out_.at(u); }
    std::size_t reach_in(NodeId v) const { return reach_in_.at(v); }

    // Number of (u, v) pairs with reachable(u, v).
    std::size_t closure_edge_count() const noexcept { return closure_edges_; }

private:
    std::vector<std::size_t> component_of_;
    std::vector<NodeSet> rows_;  // one per strongly connected component
    std::vector<std::size_t> reach_out_;
    std::vector<std::size_t> reach_in_;
    std::size_t closure_edges_ = 0;
};

inline ClosureView transitive_closure(const CallGraph& g) { return ClosureView(g); }

}  // namespace cgprune
