#include "cgprune/reachability.hpp"

#include <algorithm>
#include <limits>

namespace cgprune {

namespace {

constexpr std::size_t kUnvisited = std::numeric_limits<std::size_t>::max();

// Iterative Tarjan. Components come out in reverse topological order of the
// condensation: every successor component of C has an index lower than C.
struct Condensation {
    std::vector<std::size_t> component_of;
    std::vector<std::vector<NodeId>> members;
};

Condensation strongly_connected(const std::vector<std::vector<NodeId>>& succ) {
    const std::size_t n = succ.size();
    Condensation out;
    out.component_of.assign(n, kUnvisited);

    std::vector<std::size_t> index(n, kUnvisited), low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<NodeId> stack;
    std::vector<std::pair<NodeId, std::size_t>> frames;  // node, next successor position
    std::size_t counter = 0;

    for (NodeId root = 0; root < n; ++root) {
        if (index[root] != kUnvisited) continue;
        frames.emplace_back(root, 0);
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;

        while (!frames.empty()) {
            auto& [u, pos] = frames.back();
            if (pos < succ[u].size()) {
                NodeId v = succ[u][pos++];
                if (index[v] == kUnvisited) {
                    index[v] = low[v] = counter++;
                    stack.push_back(v);
                    on_stack[v] = true;
                    frames.emplace_back(v, 0);
                } else if (on_stack[v]) {
                    low[u] = std::min(low[u], index[v]);
                }
                continue;
            }
            NodeId done = u;
            frames.pop_back();
            if (!frames.empty()) {
                NodeId parent = frames.back().first;
                low[parent] = std::min(low[parent], low[done]);
            }
            if (low[done] == index[done]) {
                std::vector<NodeId> comp;
                NodeId w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    out.component_of[w] = out.members.size();
                    comp.push_back(w);
                } while (w != done);
                out.members.push_back(std::move(comp));
            }
        }
    }
    return out;
}

}  // namespace

ClosureView::ClosureView(const CallGraph& g) {
    const std::size_t n = g.node_count();
    std::vector<std::vector<NodeId>> succ(n);
    for (const Edge& e : g.edges()) succ[e.caller].push_back(e.callee);
    for (auto& s : succ) {
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
    }

    Condensation cond = strongly_connected(succ);
    component_of_ = std::move(cond.component_of);
    rows_.assign(cond.members.size(), NodeSet(n));

    for (std::size_t c = 0; c < cond.members.size(); ++c) {
        NodeSet& row = rows_[c];
        bool cyclic = cond.members[c].size() > 1;
        for (NodeId u : cond.members[c]) {
            for (NodeId v : succ[u]) {
                std::size_t d = component_of_[v];
                if (d == c) {
                    cyclic = true;  // self-loop or intra-component edge
                    continue;
                }
                row.set(v);
                row |= rows_[d];
            }
        }
        if (cyclic) {
            for (NodeId u : cond.members[c]) row.set(u);
        }
    }

    reach_out_.assign(n, 0);
    reach_in_.assign(n, 0);
    for (std::size_t c = 0; c < rows_.size(); ++c) {
        const std::size_t width = cond.members[c].size();
        const std::size_t count = rows_[c].count();
        for (NodeId u : cond.members[c]) reach_out_[u] = count;
        closure_edges_ += width * count;
        for (auto v = rows_[c].find_first(); v != NodeSet::npos; v = rows_[c].find_next(v)) {
            reach_in_[v] += width;
        }
    }
}

}  // namespace cgprune
