#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace cgprune {

using NodeId = std::uint32_t;

// Ground-truth label of a static edge. Numeric values match the jsonl `label` field.
enum class Label : std::uint8_t { FalsePositive = 0, TruePositive = 1, Unknown = 2 };

struct Edge {
    NodeId caller = 0;
    NodeId callee = 0;
    std::uint64_t offset = 0;
    Label label = Label::Unknown;
};

// Graph-independent edge identity, used to compare edges across graphs of the
// same program (predicted vs. ground truth).
struct EdgeKey {
    std::string caller;
    std::string callee;
    std::uint64_t offset = 0;

    auto operator<=>(const EdgeKey&) const = default;
};

using EdgeKeySet = std::set<EdgeKey>;

// How the entry node is chosen: the unique node whose simple name fully matches
// `pattern` (ECMAScript regex). Zero or several matches leave the entry absent.
struct EntryOptions {
    std::string pattern = "main";
};

// "pkg.Cls.method(int)" -> "method"; "main" -> "main".
std::string_view simple_name(std::string_view sig);

class CallGraphBuilder;

// Directed multigraph of functions. Immutable once built; edge order is the
// ingestion order and doubles as the ordinal used by feature/embedding rows.
class CallGraph {
public:
    CallGraph() = default;

    const std::string& program_id() const noexcept { return program_id_; }
    std::size_t node_count() const noexcept { return sigs_.size(); }
    std::size_t edge_count() const noexcept { return edges_.size(); }

    std::span<const std::string> nodes() const noexcept { return sigs_; }
    const std::string& sig(NodeId id) const { return sigs_.at(id); }
    std::optional<NodeId> find_node(std::string_view sig) const;
    NodeId node_id(std::string_view sig) const;  // throws NotFoundError

    std::span<const Edge> edges() const noexcept { return edges_; }
    const Edge& edge(std::size_t ordinal) const { return edges_.at(ordinal); }
    EdgeKey key(std::size_t ordinal) const;
    std::optional<std::size_t> find_edge(NodeId caller, NodeId callee, std::uint64_t offset) const;
    std::size_t edge_ordinal(const EdgeKey& key) const;  // throws NotFoundError

    std::span<const std::size_t> out_edges(NodeId id) const { return out_edges_.at(id); }
    std::span<const std::size_t> in_edges(NodeId id) const { return in_edges_.at(id); }

    std::optional<NodeId> entry() const noexcept { return entry_; }

    // BFS depth from the entry; -1 when the entry is absent or the node is unreachable.
    int depth(NodeId id) const { return depth_.at(id); }

    // Same node set, only edges with keep[i] set, survivors in original order.
    CallGraph filter_edges(const std::vector<bool>& keep) const;

private:
    friend class CallGraphBuilder;

    struct TripleHash {
        std::size_t operator()(const std::tuple<NodeId, NodeId, std::uint64_t>& t) const noexcept;
    };

    void finalize(const EntryOptions& options);

    std::string program_id_;
    std::vector<std::string> sigs_;
    std::unordered_map<std::string, NodeId> index_;
    std::vector<Edge> edges_;
    std::unordered_map<std::tuple<NodeId, NodeId, std::uint64_t>, std::size_t, TripleHash> triples_;
    std::vector<std::vector<std::size_t>> out_edges_;
    std::vector<std::vector<std::size_t>> in_edges_;
    std::optional<NodeId> entry_;
    std::vector<int> depth_;
    std::string entry_pattern_ = "main";
};

class CallGraphBuilder {
public:
    explicit CallGraphBuilder(std::string program_id);

    NodeId add_node(std::string_view sig);
    // Throws DuplicateEdgeError when the (caller, callee, offset) triple exists.
    std::size_t add_edge(std::string_view caller, std::string_view callee, std::uint64_t offset,
                         Label label = Label::Unknown);

    CallGraph build(const EntryOptions& options = {}) &&;

private:
    CallGraph g_;
};

// Shortest entry->node distance in edges; -1 sentinel when unreachable or no entry.
int shortest_depth(const CallGraph& g, std::string_view node);

// Line-delimited JSON edges file. Program id is the file name minus `.cg.jsonl`.
CallGraph load_callgraph(const std::string& path, const EntryOptions& options = {});
CallGraph parse_callgraph(std::istream& in, std::string program_id, const std::string& source_name,
                          const EntryOptions& options = {});
void write_callgraph(const CallGraph& g, std::ostream& out);
void save_callgraph(const CallGraph& g, const std::string& path);

std::string program_id_from_path(const std::string& path);

// Edges labeled TruePositive.
EdgeKeySet truth_edges(const CallGraph& g);
// Same nodes, TruePositive edges only.
CallGraph truth_graph(const CallGraph& g);
EdgeKeySet edge_keys(const CallGraph& g);

// Function signature -> source text. Library functions usually have no entry.
class SourceMap {
public:
    void insert(std::string sig, std::string code);
    // std::nullopt means "no source"; an empty optional is never conflated with "".
    std::optional<std::string_view> lookup(std::string_view sig) const;
    std::size_t size() const noexcept { return code_.size(); }

private:
    std::unordered_map<std::string, std::string> code_;
};

SourceMap load_sources(const std::string& path);
void save_sources(const SourceMap& sources, std::span<const std::string> order, const std::string& path);

}  // namespace cgprune
