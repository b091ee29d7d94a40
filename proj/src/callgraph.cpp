#include "cgprune/callgraph.hpp"

#include <deque>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "cgprune/error.hpp"

namespace cgprune {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kGraphSuffix = ".cg.jsonl";
constexpr std::string_view kSourceSuffix = ".src.jsonl";

Label label_from_json(const nlohmann::json& v) {
    if (v.is_null()) return Label::Unknown;
    if (v.is_number_integer()) {
        auto x = v.get<std::int64_t>();
        if (x == 0) return Label::FalsePositive;
        if (x == 1) return Label::TruePositive;
    }
    throw std::invalid_argument("label must be 0, 1 or null");
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

std::string_view simple_name(std::string_view sig) {
    auto paren = sig.find('(');
    if (paren != std::string_view::npos) sig = sig.substr(0, paren);
    auto sep = sig.find_last_of(".:/ ");
    if (sep != std::string_view::npos) sig = sig.substr(sep + 1);
    return sig;
}

std::size_t CallGraph::TripleHash::operator()(
    const std::tuple<NodeId, NodeId, std::uint64_t>& t) const noexcept {
    std::uint64_t h = std::get<0>(t);
    h = h * 0x9E3779B97F4A7C15ULL ^ std::get<1>(t);
    h = h * 0x9E3779B97F4A7C15ULL ^ std::get<2>(t);
    h ^= h >> 31;
    return static_cast<std::size_t>(h);
}

std::optional<NodeId> CallGraph::find_node(std::string_view sig) const {
    auto it = index_.find(std::string(sig));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

NodeId CallGraph::node_id(std::string_view sig) const {
    auto id = find_node(sig);
    if (!id) throw NotFoundError("node not in graph '" + program_id_ + "': " + std::string(sig));
    return *id;
}

EdgeKey CallGraph::key(std::size_t ordinal) const {
    const Edge& e = edges_.at(ordinal);
    return EdgeKey{sigs_[e.caller], sigs_[e.callee], e.offset};
}

std::optional<std::size_t> CallGraph::find_edge(NodeId caller, NodeId callee, std::uint64_t offset) const {
    auto it = triples_.find({caller, callee, offset});
    if (it == triples_.end()) return std::nullopt;
    return it->second;
}

std::size_t CallGraph::edge_ordinal(const EdgeKey& key) const {
    auto caller = find_node(key.caller);
    auto callee = find_node(key.callee);
    std::optional<std::size_t> ordinal;
    if (caller && callee) ordinal = find_edge(*caller, *callee, key.offset);
    if (!ordinal) {
        throw NotFoundError("edge not in graph '" + program_id_ + "': " + key.caller + " -> " +
                            key.callee + " @" + std::to_string(key.offset));
    }
    return *ordinal;
}

CallGraph CallGraph::filter_edges(const std::vector<bool>& keep) const {
    if (keep.size() != edges_.size()) {
        throw LengthError("keep mask has " + std::to_string(keep.size()) + " entries for " +
                          std::to_string(edges_.size()) + " edges");
    }
    CallGraphBuilder b(program_id_);
    for (const auto& s : sigs_) b.add_node(s);
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        if (!keep[i]) continue;
        const Edge& e = edges_[i];
        b.add_edge(sigs_[e.caller], sigs_[e.callee], e.offset, e.label);
    }
    return std::move(b).build(EntryOptions{entry_pattern_});
}

void CallGraph::finalize(const EntryOptions& options) {
    entry_pattern_ = options.pattern;
    out_edges_.assign(sigs_.size(), {});
    in_edges_.assign(sigs_.size(), {});
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        out_edges_[edges_[i].caller].push_back(i);
        in_edges_[edges_[i].callee].push_back(i);
    }

    const std::regex re(options.pattern);
    entry_.reset();
    std::size_t matches = 0;
    for (NodeId id = 0; id < sigs_.size(); ++id) {
        auto name = simple_name(sigs_[id]);
        if (std::regex_match(name.begin(), name.end(), re)) {
            ++matches;
            entry_ = id;
        }
    }
    if (matches != 1) entry_.reset();

    depth_.assign(sigs_.size(), -1);
    if (!entry_) return;
    std::deque<NodeId> queue{*entry_};
    depth_[*entry_] = 0;
    while (!queue.empty()) {
        NodeId u = queue.front();
        queue.pop_front();
        for (std::size_t ei : out_edges_[u]) {
            NodeId v = edges_[ei].callee;
            if (depth_[v] < 0) {
                depth_[v] = depth_[u] + 1;
                queue.push_back(v);
            }
        }
    }
}

CallGraphBuilder::CallGraphBuilder(std::string program_id) { g_.program_id_ = std::move(program_id); }

NodeId CallGraphBuilder::add_node(std::string_view sig) {
    if (sig.empty()) throw ConfigError("function signature must be non-empty");
    auto [it, inserted] = g_.index_.try_emplace(std::string(sig), static_cast<NodeId>(g_.sigs_.size()));
    if (inserted) g_.sigs_.emplace_back(sig);
    return it->second;
}

std::size_t CallGraphBuilder::add_edge(std::string_view caller, std::string_view callee,
                                       std::uint64_t offset, Label label) {
    NodeId u = add_node(caller);
    NodeId v = add_node(callee);
    auto [it, inserted] = g_.triples_.try_emplace({u, v, offset}, g_.edges_.size());
    if (!inserted) {
        throw DuplicateEdgeError("duplicate edge " + std::string(caller) + " -> " + std::string(callee) +
                                 " @" + std::to_string(offset));
    }
    g_.edges_.push_back(Edge{u, v, offset, label});
    return it->second;
}

CallGraph CallGraphBuilder::build(const EntryOptions& options) && {
    g_.finalize(options);
    return std::move(g_);
}

int shortest_depth(const CallGraph& g, std::string_view node) { return g.depth(g.node_id(node)); }

std::string program_id_from_path(const std::string& path) {
    std::string name = std::filesystem::path(path).filename().string();
    for (auto suffix : {kGraphSuffix, kSourceSuffix}) {
        if (name.size() > suffix.size() && name.ends_with(suffix)) return name.substr(0, name.size() - suffix.size());
    }
    return std::filesystem::path(name).stem().string();
}

CallGraph parse_callgraph(std::istream& in, std::string program_id, const std::string& source_name,
                          const EntryOptions& options) {
    CallGraphBuilder b(std::move(program_id));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) continue;
        std::string caller, callee;
        std::uint64_t offset = 0;
        Label label = Label::Unknown;
        try {
            auto j = nlohmann::json::parse(line);
            caller = j.at("caller").get<std::string>();
            callee = j.at("callee").get<std::string>();
            const auto& off = j.at("offset");
            if (!off.is_number_unsigned()) {
                throw std::invalid_argument("offset must be a non-negative integer");
            }
            offset = off.get<std::uint64_t>();
            label = j.contains("label") ? label_from_json(j["label"]) : Label::Unknown;
            if (caller.empty() || callee.empty()) throw std::invalid_argument("empty signature");
        } catch (const std::exception& ex) {
            throw ParseError(source_name, lineno, ex.what());
        }
        try {
            b.add_edge(caller, callee, offset, label);
        } catch (const DuplicateEdgeError& ex) {
            throw DuplicateEdgeError(source_name + ":" + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return std::move(b).build(options);
}

CallGraph load_callgraph(const std::string& path, const EntryOptions& options) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open call graph: " + path);
    return parse_callgraph(in, program_id_from_path(path), path, options);
}

void write_callgraph(const CallGraph& g, std::ostream& out) {
    for (const Edge& e : g.edges()) {
        ordered_json j;
        j["caller"] = g.sig(e.caller);
        j["callee"] = g.sig(e.callee);
        j["offset"] = e.offset;
        if (e.label == Label::Unknown) {
            j["label"] = nullptr;
        } else {
            j["label"] = static_cast<int>(e.label);
        }
        out << j.dump() << '\n';
    }
}

void save_callgraph(const CallGraph& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write call graph: " + path);
    write_callgraph(g, out);
}

EdgeKeySet truth_edges(const CallGraph& g) {
    EdgeKeySet keys;
    for (std::size_t i = 0; i < g.edge_count(); ++i) {
        if (g.edge(i).label == Label::TruePositive) keys.insert(g.key(i));
    }
    return keys;
}

CallGraph truth_graph(const CallGraph& g) {
    std::vector<bool> keep(g.edge_count());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = g.edge(i).label == Label::TruePositive;
    return g.filter_edges(keep);
}

EdgeKeySet edge_keys(const CallGraph& g) {
    EdgeKeySet keys;
    for (std::size_t i = 0; i < g.edge_count(); ++i) keys.insert(g.key(i));
    return keys;
}

void SourceMap::insert(std::string sig, std::string code) { code_.insert_or_assign(std::move(sig), std::move(code)); }

std::optional<std::string_view> SourceMap::lookup(std::string_view sig) const {
    auto it = code_.find(std::string(sig));
    if (it == code_.end()) return std::nullopt;
    return std::string_view(it->second);
}

SourceMap load_sources(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open source map: " + path);
    SourceMap map;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) continue;
        try {
            auto j = nlohmann::json::parse(line);
            map.insert(j.at("sig").get<std::string>(), j.at("code").get<std::string>());
        } catch (const std::exception& ex) {
            throw ParseError(path, lineno, ex.what());
        }
    }
    return map;
}

void save_sources(const SourceMap& sources, std::span<const std::string> order, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write source map: " + path);
    for (const auto& sig : order) {
        auto code = sources.lookup(sig);
        if (!code) continue;
        ordered_json j;
        j["sig"] = sig;
        j["code"] = std::string(*code);
        out << j.dump() << '\n';
    }
}

}  // namespace cgprune
