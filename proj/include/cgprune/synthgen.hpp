#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cgprune/callgraph.hpp"

namespace cgprune {

// Knobs of the synthetic labeled corpus. Defaults are the closed-loop setup.
struct SynthConfig {
    std::uint64_t seed = 42;
    std::size_t programs = 25;
    std::size_t min_nodes = 40;
    std::size_t max_nodes = 80;
    // Extra true call sites per node, beyond the spanning backbone from main.
    double true_density = 0.6;
    // False edges per true edge.
    double false_density = 0.8;
    // Probability that a false edge lands on an existing call site (imprecise
    // dispatch) rather than a fresh one.
    double false_site_reuse = 0.7;
    // Fraction of true call sites turned into polymorphic sites whose whole
    // fanout is true.
    double poly_rate = 0.15;
    std::size_t poly_fanout_min = 2;
    std::size_t poly_fanout_max = 4;
    std::size_t topics = 6;
    std::size_t topic_vocab = 16;   // tokens per topic
    std::size_t common_vocab = 24;  // tokens shared by every topic
    std::size_t body_tokens = 24;
    double topic_purity = 0.6;  // share of body tokens drawn from the function's topic
    double missing_source_rate = 0.05;
    // 0: callee choice ignores topics for both labels; 1: true calls stay in
    // the caller's topic and false ones cross topics.
    double signal = 0.85;

    void validate() const;  // throws ConfigError
};

struct SynthProgram {
    CallGraph graph;
    SourceMap sources;
    std::vector<std::size_t> topics;  // by node id of `graph`
    std::size_t polymorphic_sites = 0;
};

std::vector<SynthProgram> generate(const SynthConfig& cfg);
SynthProgram generate_program(const SynthConfig& cfg, std::size_t index);

// Writes <id>.cg.jsonl and <id>.src.jsonl per program plus manifest.json.
void write_corpus(const std::vector<SynthProgram>& corpus, const SynthConfig& cfg, const std::string& dir);

std::string synth_config_json(const SynthConfig& cfg);
void apply_synth_json(SynthConfig& cfg, const std::string& json_text);

// Program-level split: seeded shuffle, first round(fraction * n) go to train.
// Both halves keep the input order.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double train_fraction,
                                                                            std::uint64_t seed);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split(const std::vector<T>& corpus, double train_fraction,
                                                std::uint64_t seed) {
    auto [train_idx, test_idx] = split_indices(corpus.size(), train_fraction, seed);
    std::pair<std::vector<T>, std::vector<T>> out;
    for (auto i : train_idx) out.first.push_back(corpus[i]);
    for (auto i : test_idx) out.second.push_back(corpus[i]);
    return out;
}

}  // namespace cgprune
