#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cgprune/callgraph.hpp"

namespace cgprune {

// Per-edge verdict used by Algorithm-1 pruning. Must return TruePositive or
// FalsePositive; Unknown is treated as a classifier failure.
using EdgeClassifier = std::function<Label(std::size_t ordinal, const Edge& edge)>;

// Keeps every node; drops edges the classifier calls FalsePositive.
CallGraph prune(const CallGraph& g, const EdgeClassifier& classifier);

// Keeps edge i iff probs[i] >= tau.
CallGraph prune_threshold(const CallGraph& g, std::span<const double> probs, double tau);
std::vector<bool> threshold_mask(std::span<const double> probs, double tau);

// Removes round(percent/100 * |E|) edges chosen uniformly with the given seed.
CallGraph random_prune(const CallGraph& g, double percent, std::uint64_t seed);

struct MetricsRow {
    std::string program_id;
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
    std::size_t predicted = 0;  // |S|
    std::size_t truth = 0;      // |G|
    std::size_t overlap = 0;    // |S ∩ G|
};

// P = |S∩G|/|S|, R = |S∩G|/|G| (0 for empty denominators), F their harmonic mean (0 when P+R = 0).
MetricsRow metrics_from_counts(std::string program_id, std::size_t predicted, std::size_t truth, std::size_t overlap);

template <typename Key>
MetricsRow score_sets(std::string program_id, const std::set<Key>& predicted, const std::set<Key>& truth) {
    std::size_t overlap = 0;
    for (const auto& k : predicted) overlap += truth.count(k);
    return metrics_from_counts(std::move(program_id), predicted.size(), truth.size(), overlap);
}

MetricsRow score(const CallGraph& pred, const EdgeKeySet& truth);

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};

struct PruneReport {
    std::vector<MetricsRow> per_program;
    MetricSummary precision;
    MetricSummary recall;
    MetricSummary f_measure;
};

// Unweighted mean and population std over programs.
PruneReport aggregate(std::vector<MetricsRow> rows);

void write_report(const PruneReport& report, std::ostream& out);
void save_report(const PruneReport& report, const std::string& path);

// One training program for threshold calibration: its labeled graph and the
// classifier's prob_TP per edge ordinal.
struct CalibrationProgram {
    const CallGraph* graph = nullptr;
    std::vector<double> probs;
};

struct CalibrationResult {
    double tau = 0.0;
    double mean_precision = 0.0;
    double mean_recall = 0.0;
};

// Grid {0.00, 0.01, ..., 1.00}.
std::vector<double> calibration_grid();

// Grid threshold minimizing |mean P - mean R| over the programs; ties pick the smallest tau.
CalibrationResult calibrate_balanced(std::span<const CalibrationProgram> programs);

using CallSite = std::pair<std::string, std::uint64_t>;  // (caller signature, offset)
using CallSiteSet = std::set<CallSite>;

// Call sites with exactly one distinct callee.
CallSiteSet monomorphic_sites(const CallGraph& g);

// P/R/F of monomorphic_sites(pred) against monomorphic_sites(truth).
MetricsRow monomorph_score(const CallGraph& pred, const CallGraph& truth);

}  // namespace cgprune
