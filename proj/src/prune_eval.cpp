#include "cgprune/prune_eval.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "cgprune/error.hpp"
#include "cgprune/nn/rng.hpp"

namespace cgprune {

CallGraph prune(const CallGraph& g, const EdgeClassifier& classifier) {
    std::vector<bool> keep(g.edge_count());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        Label verdict;
        try {
            verdict = classifier(i, g.edge(i));
        } catch (const std::exception& ex) {
            throw Error("classifier failed on edge ordinal " + std::to_string(i) + ": " + ex.what());
        }
        if (verdict == Label::Unknown) {
            throw Error("classifier returned no verdict for edge ordinal " + std::to_string(i));
        }
        keep[i] = verdict == Label::TruePositive;
    }
    return g.filter_edges(keep);
}

std::vector<bool> threshold_mask(std::span<const double> probs, double tau) {
    std::vector<bool> keep(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) keep[i] = probs[i] >= tau;
    return keep;
}

CallGraph prune_threshold(const CallGraph& g, std::span<const double> probs, double tau) {
    if (probs.size() != g.edge_count()) {
        throw LengthError("got " + std::to_string(probs.size()) + " probabilities for " +
                          std::to_string(g.edge_count()) + " edges");
    }
    return g.filter_edges(threshold_mask(probs, tau));
}

CallGraph random_prune(const CallGraph& g, double percent, std::uint64_t seed) {
    if (!(percent >= 0.0 && percent <= 100.0)) throw ConfigError("prune percentage must be in [0, 100]");
    const std::size_t m = g.edge_count();
    const auto remove = static_cast<std::size_t>(std::llround(percent / 100.0 * static_cast<double>(m)));
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    nn::Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<bool> keep(m, true);
    for (std::size_t k = 0; k < std::min(remove, m); ++k) keep[order[k]] = false;
    return g.filter_edges(keep);
}

MetricsRow metrics_from_counts(std::string program_id, std::size_t predicted, std::size_t truth, std::size_t overlap) {
    MetricsRow row;
    row.program_id = std::move(program_id);
    row.predicted = predicted;
    row.truth = truth;
    row.overlap = overlap;
    row.precision = predicted == 0 ? 0.0 : static_cast<double>(overlap) / static_cast<double>(predicted);
    row.recall = truth == 0 ? 0.0 : static_cast<double>(overlap) / static_cast<double>(truth);
    const double sum = row.precision + row.recall;
    row.f_measure = sum > 0.0 ? 2.0 * row.precision * row.recall / sum : 0.0;
    return row;
}

MetricsRow score(const CallGraph& pred, const EdgeKeySet& truth) {
    return score_sets(pred.program_id(), edge_keys(pred), truth);
}

PruneReport aggregate(std::vector<MetricsRow> rows) {
    if (rows.empty()) throw ConfigError("cannot aggregate zero programs");
    PruneReport report;
    const double n = static_cast<double>(rows.size());
    auto summarize = [&](double MetricsRow::*field) {
        double total = 0.0;
        for (const auto& r : rows) total += r.*field;
        MetricSummary s;
        s.mean = total / n;
        double sq = 0.0;
        for (const auto& r : rows) sq += (r.*field - s.mean) * (r.*field - s.mean);
        s.std = std::sqrt(sq / n);
        return s;
    };
    report.precision = summarize(&MetricsRow::precision);
    report.recall = summarize(&MetricsRow::recall);
    report.f_measure = summarize(&MetricsRow::f_measure);
    report.per_program = std::move(rows);
    return report;
}

void write_report(const PruneReport& report, std::ostream& out) {
    nlohmann::ordered_json j;
    j["per_program"] = nlohmann::ordered_json::array();
    for (const auto& r : report.per_program) {
        j["per_program"].push_back({{"program_id", r.program_id},
                                    {"precision", r.precision},
                                    {"recall", r.recall},
                                    {"f_measure", r.f_measure},
                                    {"predicted", r.predicted},
                                    {"truth", r.truth},
                                    {"overlap", r.overlap}});
    }
    auto summary = [](const MetricSummary& s) { return nlohmann::ordered_json{{"mean", s.mean}, {"std", s.std}}; };
    j["aggregate"] = {{"precision", summary(report.precision)},
                      {"recall", summary(report.recall)},
                      {"f_measure", summary(report.f_measure)}};
    out << j.dump(2) << '\n';
}

void save_report(const PruneReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write report: " + path);
    write_report(report, out);
}

std::vector<double> calibration_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 100; ++i) grid.push_back(static_cast<double>(i) / 100.0);
    return grid;
}

CalibrationResult calibrate_balanced(std::span<const CalibrationProgram> programs) {
    if (programs.empty()) throw ConfigError("calibration needs at least one labeled program");
    std::vector<EdgeKeySet> truths;
    for (const auto& p : programs) {
        if (!p.graph) throw ConfigError("calibration program without a graph");
        if (p.probs.size() != p.graph->edge_count()) {
            throw LengthError("program '" + p.graph->program_id() + "': " + std::to_string(p.probs.size()) +
                              " probabilities for " + std::to_string(p.graph->edge_count()) + " edges");
        }
        truths.push_back(truth_edges(*p.graph));
    }

    CalibrationResult best;
    double best_gap = 0.0;
    bool first = true;
    const double n = static_cast<double>(programs.size());
    for (double tau : calibration_grid()) {
        double p_total = 0.0;
        double r_total = 0.0;
        for (std::size_t k = 0; k < programs.size(); ++k) {
            const CallGraph& g = *programs[k].graph;
            std::size_t kept = 0;
            std::size_t overlap = 0;
            for (std::size_t i = 0; i < g.edge_count(); ++i) {
                if (programs[k].probs[i] < tau) continue;
                ++kept;
                if (g.edge(i).label == Label::TruePositive) ++overlap;
            }
            MetricsRow row = metrics_from_counts(g.program_id(), kept, truths[k].size(), overlap);
            p_total += row.precision;
            r_total += row.recall;
        }
        const double mp = p_total / n;
        const double mr = r_total / n;
        const double gap = std::abs(mp - mr);
        if (first || gap < best_gap) {
            first = false;
            best_gap = gap;
            best = CalibrationResult{tau, mp, mr};
        }
    }
    return best;
}

CallSiteSet monomorphic_sites(const CallGraph& g) {
    std::map<std::pair<NodeId, std::uint64_t>, std::set<NodeId>> callees;
    for (const Edge& e : g.edges()) callees[{e.caller, e.offset}].insert(e.callee);
    CallSiteSet sites;
    for (const auto& [site, targets] : callees) {
        if (targets.size() == 1) sites.emplace(g.sig(site.first), site.second);
    }
    return sites;
}

MetricsRow monomorph_score(const CallGraph& pred, const CallGraph& truth) {
    return score_sets(pred.program_id(), monomorphic_sites(pred), monomorphic_sites(truth));
}

}  // namespace cgprune
