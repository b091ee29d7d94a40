#include "cgprune/pipeline.hpp"

#include "cgprune/error.hpp"

namespace cgprune {

ProgramFeatures featurize_program(const CallGraph& g, const SemProvider* provider, const SourceMap& sources) {
    ProgramFeatures f;
    f.graph = &g;
    f.structure = featurize_graph(g);
    if (provider) f.sem = semantic_matrix(g, *provider, sources);
    return f;
}

TrainingSet assemble_training_set(std::span<const ProgramFeatures> programs, bool with_sem) {
    TrainingSet set;
    std::size_t rows = 0;
    Eigen::Index dim = 0;
    for (const auto& p : programs) {
        for (const Edge& e : p.graph->edges()) rows += e.label == Label::Unknown ? 0 : 1;
        if (with_sem) {
            if (static_cast<std::size_t>(p.sem.rows()) != p.graph->edge_count()) {
                throw AlignmentError("program '" + p.graph->program_id() + "': semantic rows do not match edges");
            }
            if (dim != 0 && p.sem.cols() != dim) throw ShapeError("semantic dimension differs between programs");
            dim = p.sem.cols();
        }
    }
    set.sem.resize(with_sem ? static_cast<Eigen::Index>(rows) : 0, dim);
    set.structure.reserve(rows);
    set.labels.reserve(rows);
    Eigen::Index r = 0;
    for (const auto& p : programs) {
        if (p.structure.size() != p.graph->edge_count()) {
            throw AlignmentError("program '" + p.graph->program_id() + "': structural rows do not match edges");
        }
        for (std::size_t i = 0; i < p.graph->edge_count(); ++i) {
            const Label label = p.graph->edge(i).label;
            if (label == Label::Unknown) continue;
            set.structure.push_back(p.structure[i]);
            set.labels.push_back(label == Label::TruePositive ? 1 : 0);
            if (with_sem) set.sem.row(r) = p.sem.row(static_cast<Eigen::Index>(i));
            ++r;
        }
    }
    return set;
}

std::vector<double> edge_probabilities(const FusionModel& m, const ProgramFeatures& features) {
    return predict_tp(m, features.sem, features.structure);
}

}  // namespace cgprune
