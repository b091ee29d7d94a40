#pragma once

#include <span>
#include <vector>

#include "cgprune/callgraph.hpp"
#include "cgprune/fusion_model.hpp"
#include "cgprune/semantic_features.hpp"
#include "cgprune/structural_features.hpp"

namespace cgprune {

// Edge-ordinal-aligned features of one program.
struct ProgramFeatures {
    const CallGraph* graph = nullptr;
    std::vector<StructVector> structure;
    SemMatrix sem;  // |E| x k_c; empty when the semantic branch is unused
};

ProgramFeatures featurize_program(const CallGraph& g, const SemProvider* provider, const SourceMap& sources);

// Stacks labeled edges of every program. Unknown-label edges are skipped.
TrainingSet assemble_training_set(std::span<const ProgramFeatures> programs, bool with_sem);

std::vector<double> edge_probabilities(const FusionModel& m, const ProgramFeatures& features);

}  // namespace cgprune
