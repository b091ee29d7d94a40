#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cgprune/callgraph.hpp"
#include "cgprune/nn/adam.hpp"
#include "cgprune/nn/dense.hpp"
#include "cgprune/semantic_features.hpp"
#include "cgprune/structural_features.hpp"

namespace cgprune {

// Which feature branches feed the classifier.
enum class Ablation { Both, SemOnly, StructOnly };

Ablation parse_ablation(std::string_view s);
std::string_view to_string(Ablation a);

inline constexpr int kModelVersion = 1;

struct FusionConfig {
    std::size_t sem_dim = 768;
    std::size_t hidden = 32;
    Ablation ablation = Ablation::Both;
    SourceMode source_mode = SourceMode::Both;
    double lr = 5e-6;
    std::size_t batch = 50;
    std::size_t epochs = 5;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    nn::Activation fusion_activation = nn::Activation::ReLU;
    bool standardize = true;
    // Loss weight per class {FP, TP}. Unweighted by default.
    std::array<double, 2> class_weights = {1.0, 1.0};

    bool uses_sem() const noexcept { return ablation != Ablation::StructOnly; }
    bool uses_struct() const noexcept { return ablation != Ablation::SemOnly; }
    void validate() const;  // throws ConfigError
};

// Projection layers for each branch, concatenated (sem first) into the
// classifier layer, followed by softmax over {FP, TP}. Ablated branches are absent.
struct FusionModel {
    FusionConfig config;
    std::optional<nn::DenseLayer<double>> sem_proj;
    std::optional<nn::DenseLayer<double>> struct_proj;
    nn::DenseLayer<double> classifier;
    Standardizer standardizer;
};

// Random init in fixed order: sem_proj, struct_proj, classifier.
FusionModel init_model(const FusionConfig& cfg, nn::Rng& rng);

// {prob_FP, prob_TP}. The struct vector is raw; the model's standardizer is applied.
// `sem` is ignored (and may be empty) under the struct-only ablation.
Eigen::Vector2d fuse_forward(const FusionModel& m, const SemVector& sem, const StructVector& structure);

struct Verdict {
    Label label = Label::FalsePositive;
    double prob_tp = 0.0;
};

// TruePositive iff prob_TP > prob_FP; ties prune.
Verdict classify_edge(const FusionModel& m, const SemVector& sem, const StructVector& structure);
Label decide(const Eigen::Vector2d& prob);

struct FusionGrads {
    std::optional<nn::DenseGrad<double>> sem_proj;
    std::optional<nn::DenseGrad<double>> struct_proj;
    nn::DenseGrad<double> classifier;
};

struct FusionLoss {
    double loss = 0.0;
    FusionGrads grads;
};

// Unweighted cross-entropy of one labeled edge and its parameter gradients.
FusionLoss fusion_backward(const FusionModel& m, const SemVector& sem, const StructVector& structure, int label);

std::vector<nn::ParamView<double>> param_views(FusionModel& m);
std::vector<nn::ConstParamView<double>> grad_views(const FusionGrads& g);

struct TrainingSet {
    SemMatrix sem;  // one row per sample; zero columns under struct-only
    std::vector<StructVector> structure;
    std::vector<int> labels;  // 0 = FP, 1 = TP

    std::size_t size() const noexcept { return labels.size(); }
};

struct TrainLog {
    std::vector<double> epoch_loss;  // mean weighted loss per epoch
    std::size_t steps = 0;
};

// Shuffled mini-batch Adam on mean (class-weighted) cross-entropy. The short
// final batch is kept. Throws TrainingError on bad data and NumericError with
// the step index on a non-finite loss.
FusionModel train(const FusionConfig& cfg, const TrainingSet& data, TrainLog* log = nullptr);

// prob_TP per row, in row order.
std::vector<double> predict_tp(const FusionModel& m, const SemMatrix& sem, std::span<const StructVector> structure);

void write_model(const FusionModel& m, std::ostream& out);
void save_model(const FusionModel& m, const std::string& path);
FusionModel read_model(std::istream& in, const std::string& source_name);
FusionModel load_model(const std::string& path);

// Applies recognised keys of a JSON object (as used in --config files) onto cfg.
void apply_config_json(FusionConfig& cfg, const std::string& json_text);

}  // namespace cgprune
