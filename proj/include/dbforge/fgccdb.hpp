#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dbforge/core.hpp"
#include "dbforge/mst.hpp"
#include "dbforge/nn.hpp"

namespace dbforge::fgccdb {

struct DebiasConfig {
    nn::TrainConfig train;              // iteration-based
    std::int64_t checkpoint_every = 100; // iterations between validation evaluations

    void validate() const;
};

// Mode statistics, weight tables and per-sample weights derived from
// a list of (bias, label) assignments. The supervised variant is the
// same call fed with ground-truth shortcuts instead of MST output.
struct DerivedWeights {
    core::ConfusionMatrix confusion;
    core::ModeStatistics stats;
    core::WeightTable table;
    std::vector<double> sample_weights;

    double mi_original_joint = 0.0;   // I(s; y) of the observed joint
    double mi_multiplier_joint = 0.0; // I of normalize(W ⊙ J)
    double max_min_weight_ratio = 0.0;
    std::vector<double> residuals;    // per-column ‖W ⊙ P − q‖∞
    std::vector<double> realized_class_mass; // Σ_i W[i][j] per class
};

DerivedWeights derive_weights(std::span<const core::ModeAssignment> modes, int classes);
DerivedWeights derive_weights(const mst::MstResult& mst, std::span<const int> labels, int classes);

struct CheckpointEval {
    std::int64_t iteration = 0;
    std::vector<double> per_class_accuracy;
    double worst_class = 0.0;
};

struct DebiasResult {
    nn::ClassifierModel model; // checkpoint with the best worst-class validation accuracy
    std::vector<CheckpointEval> trace;
    std::int64_t best_iteration = 0;
    double best_worst_class = 0.0;
};

// Weighted-sampler training with periodic validation; keeps the
// parameters that maximize worst-class accuracy on the validation
// labels. Uniform weights reduce this to ERM with a resampled loader.
DebiasResult train_debiased(const nn::DataView& train, const nn::DataView& val,
                            std::span<const double> weights, const nn::Architecture& arch,
                            const DebiasConfig& cfg, std::uint64_t seed);

} // namespace dbforge::fgccdb
