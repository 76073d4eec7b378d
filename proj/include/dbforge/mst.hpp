#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dbforge/core.hpp"
#include "dbforge/metrics.hpp"
#include "dbforge/nn.hpp"

namespace dbforge::mst {

// What "highest prediction confidence" means when ranking samples.
// OwnLabel scores a sample by the probability of its own class label;
// MaxProbability by the largest class probability.
enum class Confidence { OwnLabel, MaxProbability };

struct MstConfig {
    double gamma = 0.10;  // fraction of the data for the initial stage
    double beta = 0.50;   // per-class top-confidence fraction kept per enhancement stage
    int repeats = 3;      // enhancement stages; 1 is the basic two-stage pipeline
    Confidence confidence = Confidence::OwnLabel;
    nn::TrainConfig stage_train; // shared by every stage
    std::uint64_t seed = 0;

    void validate() const;
};

struct StageRecord {
    int stage = 0;                       // 0 = initial bias learning
    std::vector<std::int64_t> selected;  // indices the stage trained on
    std::vector<int> bias_labels;        // stage model's predictions over the full set
    core::ConfusionMatrix confusion;     // of (stage bias labels, class labels)
    double final_train_loss = 0.0;
    nn::ClassifierModel model;
};

struct MstResult {
    std::vector<int> bias_labels; // from the final stage's model
    core::ConfusionMatrix final_confusion;
    std::vector<StageRecord> stages;
    std::vector<std::string> warnings;

    std::vector<core::ModeAssignment> modes(std::span<const int> labels) const;
};

// Uniform subset without replacement of size ceil(gamma * n), not
// class-stratified.
std::vector<std::int64_t> split_initial(std::int64_t n, double gamma, std::uint64_t seed);

// Per class: rank samples by confidence (descending, ties by ascending
// index) and keep the top ceil(beta * class size); returns the union.
std::vector<std::int64_t> select_top_confidence(std::span<const int> labels, const Matrix& proba,
                                                double beta, Confidence confidence,
                                                std::vector<std::string>* warnings = nullptr);

// Full multi-stage data-selective retraining. Takes a shortcut-free
// view by construction; ground truth can only enter through the
// separate quality annotation below.
MstResult run_mst(const nn::DataView& data, const nn::Architecture& arch, const MstConfig& cfg);

// Per-stage mode quality against one ground-truth shortcut column.
std::vector<metrics::ModeQuality> stage_quality(const MstResult& result,
                                                const datagen::LabeledDataset& ds,
                                                int shortcut_column);

// Fraction of a stage's selected samples whose ground-truth shortcut
// conflicts with their class label.
double conflicting_fraction(const StageRecord& stage, const datagen::LabeledDataset& ds,
                            int shortcut_column);

} // namespace dbforge::mst
