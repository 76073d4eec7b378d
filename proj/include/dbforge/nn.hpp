#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dbforge/datagen.hpp"
#include "dbforge/matrix.hpp"
#include "dbforge/rng.hpp"

namespace dbforge::nn {

// Softmax regression (no hidden layers) or an MLP with one or two
// ReLU hidden layers.
struct Architecture {
    int input_dim = 0;
    std::vector<int> hidden;
    int classes = 0;

    int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
    std::vector<int> dims() const; // [input, hidden..., classes]
    std::int64_t parameter_count() const;
    void validate() const;
};

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
    int epochs = 0;              // exactly one of epochs/iterations is positive
    std::int64_t iterations = 0;
    int batch_size = 32;
    double learning_rate = 0.01;
    Optimizer optimizer = Optimizer::Adam;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Borrowing view over features + class labels. Holds no shortcut
// columns, so anything trained through it cannot read ground truth.
struct DataView {
    std::span<const double> features;
    std::span<const int> labels;
    int feature_dim = 0;
    int classes = 0;

    std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
    std::span<const double> row(std::int64_t i) const {
        return {features.data() + i * feature_dim, static_cast<std::size_t>(feature_dim)};
    }
};

DataView view(const datagen::LabeledDataset& ds);

// Owning feature/label buffer for materialized subsets.
struct OwnedData {
    std::vector<double> features;
    std::vector<int> labels;
    int feature_dim = 0;
    int classes = 0;

    DataView as_view() const { return {features, labels, feature_dim, classes}; }
};

OwnedData take(const DataView& data, std::span<const std::int64_t> indices);

// All parameters live in one flat vector: [W0, b0, W1, b1, ...] with
// W row-major (out x in). Keeps the optimizer, the checkpoint format
// and finite differencing trivial.
struct ClassifierModel {
    Architecture arch;
    std::vector<double> params;
    std::string init_scheme = "fan_in_uniform";

    std::int64_t weight_offset(int layer) const;
    std::int64_t bias_offset(int layer) const;

    // Softmax probabilities for a single input row.
    std::vector<double> forward(std::span<const double> x) const;
};

ClassifierModel init_model(const Architecture& arch, std::uint64_t seed);

// Seeded weighted sampling with replacement; draw probabilities are
// weights / sum(weights).
class WeightedSampler {
public:
    WeightedSampler(std::vector<double> weights, std::uint64_t seed);

    std::int64_t sample_one();
    std::vector<std::int64_t> sample_indices(std::int64_t count);

    std::int64_t size() const { return static_cast<std::int64_t>(weights_.size()); }
    const std::vector<double>& weights() const { return weights_; }
    double total_weight() const { return cumulative_.back(); }

private:
    std::vector<double> weights_;
    std::vector<double> cumulative_;
    Rng rng_;
};

struct TrainResult {
    ClassifierModel model;
    std::vector<double> epoch_loss; // mean loss per epoch (or per N/batch window)
};

// Stepwise minibatch cross-entropy trainer. Without a sampler, batches
// come from a fresh uniform shuffle each epoch; with one, every batch
// is drawn by weighted sampling with replacement. The view must stay
// alive for the trainer's lifetime.
class Trainer {
public:
    Trainer(const DataView& data, const Architecture& arch, const TrainConfig& cfg,
            std::optional<WeightedSampler> sampler = std::nullopt);

    double step(); // one minibatch update; returns the batch loss
    const ClassifierModel& model() const { return model_; }
    std::int64_t steps_done() const { return steps_done_; }
    std::int64_t total_steps() const { return total_steps_; }
    std::int64_t batches_per_epoch() const { return batches_per_epoch_; }

private:
    DataView data_;
    TrainConfig cfg_;
    std::optional<WeightedSampler> sampler_;
    ClassifierModel model_;
    Rng shuffle_rng_;
    std::vector<std::int64_t> order_;
    std::int64_t cursor_ = 0;
    std::int64_t steps_done_ = 0;
    std::int64_t total_steps_ = 0;
    std::int64_t batches_per_epoch_ = 0;
    std::vector<double> adam_m_;
    std::vector<double> adam_v_;
    std::int64_t adam_t_ = 0;
    std::vector<double> grad_;
    std::vector<std::int64_t> batch_;
};

// Runs a Trainer over the configured budget.
TrainResult train_erm(const DataView& data, const Architecture& arch, const TrainConfig& cfg,
                      std::optional<WeightedSampler> sampler = std::nullopt);

Matrix predict_proba(const ClassifierModel& model, const DataView& data);
std::vector<int> predict_labels(const ClassifierModel& model, const DataView& data);
std::vector<int> argmax_rows(const Matrix& proba);

// Mean cross-entropy loss and its analytic parameter gradient at the
// given parameters; used by training and by the finite-difference check.
double loss_and_gradient(const ClassifierModel& model, const DataView& data,
                         std::span<const std::int64_t> batch, double weight_decay,
                         std::vector<double>& grad);

// Max relative error between analytic and central-difference gradients.
double gradient_check_at(const ClassifierModel& model, const DataView& probe, double step = 1e-5);
double gradient_check(const Architecture& arch, std::uint64_t seed);

void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

} // namespace dbforge::nn
