#include "dbforge/fgccdb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dbforge/error.hpp"
#include "dbforge/rng.hpp"

namespace dbforge::fgccdb {

void DebiasConfig::validate() const {
    if (train.iterations <= 0) throw ValidationError("debias training is iteration-based");
    train.validate();
    if (checkpoint_every < 1) throw ValidationError("checkpoint interval must be positive");
}

DerivedWeights derive_weights(std::span<const core::ModeAssignment> modes, int classes) {
    DerivedWeights out;
    out.confusion = core::build_confusion(modes, classes);
    out.stats = core::estimate_statistics(out.confusion);
    out.table = core::compute_weights(out.stats, out.confusion);
    out.sample_weights = core::per_sample_weights(out.table, modes);

    out.mi_original_joint = core::mutual_information(out.stats.joint);
    out.mi_multiplier_joint = core::mutual_information(core::reweighted_joint(out.stats, out.table));
    out.residuals = core::matching_residuals(out.stats, out.table);

    double wmin = std::numeric_limits<double>::infinity();
    double wmax = 0.0;
    for (int i = 0; i < classes; ++i) {
        for (int j = 0; j < classes; ++j) {
            const double w = out.table.sample_weight(i, j);
            if (w > 0.0) {
                wmin = std::min(wmin, w);
                wmax = std::max(wmax, w);
            }
        }
    }
    out.max_min_weight_ratio = wmin > 0.0 && std::isfinite(wmin) ? wmax / wmin : 0.0;

    out.realized_class_mass.assign(classes, 0.0);
    for (int j = 0; j < classes; ++j) {
        for (int i = 0; i < classes; ++i) out.realized_class_mass[j] += out.table.mode_weight(i, j);
    }
    return out;
}

DerivedWeights derive_weights(const mst::MstResult& mst, std::span<const int> labels, int classes) {
    return derive_weights(mst.modes(labels), classes);
}

namespace {

std::vector<double> per_class_accuracy(const nn::ClassifierModel& model, const nn::DataView& val) {
    const auto pred = nn::predict_labels(model, val);
    std::vector<std::int64_t> count(val.classes, 0);
    std::vector<std::int64_t> correct(val.classes, 0);
    for (std::int64_t i = 0; i < val.size(); ++i) {
        ++count[val.labels[i]];
        correct[val.labels[i]] += pred[i] == val.labels[i];
    }
    std::vector<double> acc(val.classes, 0.0);
    for (int c = 0; c < val.classes; ++c) {
        acc[c] = count[c] > 0 ? static_cast<double>(correct[c]) / static_cast<double>(count[c]) : 0.0;
    }
    return acc;
}

} // namespace

DebiasResult train_debiased(const nn::DataView& train, const nn::DataView& val,
                            std::span<const double> weights, const nn::Architecture& arch,
                            const DebiasConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (static_cast<std::int64_t>(weights.size()) != train.size()) {
        throw ValidationError("weight count does not match the training data");
    }
    if (val.size() < 1) throw ValidationError("validation data is empty");

    nn::TrainConfig train_cfg = cfg.train;
    train_cfg.seed = derive_seed(seed, {0x6465626961ULL});
    nn::WeightedSampler sampler({weights.begin(), weights.end()},
                                derive_seed(seed, {0x77736d70ULL}));
    nn::Trainer trainer(train, arch, train_cfg, std::move(sampler));

    DebiasResult result;
    result.best_worst_class = -1.0;
    while (trainer.steps_done() < trainer.total_steps()) {
        trainer.step();
        const bool due = trainer.steps_done() % cfg.checkpoint_every == 0 ||
                         trainer.steps_done() == trainer.total_steps();
        if (!due) continue;

        CheckpointEval eval;
        eval.iteration = trainer.steps_done();
        eval.per_class_accuracy = per_class_accuracy(trainer.model(), val);
        eval.worst_class =
            *std::min_element(eval.per_class_accuracy.begin(), eval.per_class_accuracy.end());
        if (eval.worst_class > result.best_worst_class) {
            result.best_worst_class = eval.worst_class;
            result.best_iteration = eval.iteration;
            result.model = trainer.model();
        }
        result.trace.push_back(std::move(eval));
    }
    return result;
}

} // namespace dbforge::fgccdb
