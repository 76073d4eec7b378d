#include "dbforge/mst.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dbforge/error.hpp"
#include "dbforge/rng.hpp"

namespace dbforge::mst {

void MstConfig::validate() const {
    if (!(gamma > 0.0) || gamma > 1.0) throw ValidationError("mst gamma must lie in (0, 1]");
    if (!(beta > 0.0) || beta > 1.0) throw ValidationError("mst beta must lie in (0, 1]");
    if (repeats < 0) throw ValidationError("mst repeats must be nonnegative");
    if (stage_train.epochs <= 0) throw ValidationError("mst stages train for a fixed epoch budget");
    stage_train.validate();
}

std::vector<core::ModeAssignment> MstResult::modes(std::span<const int> labels) const {
    if (labels.size() != bias_labels.size()) {
        throw ValidationError("label count does not match the bias labels");
    }
    std::vector<core::ModeAssignment> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = {bias_labels[i], labels[i]};
    return out;
}

std::vector<std::int64_t> split_initial(std::int64_t n, double gamma, std::uint64_t seed) {
    if (n < 1) throw ValidationError("cannot split an empty dataset");
    if (!(gamma > 0.0) || gamma > 1.0) throw ValidationError("gamma must lie in (0, 1]");
    const auto target = static_cast<std::int64_t>(std::ceil(gamma * static_cast<double>(n)));
    std::vector<std::int64_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    Rng rng(derive_seed(seed, {0x73706c6974ULL}));
    for (std::int64_t i = 0; i < target; ++i) {
        const auto j = i + static_cast<std::int64_t>(
                               rng.next_below(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(target);
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::vector<std::int64_t> select_top_confidence(std::span<const int> labels, const Matrix& proba,
                                                double beta, Confidence confidence,
                                                std::vector<std::string>* warnings) {
    if (static_cast<std::size_t>(proba.rows) != labels.size()) {
        throw ValidationError("probability rows do not align with the labels");
    }
    if (!(beta > 0.0) || beta > 1.0) throw ValidationError("beta must lie in (0, 1]");
    const int classes = proba.cols;

    std::vector<std::vector<std::pair<double, std::int64_t>>> ranked(classes);
    for (std::int64_t i = 0; i < proba.rows; ++i) {
        const int y = labels[i];
        double conf = proba(static_cast<int>(i), y);
        if (confidence == Confidence::MaxProbability) {
            for (int j = 0; j < classes; ++j) conf = std::max(conf, proba(static_cast<int>(i), j));
        }
        ranked[y].emplace_back(conf, i);
    }

    std::vector<std::int64_t> selected;
    for (int c = 0; c < classes; ++c) {
        auto& rows = ranked[c];
        if (rows.empty()) {
            if (warnings) warnings->push_back("class " + std::to_string(c) + " is empty, skipped");
            continue;
        }
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        const auto keep = static_cast<std::size_t>(
            std::ceil(beta * static_cast<double>(rows.size())));
        for (std::size_t k = 0; k < keep; ++k) selected.push_back(rows[k].second);
    }
    std::sort(selected.begin(), selected.end());
    return selected;
}

MstResult run_mst(const nn::DataView& data, const nn::Architecture& arch, const MstConfig& cfg) {
    cfg.validate();
    arch.validate();
    const std::int64_t n = data.size();
    if (n < 1) throw ValidationError("cannot run MST on an empty dataset");

    MstResult result;
    if (std::ceil(cfg.gamma * static_cast<double>(n)) < data.classes) {
        result.warnings.push_back("initial subset smaller than the class count");
    }

    const auto train_stage = [&](std::span<const std::int64_t> indices, int stage) {
        nn::TrainConfig stage_cfg = cfg.stage_train;
        stage_cfg.seed = derive_seed(cfg.seed, {0x7374616765ULL, static_cast<std::uint64_t>(stage)});
        const nn::OwnedData subset = nn::take(data, indices);
        try {
            return nn::train_erm(subset.as_view(), arch, stage_cfg);
        } catch (const TrainingError& e) {
            throw TrainingError("stage " + std::to_string(stage) + ": " + e.what());
        }
    };

    // Stage 0: initial bias learning on a random gamma-subset.
    std::vector<std::int64_t> selected =
        split_initial(n, cfg.gamma, derive_seed(cfg.seed, {0x696e6974ULL}));
    {
        std::vector<bool> present(data.classes, false);
        for (std::int64_t i : selected) present[data.labels[i]] = true;
        for (int c = 0; c < data.classes; ++c) {
            if (!present[c]) {
                result.warnings.push_back("class " + std::to_string(c) +
                                          " absent from the initial subset");
            }
        }
    }
    nn::TrainResult trained = train_stage(selected, 0);

    const auto record_stage = [&](int stage) {
        StageRecord rec;
        rec.stage = stage;
        rec.selected = selected;
        rec.bias_labels = nn::predict_labels(trained.model, data);
        rec.confusion = core::build_confusion(rec.bias_labels, data.labels, data.classes);
        rec.final_train_loss = trained.epoch_loss.empty() ? 0.0 : trained.epoch_loss.back();
        rec.model = trained.model;
        result.stages.push_back(std::move(rec));
    };
    record_stage(0);

    // Enhancement stages: re-score the FULL set, keep the per-class
    // top-beta, retrain from scratch.
    for (int r = 1; r <= cfg.repeats; ++r) {
        const Matrix proba = nn::predict_proba(trained.model, data);
        selected = select_top_confidence(data.labels, proba, cfg.beta, cfg.confidence,
                                         &result.warnings);
        trained = train_stage(selected, r);
        record_stage(r);
    }

    result.bias_labels = result.stages.back().bias_labels;
    result.final_confusion = result.stages.back().confusion;
    return result;
}

std::vector<metrics::ModeQuality> stage_quality(const MstResult& result,
                                                const datagen::LabeledDataset& ds,
                                                int shortcut_column) {
    if (shortcut_column < 0 || shortcut_column >= ds.shortcut_count) {
        throw ValidationError("shortcut column out of range");
    }
    std::vector<core::ModeAssignment> truth(ds.size());
    for (std::int64_t i = 0; i < ds.size(); ++i) {
        truth[i] = {ds.shortcut(i, shortcut_column), ds.labels[i]};
    }
    std::vector<metrics::ModeQuality> out;
    out.reserve(result.stages.size());
    for (const auto& stage : result.stages) {
        std::vector<core::ModeAssignment> pred(ds.size());
        for (std::int64_t i = 0; i < ds.size(); ++i) {
            pred[i] = {stage.bias_labels[i], ds.labels[i]};
        }
        out.push_back(metrics::mode_quality(pred, truth));
    }
    return out;
}

double conflicting_fraction(const StageRecord& stage, const datagen::LabeledDataset& ds,
                            int shortcut_column) {
    if (stage.selected.empty()) return 0.0;
    std::int64_t conflicting = 0;
    for (const std::int64_t i : stage.selected) {
        if (ds.shortcut(i, shortcut_column) != ds.labels[i]) ++conflicting;
    }
    return static_cast<double>(conflicting) / static_cast<double>(stage.selected.size());
}

} // namespace dbforge::mst
