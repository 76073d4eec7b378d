#include "dbforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dbforge/error.hpp"

namespace dbforge::metrics {

namespace {

GroupKey key_of(const datagen::LabeledDataset& ds, std::int64_t i) {
    GroupKey key;
    key.reserve(1 + ds.shortcut_count);
    key.push_back(ds.labels[i]);
    for (int s = 0; s < ds.shortcut_count; ++s) key.push_back(ds.shortcut(i, s));
    return key;
}

} // namespace

GroupFreqs group_frequencies(const datagen::LabeledDataset& ds) {
    if (ds.shortcut_count < 1) throw ValidationError("dataset carries no shortcut columns");
    GroupFreqs freqs;
    for (std::int64_t i = 0; i < ds.size(); ++i) freqs[key_of(ds, i)] += 1.0;
    for (auto& [key, v] : freqs) v /= static_cast<double>(ds.size());
    return freqs;
}

GroupedAccuracy grouped_accuracy(std::span<const int> predictions,
                                 const datagen::LabeledDataset& ds, const GroupFreqs* train_freqs) {
    if (ds.shortcut_count < 1) throw ValidationError("dataset carries no shortcut columns");
    if (static_cast<std::int64_t>(predictions.size()) != ds.size()) {
        throw ValidationError("prediction count does not match the dataset");
    }

    struct Tally {
        std::int64_t count = 0;
        std::int64_t correct = 0;
    };
    std::map<GroupKey, Tally> tallies;
    for (std::int64_t i = 0; i < ds.size(); ++i) {
        auto& t = tallies[key_of(ds, i)];
        ++t.count;
        t.correct += predictions[i] == ds.labels[i];
    }

    GroupedAccuracy out;
    out.shortcut_count = ds.shortcut_count;
    out.wga = 1.0;
    for (const auto& [key, t] : tallies) {
        const double acc = static_cast<double>(t.correct) / static_cast<double>(t.count);
        out.per_group[key] = {t.count, acc};
        out.wga = std::min(out.wga, acc);
    }

    // One weighting for iid_acc and the per-class accuracies, so that
    // wga <= per_class_worst <= iid_acc holds as a partition refinement.
    const auto group_weight = [&](const GroupKey& key, const GroupStats& stats) {
        if (train_freqs == nullptr) return static_cast<double>(stats.count);
        const auto it = train_freqs->find(key);
        return it == train_freqs->end() ? 0.0 : it->second;
    };

    out.weighting = train_freqs != nullptr ? "train" : "test";
    double total_mass = 0.0;
    double total_acc = 0.0;
    std::vector<double> class_mass(ds.classes, 0.0);
    std::vector<double> class_acc(ds.classes, 0.0);
    for (const auto& [key, stats] : out.per_group) {
        const double w = group_weight(key, stats);
        total_mass += w;
        total_acc += w * stats.accuracy;
        class_mass[key[0]] += w;
        class_acc[key[0]] += w * stats.accuracy;
    }
    if (total_mass <= 0.0) {
        throw ValidationError("no overlap between test groups and training frequencies");
    }
    out.iid_acc = total_acc / total_mass;
    out.per_class_worst = 1.0;
    for (int c = 0; c < ds.classes; ++c) {
        if (class_mass[c] <= 0.0) continue;
        out.per_class_worst = std::min(out.per_class_worst, class_acc[c] / class_mass[c]);
    }
    return out;
}

ShortcutGaps shortcut_gaps(const GroupedAccuracy& grouped) {
    if (grouped.shortcut_count != 2) {
        throw ValidationError("shortcut gaps need exactly two shortcut columns");
    }

    // pooled accuracy over the groups matching an (A common?, B common?) stratum
    const auto stratum_accuracy = [&](bool a_common, bool b_common) {
        std::int64_t count = 0;
        double correct = 0.0;
        for (const auto& [key, stats] : grouped.per_group) {
            const bool a = key[1] == key[0];
            const bool b = key[2] == key[0];
            if (a == a_common && b == b_common) {
                count += stats.count;
                correct += stats.accuracy * static_cast<double>(stats.count);
            }
        }
        if (count == 0) {
            throw ValidationError(std::string("missing group cell: shortcut A ") +
                                  (a_common ? "common" : "uncommon") + ", shortcut B " +
                                  (b_common ? "common" : "uncommon"));
        }
        return correct / static_cast<double>(count);
    };

    ShortcutGaps gaps;
    gaps.id_acc = grouped.iid_acc;
    gaps.gap_a = stratum_accuracy(false, true) - gaps.id_acc;
    gaps.gap_b = stratum_accuracy(true, false) - gaps.id_acc;
    gaps.gap_both = stratum_accuracy(false, false) - gaps.id_acc;
    return gaps;
}

ModeQuality mode_quality(std::span<const core::ModeAssignment> predicted,
                         std::span<const core::ModeAssignment> truth) {
    if (predicted.size() != truth.size()) {
        throw ValidationError("predicted and truth mode lists differ in length");
    }

    struct Tally {
        std::int64_t truth_count = 0;
        std::int64_t pred_count = 0;
        std::int64_t hits = 0;
    };
    std::map<std::pair<int, int>, Tally> tallies;
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const std::pair<int, int> tk{truth[i].bias, truth[i].label};
        const std::pair<int, int> pk{predicted[i].bias, predicted[i].label};
        ++tallies[tk].truth_count;
        ++tallies[pk].pred_count;
        if (tk == pk) {
            ++tallies[tk].hits;
            ++correct;
        }
    }

    ModeQuality out;
    out.overall_accuracy =
        truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
    std::int64_t smallest_count = std::numeric_limits<std::int64_t>::max();
    for (const auto& [key, t] : tallies) {
        ModeMetrics m;
        m.truth_count = t.truth_count;
        m.precision = t.pred_count > 0
                          ? static_cast<double>(t.hits) / static_cast<double>(t.pred_count)
                          : 0.0;
        m.recall = t.truth_count > 0
                       ? static_cast<double>(t.hits) / static_cast<double>(t.truth_count)
                       : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        out.per_mode[key] = m;
        // smallest mode by truth count, ties by lexicographic key (map order)
        if (t.truth_count > 0 && t.truth_count < smallest_count) {
            smallest_count = t.truth_count;
            out.smallest_mode = key;
            out.smallest = m;
        }
    }
    return out;
}

namespace {

double pearson_against_indicator(std::span<const double> features, int feature_dim, int dim,
                                 std::span<const int> values, int target) {
    const std::int64_t n = static_cast<std::int64_t>(values.size());
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        mean_x += features[i * feature_dim + dim];
        mean_y += values[i] == target ? 1.0 : 0.0;
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);

    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double dx = features[i * feature_dim + dim] - mean_x;
        const double dy = (values[i] == target ? 1.0 : 0.0) - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0; // constant dimension or indicator
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

std::vector<DimCorrelation> correlation_profile(std::span<const double> features, int feature_dim,
                                                std::span<const int> labels,
                                                std::span<const int> bias_labels, int classes) {
    const std::int64_t n = static_cast<std::int64_t>(labels.size());
    if (n < 3) throw ValidationError("correlation profile needs at least 3 samples");
    if (bias_labels.size() != labels.size()) {
        throw ValidationError("labels and bias labels differ in length");
    }
    if (static_cast<std::int64_t>(features.size()) != n * feature_dim) {
        throw ValidationError("feature buffer does not match n x feature_dim");
    }

    std::vector<DimCorrelation> out(feature_dim);
    for (int dim = 0; dim < feature_dim; ++dim) {
        for (int c = 0; c < classes; ++c) {
            out[dim].class_corr =
                std::max(out[dim].class_corr,
                         std::abs(pearson_against_indicator(features, feature_dim, dim, labels, c)));
            out[dim].bias_corr = std::max(
                out[dim].bias_corr,
                std::abs(pearson_against_indicator(features, feature_dim, dim, bias_labels, c)));
        }
    }
    return out;
}

Matrix empirical_joint(std::span<const std::int64_t> draws,
                       std::span<const core::ModeAssignment> modes, int classes) {
    if (draws.empty()) throw ValidationError("no draws to tabulate");
    Matrix out(classes, classes);
    const double inc = 1.0 / static_cast<double>(draws.size());
    for (const std::int64_t idx : draws) {
        if (idx < 0 || idx >= static_cast<std::int64_t>(modes.size())) {
            throw ValidationError("draw index out of range");
        }
        out(modes[idx].bias, modes[idx].label) += inc;
    }
    return out;
}

} // namespace dbforge::metrics
