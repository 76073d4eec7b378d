#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dbforge/core.hpp"
#include "dbforge/datagen.hpp"
#include "dbforge/matrix.hpp"

namespace dbforge::metrics {

// Group key: [class label, shortcut value 1, ..., shortcut value S].
using GroupKey = std::vector<int>;
using GroupFreqs = std::map<GroupKey, double>;

struct GroupStats {
    std::int64_t count = 0;
    double accuracy = 0.0;
};

struct GroupedAccuracy {
    std::map<GroupKey, GroupStats> per_group;
    double iid_acc = 0.0;        // frequency-weighted mean accuracy
    double wga = 0.0;            // min over nonempty groups
    double per_class_worst = 0.0;
    std::string weighting;       // "train" or "test"
    int shortcut_count = 0;
};

// Group frequencies of a labeled dataset's ground-truth groups; used
// as the training-frequency weights for in-distribution accuracy.
GroupFreqs group_frequencies(const datagen::LabeledDataset& ds);

GroupedAccuracy grouped_accuracy(std::span<const int> predictions,
                                 const datagen::LabeledDataset& ds,
                                 const GroupFreqs* train_freqs = nullptr);

// Drop from in-distribution accuracy on the strata where one or both
// shortcuts take an uncommon (conflicting) value. Negative values
// mean the model loses accuracy off the common groups.
struct ShortcutGaps {
    double id_acc = 0.0;
    double gap_a = 0.0;    // shortcut 1 uncommon, shortcut 2 common
    double gap_b = 0.0;    // shortcut 2 uncommon, shortcut 1 common
    double gap_both = 0.0;
};

ShortcutGaps shortcut_gaps(const GroupedAccuracy& grouped);

struct ModeMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t truth_count = 0;
};

struct ModeQuality {
    std::map<std::pair<int, int>, ModeMetrics> per_mode; // key (bias value, class label)
    std::pair<int, int> smallest_mode{0, 0};
    ModeMetrics smallest;
    double overall_accuracy = 0.0;
};

// One-vs-rest precision/recall/F1 of predicted modes against ground
// truth; the smallest mode is the one with the fewest truth samples.
ModeQuality mode_quality(std::span<const core::ModeAssignment> predicted,
                         std::span<const core::ModeAssignment> truth);

struct DimCorrelation {
    double class_corr = 0.0;
    double bias_corr = 0.0;
};

// Per-dimension max |Pearson correlation| against one-hot class and
// bias indicators. Constant dimensions correlate as zero.
std::vector<DimCorrelation> correlation_profile(std::span<const double> features, int feature_dim,
                                                std::span<const int> labels,
                                                std::span<const int> bias_labels, int classes);

// Frequency matrix over the modes of drawn sample indices.
Matrix empirical_joint(std::span<const std::int64_t> draws,
                       std::span<const core::ModeAssignment> modes, int classes);

} // namespace dbforge::metrics
