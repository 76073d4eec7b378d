#include <doctest.h>

#include <cmath>

#include "dbforge/error.hpp"
#include "dbforge/metrics.hpp"
#include "dbforge/nn.hpp"
#include "dbforge/rng.hpp"

using namespace dbforge;
using namespace dbforge::metrics;

namespace {

// Dataset with one shortcut and explicit per-group accuracy targets.
// Groups are (y, s) over {0,1}^2, `count` samples each; predictions
// are correct for the first round(acc * count) samples of the group.
struct GroupSpec {
    int label;
    int shortcut;
    int count;
    double accuracy;
};

struct Built {
    datagen::LabeledDataset ds;
    std::vector<int> predictions;
};

Built build_groups(const std::vector<GroupSpec>& specs) {
    Built out;
    out.ds.classes = 2;
    out.ds.feature_dim = 1;
    out.ds.shortcut_count = 1;
    for (const auto& g : specs) {
        const int correct = static_cast<int>(std::lround(g.accuracy * g.count));
        for (int k = 0; k < g.count; ++k) {
            out.ds.features.push_back(0.0);
            out.ds.labels.push_back(g.label);
            out.ds.shortcuts.push_back(g.shortcut);
            out.predictions.push_back(k < correct ? g.label : 1 - g.label);
        }
    }
    return out;
}

} // namespace

TEST_CASE("grouped accuracy: equal-weight arithmetic") {
    const auto built = build_groups({
        {0, 0, 20, 0.9},
        {0, 1, 20, 0.95},
        {1, 0, 20, 0.6},
        {1, 1, 20, 0.7},
    });
    const auto grouped = grouped_accuracy(built.predictions, built.ds);
    CHECK(grouped.wga == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(grouped.iid_acc == doctest::Approx(0.7875).epsilon(1e-12));
    CHECK(grouped.weighting == "test");
    CHECK(grouped.per_group.size() == 4);
}

TEST_CASE("grouped accuracy: perfect predictions") {
    const auto built = build_groups({{0, 0, 5, 1.0}, {1, 1, 5, 1.0}, {0, 1, 5, 1.0}});
    const auto grouped = grouped_accuracy(built.predictions, built.ds);
    CHECK(grouped.iid_acc == 1.0);
    CHECK(grouped.wga == 1.0);
    CHECK(grouped.per_class_worst == 1.0);
}

TEST_CASE("grouped accuracy: training-frequency weighting") {
    const auto built = build_groups({
        {0, 0, 10, 1.0},
        {0, 1, 10, 0.0},
        {1, 0, 10, 0.0},
        {1, 1, 10, 1.0},
    });
    GroupFreqs freqs;
    freqs[{0, 0}] = 0.475;
    freqs[{0, 1}] = 0.025;
    freqs[{1, 0}] = 0.025;
    freqs[{1, 1}] = 0.475;
    const auto grouped = grouped_accuracy(built.predictions, built.ds, &freqs);
    CHECK(grouped.iid_acc == doctest::Approx(0.95).epsilon(1e-12));
    CHECK(grouped.wga == doctest::Approx(0.0));
    CHECK(grouped.weighting == "train");
}

TEST_CASE("grouped accuracy invariant: wga <= per-class worst <= iid") {
    Rng rng(808);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<GroupSpec> specs;
        for (int y = 0; y < 2; ++y) {
            for (int s = 0; s < 2; ++s) {
                specs.push_back({y, s, 5 + static_cast<int>(rng.next_below(20)),
                                 rng.next_double()});
            }
        }
        const auto built = build_groups(specs);
        const auto grouped = grouped_accuracy(built.predictions, built.ds);
        REQUIRE(grouped.wga <= grouped.per_class_worst + 1e-12);
        REQUIRE(grouped.per_class_worst <= grouped.iid_acc + 1e-12);
    }
}

TEST_CASE("grouped accuracy requires shortcut columns") {
    datagen::LabeledDataset bare;
    bare.classes = 2;
    bare.feature_dim = 1;
    bare.shortcut_count = 0;
    bare.features = {0.0};
    bare.labels = {0};
    const std::vector<int> pred{0};
    CHECK_THROWS_AS(grouped_accuracy(pred, bare), ValidationError);
}

namespace {

Built build_two_shortcut(const std::vector<std::array<double, 4>>& acc_by_class) {
    Built out;
    out.ds.classes = 2;
    out.ds.feature_dim = 1;
    out.ds.shortcut_count = 2;
    for (int y = 0; y < 2; ++y) {
        int cell = 0;
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b, ++cell) {
                const int s1 = a == 0 ? y : 1 - y; // a==0 => shortcut 1 common
                const int s2 = b == 0 ? y : 1 - y;
                const int count = 20;
                const int correct =
                    static_cast<int>(std::lround(acc_by_class[y][cell] * count));
                for (int k = 0; k < count; ++k) {
                    out.ds.features.push_back(0.0);
                    out.ds.labels.push_back(y);
                    out.ds.shortcuts.push_back(s1);
                    out.ds.shortcuts.push_back(s2);
                    out.predictions.push_back(k < correct ? y : 1 - y);
                }
            }
        }
    }
    return out;
}

} // namespace

TEST_CASE("shortcut gaps: subtraction and the uniform case") {
    // cells per class: [both common, B uncommon, A uncommon, both uncommon]
    const auto built = build_two_shortcut({{{0.9, 0.9, 0.9, 0.3}}, {{0.9, 0.9, 0.9, 0.3}}});
    const auto grouped = grouped_accuracy(built.predictions, built.ds);
    const auto gaps = shortcut_gaps(grouped);
    CHECK(gaps.gap_both == doctest::Approx(0.3 - gaps.id_acc).epsilon(1e-12));
    CHECK(gaps.gap_a == doctest::Approx(0.9 - gaps.id_acc).epsilon(1e-12));

    const auto flat = build_two_shortcut({{{0.8, 0.8, 0.8, 0.8}}, {{0.8, 0.8, 0.8, 0.8}}});
    const auto flat_gaps = shortcut_gaps(grouped_accuracy(flat.predictions, flat.ds));
    CHECK(flat_gaps.gap_a == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(flat_gaps.gap_b == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(flat_gaps.gap_both == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("shortcut gaps: missing cell is an error") {
    Built built = build_two_shortcut({{{1, 1, 1, 1}}, {{1, 1, 1, 1}}});
    // drop every both-uncommon sample
    datagen::LabeledDataset pruned;
    pruned.classes = 2;
    pruned.feature_dim = 1;
    pruned.shortcut_count = 2;
    std::vector<int> pred;
    for (std::int64_t i = 0; i < built.ds.size(); ++i) {
        const bool a = built.ds.shortcut(i, 0) == built.ds.labels[i];
        const bool b = built.ds.shortcut(i, 1) == built.ds.labels[i];
        if (!a && !b) continue;
        pruned.features.push_back(0.0);
        pruned.labels.push_back(built.ds.labels[i]);
        pruned.shortcuts.push_back(built.ds.shortcut(i, 0));
        pruned.shortcuts.push_back(built.ds.shortcut(i, 1));
        pred.push_back(built.predictions[i]);
    }
    CHECK_THROWS_WITH_AS(shortcut_gaps(grouped_accuracy(pred, pruned)),
                         doctest::Contains("missing"), ValidationError);
}

TEST_CASE("mode quality: identity, constant predictions, hand fixture") {
    using core::ModeAssignment;
    const std::vector<ModeAssignment> truth{{0, 0}, {1, 0}, {1, 0}, {1, 0}};
    const auto perfect = mode_quality(truth, truth);
    CHECK(perfect.overall_accuracy == 1.0);
    for (const auto& [key, m] : perfect.per_mode) {
        if (m.truth_count > 0) {
            CHECK(m.precision == 1.0);
            CHECK(m.recall == 1.0);
            CHECK(m.f1 == 1.0);
        }
    }

    const std::vector<ModeAssignment> constant{{0, 0}, {0, 0}, {0, 0}, {0, 0}};
    const auto degenerate = mode_quality(constant, truth);
    CHECK(degenerate.per_mode.at({0, 0}).recall == 1.0);
    CHECK(degenerate.per_mode.at({1, 0}).recall == 0.0);

    // pred = [A,A,B,B], truth = [A,B,B,B] with A the smallest mode
    const std::vector<ModeAssignment> pred{{0, 0}, {0, 0}, {1, 0}, {1, 0}};
    const auto quality = mode_quality(pred, truth);
    CHECK(quality.smallest_mode == std::pair<int, int>{0, 0});
    CHECK(quality.smallest.precision == doctest::Approx(0.5));
    CHECK(quality.smallest.recall == doctest::Approx(1.0));
    CHECK(quality.smallest.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("mode quality agrees with a brute-force confusion-table oracle") {
    using core::ModeAssignment;
    Rng rng(616);
    for (int trial = 0; trial < 30; ++trial) {
        const int classes = 2 + static_cast<int>(rng.next_below(3));
        const std::int64_t n = 50 + static_cast<std::int64_t>(rng.next_below(950));
        std::vector<ModeAssignment> pred(n), truth(n);
        for (std::int64_t i = 0; i < n; ++i) {
            pred[i] = {static_cast<int>(rng.next_below(classes)),
                       static_cast<int>(rng.next_below(classes))};
            truth[i] = {static_cast<int>(rng.next_below(classes)), pred[i].label};
        }
        const auto quality = mode_quality(pred, truth);

        for (const auto& [key, metrics] : quality.per_mode) {
            std::int64_t tp = 0, fp = 0, fn = 0;
            for (std::int64_t i = 0; i < n; ++i) {
                const bool in_pred = pred[i].bias == key.first && pred[i].label == key.second;
                const bool in_truth = truth[i].bias == key.first && truth[i].label == key.second;
                tp += in_pred && in_truth;
                fp += in_pred && !in_truth;
                fn += !in_pred && in_truth;
            }
            const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
            const double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
            REQUIRE(metrics.precision == precision);
            REQUIRE(metrics.recall == recall);
        }
    }
}

TEST_CASE("correlation profile: indicators, noise and affine invariance") {
    Rng rng(1234);
    const std::int64_t n = 10000;
    const int dim = 3;
    std::vector<int> labels(n), bias(n);
    std::vector<double> features(n * dim);
    for (std::int64_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(rng.next_below(2));
        bias[i] = static_cast<int>(rng.next_below(2));
        features[i * dim + 0] = labels[i] == 0 ? 1.0 : 0.0; // exact indicator
        features[i * dim + 1] = rng.next_gaussian();        // pure noise
        features[i * dim + 2] = 7.0;                        // constant
    }
    const auto profile = correlation_profile(features, dim, labels, bias, 2);
    CHECK(profile[0].class_corr == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(profile[1].class_corr <= 0.05);
    CHECK(profile[2].class_corr == 0.0);
    CHECK(profile[2].bias_corr == 0.0);

    // affine rescaling leaves Pearson untouched
    auto scaled = features;
    for (std::int64_t i = 0; i < n; ++i) {
        scaled[i * dim + 1] = 3.5 * scaled[i * dim + 1] - 11.0;
    }
    const auto rescaled = correlation_profile(scaled, dim, labels, bias, 2);
    CHECK(std::abs(rescaled[1].class_corr - profile[1].class_corr) <= 1e-9);
    CHECK(std::abs(rescaled[1].bias_corr - profile[1].bias_corr) <= 1e-9);
}

TEST_CASE("empirical joint from sampler draws") {
    using core::ModeAssignment;
    // fixture weight table flattened into per-sample weights
    std::vector<ModeAssignment> modes;
    std::vector<double> weights;
    const auto add = [&](int s, int y, int count, double w) {
        for (int k = 0; k < count; ++k) {
            modes.push_back({s, y});
            weights.push_back(w);
        }
    };
    add(0, 0, 95, 0.005540166204986150);
    add(0, 1, 5, 2.0);
    add(1, 0, 5, 2.0);
    add(1, 1, 95, 0.005540166204986150);

    nn::WeightedSampler sampler(weights, 3141);
    const std::int64_t n = 1000000;
    const auto draws = sampler.sample_indices(n);
    const auto joint = empirical_joint(draws, modes, 2);

    // targets: mode mass W / sum(W), W = [[0.5263, 10], [10, 0.5263]]
    const double wsum = 2.0 * (0.5263157894736842 + 10.0);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double target = (i == j ? 0.5263157894736842 : 10.0) / wsum;
            const double sigma = std::sqrt(target * (1.0 - target) / static_cast<double>(n));
            REQUIRE(std::abs(joint(i, j) - target) <= 3.0 * sigma);
        }
    }

    // single nonzero weight on the first (0,1) sample: one-hot joint
    std::vector<double> hot_weights(modes.size(), 0.0);
    hot_weights[95] = 1.0;
    nn::WeightedSampler hot(hot_weights, 5);
    const auto hot_joint = empirical_joint(hot.sample_indices(100), modes, 2);
    CHECK(hot_joint(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("empirical joint of uniform weights approaches the data joint") {
    using core::ModeAssignment;
    std::vector<ModeAssignment> modes;
    const auto add = [&](int s, int y, int count) {
        for (int k = 0; k < count; ++k) modes.push_back({s, y});
    };
    add(0, 0, 95);
    add(0, 1, 5);
    add(1, 0, 5);
    add(1, 1, 95);

    nn::WeightedSampler sampler(std::vector<double>(modes.size(), 1.0), 2718);
    const std::int64_t n = 1000000;
    const auto joint = empirical_joint(sampler.sample_indices(n), modes, 2);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double target = (i == j ? 95.0 : 5.0) / 200.0;
            const double sigma = std::sqrt(target * (1.0 - target) / static_cast<double>(n));
            REQUIRE(std::abs(joint(i, j) - target) <= 3.0 * sigma);
        }
    }
}
