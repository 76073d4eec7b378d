#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dbforge/matrix.hpp"

namespace dbforge::core {

// One sample's mode: predicted bias label s and class label y. Bias
// labels share the class label space, so both live in [0, C).
struct ModeAssignment {
    int bias = 0;
    int label = 0;
    bool operator==(const ModeAssignment&) const = default;
};

// Hard confusion matrix over modes. Rows are bias labels, columns are
// class labels; counts sum to the sample total.
struct ConfusionMatrix {
    int classes = 0;
    std::vector<std::int64_t> counts; // row-major C x C
    std::int64_t total = 0;

    std::int64_t at(int s, int y) const { return counts[static_cast<std::size_t>(s) * classes + y]; }
    std::int64_t& at(int s, int y) { return counts[static_cast<std::size_t>(s) * classes + y]; }
};

ConfusionMatrix build_confusion(std::span<const int> bias, std::span<const int> labels, int classes);
ConfusionMatrix build_confusion(std::span<const ModeAssignment> modes, int classes);

// Joint, class-conditional and marginal distributions read off a
// confusion matrix. Columns of `conditional` sum to one where the
// class is nonempty; empty classes keep an all-zero column and are
// excluded from matching.
struct ModeStatistics {
    int classes = 0;
    Matrix joint;                      // J = M / N
    Matrix conditional;                // P, column-stochastic per nonempty class
    std::vector<double> bias_marginal; // q, row sums of J
    std::vector<double> class_prior;   // column sums of J
    std::vector<bool> empty_class;

    bool has_empty_class() const;
};

ModeStatistics estimate_statistics(const ConfusionMatrix& m);

// Mode-level multipliers W = q / P and per-sample weights w = W / M.
// Empty modes keep W = w = 0; a class column is flagged unmatchable
// when P places no mass where q does, which makes exact matching for
// that column impossible.
struct WeightTable {
    int classes = 0;
    Matrix mode_weight;            // W
    Matrix sample_weight;          // w
    std::vector<bool> empty_mode;  // row-major C x C
    std::vector<bool> matchable;   // per class column

    bool all_matchable() const;
    bool any_empty_mode() const;
};

WeightTable compute_weights(const ModeStatistics& stats, const ConfusionMatrix& m);

// normalize(W ⊙ J). With every mode nonempty this equals the outer
// product of the bias marginal and the class prior, whose mutual
// information is zero.
Matrix reweighted_joint(const ModeStatistics& stats, const WeightTable& wt);

// Discrete mutual information of a joint table, in nats. Entries must
// be nonnegative; the table is renormalized internally.
double mutual_information(const Matrix& joint);

// Largest residual ‖W[:,j] ⊙ P[:,j] − q‖∞ per class column. Zero (to
// rounding) for matchable columns; reported for the rest.
std::vector<double> matching_residuals(const ModeStatistics& stats, const WeightTable& wt);

std::vector<double> per_sample_weights(const WeightTable& wt, std::span<const ModeAssignment> modes);
std::vector<double> per_sample_weights(const WeightTable& wt, std::span<const int> bias,
                                       std::span<const int> labels);

} // namespace dbforge::core
