#include "dbforge/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dbforge/error.hpp"

namespace dbforge::core {

namespace {

void check_labels(std::span<const int> values, int classes, const char* what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] < 0 || values[i] >= classes) {
            throw ValidationError(std::string(what) + " out of range at index " + std::to_string(i) +
                                  ": " + std::to_string(values[i]) + " not in [0, " +
                                  std::to_string(classes) + ")");
        }
    }
}

} // namespace

ConfusionMatrix build_confusion(std::span<const int> bias, std::span<const int> labels, int classes) {
    if (classes < 2) throw ValidationError("confusion matrix needs at least 2 classes");
    if (bias.size() != labels.size()) {
        throw ValidationError("bias and class label lists differ in length");
    }
    if (bias.empty()) throw ValidationError("empty input: no samples to count");
    check_labels(bias, classes, "bias label");
    check_labels(labels, classes, "class label");

    ConfusionMatrix m;
    m.classes = classes;
    m.counts.assign(static_cast<std::size_t>(classes) * classes, 0);
    m.total = static_cast<std::int64_t>(bias.size());
    for (std::size_t k = 0; k < bias.size(); ++k) {
        ++m.at(bias[k], labels[k]);
    }
    return m;
}

ConfusionMatrix build_confusion(std::span<const ModeAssignment> modes, int classes) {
    std::vector<int> bias(modes.size());
    std::vector<int> labels(modes.size());
    for (std::size_t k = 0; k < modes.size(); ++k) {
        bias[k] = modes[k].bias;
        labels[k] = modes[k].label;
    }
    return build_confusion(bias, labels, classes);
}

bool ModeStatistics::has_empty_class() const {
    return std::find(empty_class.begin(), empty_class.end(), true) != empty_class.end();
}

ModeStatistics estimate_statistics(const ConfusionMatrix& m) {
    if (m.total < 1) throw ValidationError("confusion matrix holds no samples");
    const int c = m.classes;
    ModeStatistics st;
    st.classes = c;
    st.joint = Matrix(c, c);
    st.conditional = Matrix(c, c);
    st.bias_marginal.assign(c, 0.0);
    st.class_prior.assign(c, 0.0);
    st.empty_class.assign(c, false);

    const double n = static_cast<double>(m.total);
    for (int i = 0; i < c; ++i) {
        for (int j = 0; j < c; ++j) {
            st.joint(i, j) = static_cast<double>(m.at(i, j)) / n;
        }
    }
    for (int j = 0; j < c; ++j) {
        double col = 0.0;
        for (int i = 0; i < c; ++i) col += st.joint(i, j);
        st.class_prior[j] = col;
        if (col == 0.0) {
            st.empty_class[j] = true; // column left all-zero, excluded from matching
            continue;
        }
        for (int i = 0; i < c; ++i) st.conditional(i, j) = st.joint(i, j) / col;
    }
    for (int i = 0; i < c; ++i) {
        double row = 0.0;
        for (int j = 0; j < c; ++j) row += st.joint(i, j);
        st.bias_marginal[i] = row;
    }
    return st;
}

bool WeightTable::all_matchable() const {
    return std::find(matchable.begin(), matchable.end(), false) == matchable.end();
}

bool WeightTable::any_empty_mode() const {
    return std::find(empty_mode.begin(), empty_mode.end(), true) != empty_mode.end();
}

WeightTable compute_weights(const ModeStatistics& stats, const ConfusionMatrix& m) {
    if (stats.classes != m.classes) throw ValidationError("statistics and confusion matrix disagree on class count");
    const int c = stats.classes;
    WeightTable wt;
    wt.classes = c;
    wt.mode_weight = Matrix(c, c);
    wt.sample_weight = Matrix(c, c);
    wt.empty_mode.assign(static_cast<std::size_t>(c) * c, false);
    wt.matchable.assign(c, true);

    for (int j = 0; j < c; ++j) {
        for (int i = 0; i < c; ++i) {
            const std::int64_t count = m.at(i, j);
            if (count == 0) {
                wt.empty_mode[static_cast<std::size_t>(i) * c + j] = true;
                if (stats.bias_marginal[i] > 0.0) wt.matchable[j] = false;
                continue; // W = w = 0 for empty modes
            }
            const double w = stats.bias_marginal[i] / stats.conditional(i, j);
            wt.mode_weight(i, j) = w;
            wt.sample_weight(i, j) = w / static_cast<double>(count);
        }
    }
    return wt;
}

Matrix reweighted_joint(const ModeStatistics& stats, const WeightTable& wt) {
    if (stats.classes != wt.classes) throw ValidationError("statistics and weight table disagree on class count");
    const int c = stats.classes;
    Matrix out(c, c);
    double total = 0.0;
    for (int i = 0; i < c; ++i) {
        for (int j = 0; j < c; ++j) {
            out(i, j) = wt.mode_weight(i, j) * stats.joint(i, j);
            total += out(i, j);
        }
    }
    if (total <= 0.0) throw ValidationError("degenerate weights: W ⊙ J sums to zero");
    for (double& v : out.data) v /= total;
    return out;
}

double mutual_information(const Matrix& joint) {
    if (joint.rows < 1 || joint.cols < 1) throw ValidationError("empty joint table");
    double total = 0.0;
    for (double v : joint.data) {
        if (v < 0.0) throw ValidationError("joint table has a negative entry: not a distribution");
        total += v;
    }
    if (total <= 0.0) throw ValidationError("joint table sums to zero: not a distribution");

    std::vector<double> row(joint.rows, 0.0);
    std::vector<double> col(joint.cols, 0.0);
    for (int i = 0; i < joint.rows; ++i) {
        for (int j = 0; j < joint.cols; ++j) {
            const double p = joint(i, j) / total;
            row[i] += p;
            col[j] += p;
        }
    }
    double mi = 0.0;
    for (int i = 0; i < joint.rows; ++i) {
        for (int j = 0; j < joint.cols; ++j) {
            const double p = joint(i, j) / total;
            if (p > 0.0) mi += p * std::log(p / (row[i] * col[j]));
        }
    }
    return std::max(mi, 0.0); // clamp fp residue; MI is nonnegative
}

std::vector<double> matching_residuals(const ModeStatistics& stats, const WeightTable& wt) {
    const int c = stats.classes;
    std::vector<double> res(c, 0.0);
    for (int j = 0; j < c; ++j) {
        double worst = 0.0;
        for (int i = 0; i < c; ++i) {
            const double matched = wt.mode_weight(i, j) * stats.conditional(i, j);
            worst = std::max(worst, std::abs(matched - stats.bias_marginal[i]));
        }
        res[j] = worst;
    }
    return res;
}

std::vector<double> per_sample_weights(const WeightTable& wt, std::span<const ModeAssignment> modes) {
    std::vector<double> out(modes.size(), 0.0);
    for (std::size_t k = 0; k < modes.size(); ++k) {
        const auto& m = modes[k];
        if (m.bias < 0 || m.bias >= wt.classes || m.label < 0 || m.label >= wt.classes) {
            throw ValidationError("mode assignment out of range at index " + std::to_string(k));
        }
        out[k] = wt.sample_weight(m.bias, m.label);
    }
    return out;
}

std::vector<double> per_sample_weights(const WeightTable& wt, std::span<const int> bias,
                                       std::span<const int> labels) {
    if (bias.size() != labels.size()) throw ValidationError("bias and class label lists differ in length");
    std::vector<ModeAssignment> modes(bias.size());
    for (std::size_t k = 0; k < bias.size(); ++k) modes[k] = {bias[k], labels[k]};
    return per_sample_weights(wt, modes);
}

} // namespace dbforge::core
