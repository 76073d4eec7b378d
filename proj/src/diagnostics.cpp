#include "dbforge/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "dbforge/error.hpp"
#include "dbforge/nn.hpp"

namespace dbforge::diag {

bool OracleReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const OracleCheck& c) { return c.pass; });
}

namespace {

OracleCheck make_check(std::string name, double err, double tol) {
    return {std::move(name), err, tol, err <= tol};
}

} // namespace

OracleReport oracle_weights(const core::ConfusionMatrix& m) {
    constexpr double tol = 1e-12;
    const int c = m.classes;
    const double n = static_cast<double>(m.total);

    // Straight-line recomputation from the raw counts.
    std::vector<std::vector<double>> joint(c, std::vector<double>(c, 0.0));
    for (int i = 0; i < c; ++i) {
        for (int j = 0; j < c; ++j) {
            joint[i][j] = static_cast<double>(m.at(i, j)) / n;
        }
    }
    std::vector<double> colsum(c, 0.0);
    std::vector<double> rowsum(c, 0.0);
    for (int j = 0; j < c; ++j) {
        for (int i = 0; i < c; ++i) colsum[j] += joint[i][j];
    }
    for (int i = 0; i < c; ++i) {
        for (int j = 0; j < c; ++j) rowsum[i] += joint[i][j];
    }
    std::vector<std::vector<double>> cond(c, std::vector<double>(c, 0.0));
    for (int j = 0; j < c; ++j) {
        if (colsum[j] == 0.0) continue;
        for (int i = 0; i < c; ++i) cond[i][j] = joint[i][j] / colsum[j];
    }
    std::vector<std::vector<double>> mode_w(c, std::vector<double>(c, 0.0));
    std::vector<std::vector<double>> sample_w(c, std::vector<double>(c, 0.0));
    for (int i = 0; i < c; ++i) {
        for (int j = 0; j < c; ++j) {
            if (m.at(i, j) == 0) continue; // zero-weight convention for empty modes
            mode_w[i][j] = rowsum[i] / cond[i][j];
            sample_w[i][j] = mode_w[i][j] / static_cast<double>(m.at(i, j));
        }
    }

    const auto stats = core::estimate_statistics(m);
    const auto table = core::compute_weights(stats, m);

    double err_j = 0.0, err_p = 0.0, err_q = 0.0, err_prior = 0.0, err_w = 0.0, err_sw = 0.0;
    for (int i = 0; i < c; ++i) {
        err_q = std::max(err_q, std::abs(rowsum[i] - stats.bias_marginal[i]));
        err_prior = std::max(err_prior, std::abs(colsum[i] - stats.class_prior[i]));
        for (int j = 0; j < c; ++j) {
            err_j = std::max(err_j, std::abs(joint[i][j] - stats.joint(i, j)));
            err_p = std::max(err_p, std::abs(cond[i][j] - stats.conditional(i, j)));
            err_w = std::max(err_w, std::abs(mode_w[i][j] - table.mode_weight(i, j)));
            err_sw = std::max(err_sw, std::abs(sample_w[i][j] - table.sample_weight(i, j)));
        }
    }

    OracleReport report;
    report.checks.push_back(make_check("joint", err_j, tol));
    report.checks.push_back(make_check("conditional", err_p, tol));
    report.checks.push_back(make_check("bias_marginal", err_q, tol));
    report.checks.push_back(make_check("class_prior", err_prior, tol));
    report.checks.push_back(make_check("mode_weight", err_w, tol));
    report.checks.push_back(make_check("sample_weight", err_sw, tol));
    return report;
}

OracleReport oracle_mi(const Matrix& joint) {
    constexpr double tol = 1e-12;
    double total = 0.0;
    for (int i = 0; i < joint.rows; ++i) {
        for (int j = 0; j < joint.cols; ++j) total += joint(i, j);
    }
    std::vector<double> row(joint.rows, 0.0);
    std::vector<double> col(joint.cols, 0.0);
    for (int i = 0; i < joint.rows; ++i) {
        for (int j = 0; j < joint.cols; ++j) {
            row[i] += joint(i, j) / total;
            col[j] += joint(i, j) / total;
        }
    }
    double mi = 0.0;
    for (int i = 0; i < joint.rows; ++i) {
        for (int j = 0; j < joint.cols; ++j) {
            const double p = joint(i, j) / total;
            if (p > 0.0) mi += p * std::log(p / (row[i] * col[j]));
        }
    }
    mi = std::max(mi, 0.0);

    OracleReport report;
    report.checks.push_back(
        make_check("mutual_information", std::abs(mi - core::mutual_information(joint)), tol));
    return report;
}

// Regularized incomplete gamma, series + continued fraction split.
double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw ValidationError("gamma_q needs a > 0 and x >= 0");
    if (x == 0.0) return 1.0;

    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        // lower series: P(a, x)
        double term = 1.0 / a;
        double sum = term;
        double ap = a;
        for (int k = 0; k < 500; ++k) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16) break;
        }
        const double p = sum * std::exp(-x + a * std::log(x) - lg);
        return 1.0 - p;
    }
    // Lentz continued fraction for Q(a, x)
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int k = 1; k <= 500; ++k) {
        const double an = -static_cast<double>(k) * (static_cast<double>(k) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - lg);
}

ChiSquareResult chi_square_gof(std::span<const std::int64_t> observed,
                               std::span<const double> probabilities) {
    if (observed.size() != probabilities.size()) {
        throw ValidationError("observed counts and probabilities differ in length");
    }
    std::int64_t total = 0;
    for (const std::int64_t o : observed) total += o;
    if (total < 1) throw ValidationError("no observations");

    ChiSquareResult res;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        const double expected = probabilities[k] * static_cast<double>(total);
        if (expected <= 0.0) continue; // zero-probability cells carry no freedom
        const double diff = static_cast<double>(observed[k]) - expected;
        res.statistic += diff * diff / expected;
        ++res.dof;
    }
    res.dof -= 1;
    if (res.dof < 1) {
        res.p_value = 1.0;
        res.pass = true;
        return res;
    }
    res.p_value = gamma_q(static_cast<double>(res.dof) / 2.0, res.statistic / 2.0);
    res.pass = res.p_value >= 1e-3;
    return res;
}

ChiSquareResult oracle_sampler(std::span<const double> weights, std::int64_t draws,
                               std::uint64_t seed) {
    nn::WeightedSampler sampler({weights.begin(), weights.end()}, seed);
    std::vector<std::int64_t> observed(weights.size(), 0);
    for (std::int64_t k = 0; k < draws; ++k) ++observed[sampler.sample_one()];

    double total = 0.0;
    for (const double w : weights) total += w;
    std::vector<double> probs(weights.size());
    for (std::size_t k = 0; k < weights.size(); ++k) probs[k] = weights[k] / total;
    return chi_square_gof(observed, probs);
}

} // namespace dbforge::diag
