#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dbforge/core.hpp"
#include "dbforge/matrix.hpp"

namespace dbforge::diag {

// Brute-force recomputations of the closed-form quantities. The
// arithmetic here is deliberately written from scratch and never
// calls into the code under test.
struct OracleCheck {
    std::string name;
    double max_abs_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct OracleReport {
    std::vector<OracleCheck> checks;
    bool all_pass() const;
};

// Recomputes J, P, q, W, w from the raw counts with explicit loops and
// compares against the core pipeline. Tolerance 1e-12.
OracleReport oracle_weights(const core::ConfusionMatrix& m);

// Double-loop mutual information versus core::mutual_information.
OracleReport oracle_mi(const Matrix& joint);

// Chi-square goodness of fit of empirical draw frequencies against the
// target probabilities; passes at significance 1e-3.
struct ChiSquareResult {
    double statistic = 0.0;
    std::int64_t dof = 0;
    double p_value = 0.0;
    bool pass = false;
};

ChiSquareResult oracle_sampler(std::span<const double> weights, std::int64_t draws,
                               std::uint64_t seed);
ChiSquareResult chi_square_gof(std::span<const std::int64_t> observed,
                               std::span<const double> probabilities);

// Regularized upper incomplete gamma Q(a, x); exposed for tests.
double gamma_q(double a, double x);

} // namespace dbforge::diag
