#pragma once

#include <cstdint>
#include <vector>

namespace dbforge {

// Dense row-major matrix of doubles. Small value type shared by the
// probability algebra (C x C tables) and the classifiers.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

    double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

    double sum() const {
        double s = 0.0;
        for (double v : data) s += v;
        return s;
    }

    bool operator==(const Matrix&) const = default;
};

} // namespace dbforge
