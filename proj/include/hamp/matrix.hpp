#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "hamp/errors.hpp"

namespace hamp {

// Dense row-major matrix of doubles. This is the plain numeric workhorse for
// the simulation paths and the metrics; the autodiff engine has its own
// Tensor type that exposes the same layout through MatView.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), v(r * c, fill) {}

    double& at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
    double* row(std::size_t i) { return v.data() + i * cols; }
    const double* row(std::size_t i) const { return v.data() + i * cols; }
    std::size_t size() const { return v.size(); }

    bool same_shape(const Matrix& o) const {
        return rows == o.rows && cols == o.cols;
    }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

// Non-owning read-only view over any row-major block of doubles.
struct MatView {
    const double* data = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;

    MatView() = default;
    MatView(const double* d, std::size_t r, std::size_t c)
        : data(d), rows(r), cols(c) {}
    MatView(const Matrix& m) : data(m.v.data()), rows(m.rows), cols(m.cols) {}

    const double* row(std::size_t i) const { return data + i * cols; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

inline std::string shape_str(std::size_t r, std::size_t c) {
    return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}

inline void require_same_shape(const Matrix& a, const Matrix& b,
                               const char* where) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(where) + ": shape mismatch " +
                         shape_str(a.rows, a.cols) + " vs " +
                         shape_str(b.rows, b.cols));
}

} // namespace hamp
