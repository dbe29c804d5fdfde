#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "hamp/errors.hpp"
#include "hamp/matrix.hpp"

namespace hamp {

// Value + gradient buffer for the reverse-mode engine. Rank 1 or 2; rank-1
// tensors broadcast as row vectors where an op allows it. Double precision
// throughout: the finite-difference checks need the headroom.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad; // sized lazily by ensure_grad()
    bool requires_grad = false;

    Tensor() = default;

    static Tensor zeros(std::initializer_list<std::size_t> s) {
        Tensor t;
        t.shape.assign(s);
        t.value.assign(t.numel(), 0.0);
        return t;
    }
    static Tensor zeros(const std::vector<std::size_t>& s) {
        Tensor t;
        t.shape = s;
        t.value.assign(t.numel(), 0.0);
        return t;
    }
    static Tensor from_matrix(const MatView& m) {
        Tensor t;
        t.shape = {m.rows, m.cols};
        t.value.assign(m.data, m.data + m.rows * m.cols);
        return t;
    }
    static Tensor scalar(double v) {
        Tensor t;
        t.shape = {1};
        t.value = {v};
        return t;
    }

    std::size_t numel() const {
        std::size_t n = 1;
        for (std::size_t s : shape) n *= s;
        return shape.empty() ? 0 : n;
    }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return rank() == 2 ? shape[0] : 1; }
    std::size_t cols() const { return rank() == 2 ? shape[1] : (rank() == 1 ? shape[0] : 0); }

    MatView view() const { return MatView(value.data(), rows(), cols()); }
    Matrix to_matrix() const {
        Matrix m(rows(), cols());
        m.v = value;
        return m;
    }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    }

    std::string shape_string() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + ")";
    }
};

} // namespace hamp
