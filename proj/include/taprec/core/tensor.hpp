#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "taprec/core/errors.hpp"

namespace taprec {

// Dense 4-D tensor (N, C, H, W) of doubles, row-major contiguous. Vectors and
// matrices use trailing singleton dims, e.g. logits are (N, 2, 1, 1). Double
// precision throughout: the finite-difference gradient contracts in the test
// suite are not attainable in float.
class Tensor {
public:
    Tensor() = default;

    Tensor(int n, int c, int h, int w) : n_(n), c_(c), h_(h), w_(w) {
        if (n < 0 || c < 0 || h < 0 || w < 0)
            throw DimensionError("tensor dims must be non-negative");
        v_.assign(static_cast<size_t>(n) * c * h * w, 0.0);
    }

    static Tensor zeros(int n, int c, int h, int w) { return Tensor(n, c, h, w); }

    static Tensor full(int n, int c, int h, int w, double value) {
        Tensor t(n, c, h, w);
        t.v_.assign(t.v_.size(), value);
        return t;
    }

    static Tensor scalar(double value) { return full(1, 1, 1, 1, value); }

    int n() const { return n_; }
    int c() const { return c_; }
    int h() const { return h_; }
    int w() const { return w_; }
    size_t numel() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    double& operator[](size_t i) { return v_[i]; }
    double operator[](size_t i) const { return v_[i]; }

    double& at(int n, int c, int h, int w) { return v_[index(n, c, h, w)]; }
    double at(int n, int c, int h, int w) const { return v_[index(n, c, h, w)]; }

    size_t index(int n, int c, int h, int w) const {
        return ((static_cast<size_t>(n) * c_ + c) * h_ + h) * w_ + w;
    }

    // Reinterprets the buffer with a new shape of identical element count.
    Tensor reshaped(int n, int c, int h, int w) const {
        Tensor t = *this;
        if (static_cast<size_t>(n) * c * h * w != v_.size())
            throw DimensionError("reshape: element count mismatch (" + shape_str() + " -> " +
                                 Tensor(0, 0, 0, 0).dims_str(n, c, h, w) + ")");
        t.n_ = n;
        t.c_ = c;
        t.h_ = h;
        t.w_ = w;
        return t;
    }

    bool same_shape(const Tensor& o) const {
        return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
    }

    std::string shape_str() const { return dims_str(n_, c_, h_, w_); }

    double item() const {
        if (v_.size() != 1) throw DimensionError("item(): tensor is not scalar, shape " + shape_str());
        return v_[0];
    }

    void fill(double value) { v_.assign(v_.size(), value); }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    const std::vector<double>& vec() const { return v_; }
    std::vector<double>& vec() { return v_; }

private:
    std::string dims_str(int n, int c, int h, int w) const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }

    int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<double> v_;
};

}  // namespace taprec
