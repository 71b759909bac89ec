#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "g4ds/core/rng.hpp"

namespace g4ds {

/// Dense row-major tensor of doubles. Rank is dynamic (<= 4 in practice).
/// Layout conventions are documented per operation: matrices are {rows, cols},
/// images are {H, W, C} ("hwc") and convolution activations {C, H, W} ("chw").
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        assert(data_.size() == count(shape_));
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::size_t> shape, double v) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = v;
        return t;
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor randn(std::vector<std::size_t> shape, Rng& rng, double stddev = 1.0) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = stddev * rng.normal();
        return t;
    }

    static Tensor rand_uniform(std::vector<std::size_t> shape, Rng& rng, double lo, double hi) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = rng.uniform(lo, hi);
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    double item() const {
        assert(numel() == 1);
        return data_[0];
    }

    /// Same data, new shape (element count must match).
    Tensor reshaped(std::vector<std::size_t> shape) const {
        if (count(shape) != numel()) throw std::invalid_argument("reshape: element count mismatch");
        return Tensor(std::move(shape), data_);
    }

    void fill(double v) {
        for (double& x : data_) x = v;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double x : data_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double x : data_) m = std::max(m, std::abs(x));
        return m;
    }

    double max_abs_diff(const Tensor& o) const {
        assert(same_shape(o));
        double m = 0.0;
        for (std::size_t i = 0; i < data_.size(); ++i) m = std::max(m, std::abs(data_[i] - o.data_[i]));
        return m;
    }

    std::string shape_str() const {
        std::string s = "{";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + "}";
    }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

} // namespace g4ds
