#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "hst/error.hpp"

namespace hst {

// Dense row-major tensor of doubles. Rank is 1..3 in practice:
// {n} parameter vectors, {H,W} maps, {C,H,W} feature maps, {B,T,C} token
// batches. Value semantics throughout; sizes are desk-scale.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(numel_of(shape), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> data) : shape(std::move(s)), v(std::move(data)) {}

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) n *= static_cast<std::size_t>(d);
        return n;
    }

    std::size_t numel() const { return v.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    double& operator()(int i) { return v[static_cast<std::size_t>(i)]; }
    double operator()(int i) const { return v[static_cast<std::size_t>(i)]; }
    double& operator()(int i, int j) {
        return v[static_cast<std::size_t>(i) * shape[1] + j];
    }
    double operator()(int i, int j) const {
        return v[static_cast<std::size_t>(i) * shape[1] + j];
    }
    double& operator()(int i, int j, int k) {
        return v[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    double operator()(int i, int j, int k) const {
        return v[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    double& operator()(int i, int j, int k, int l) {
        return v[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    double operator()(int i, int j, int k, int l) const {
        return v[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    Tensor reshaped(std::vector<int> s) const {
        require(numel_of(s) == numel(), errc::invalid_argument, "reshape changes element count");
        return Tensor(std::move(s), v);
    }
};

inline Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

inline Tensor full(std::vector<int> s, double value) {
    Tensor t(std::move(s));
    for (double& x : t.v) x = value;
    return t;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    require(a.same_shape(b), errc::dimension_mismatch, what);
}

}  // namespace hst
