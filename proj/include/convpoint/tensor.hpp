#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "convpoint/errors.hpp"
#include "convpoint/rng.hpp"

namespace convpoint {

// Dense row-major tensor of doubles.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        v.assign(count(shape), 0.0);
    }

    Tensor(std::initializer_list<std::size_t> s)
        : Tensor(std::vector<std::size_t>(s)) {}

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto e : s) n *= e;
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

    static Tensor filled(std::vector<std::size_t> s, double x) {
        Tensor t(std::move(s));
        for (auto& e : t.v) e = x;
        return t;
    }

    static Tensor uniform(std::vector<std::size_t> s, double lo, double hi, Rng& rng) {
        Tensor t(std::move(s));
        for (auto& e : t.v) e = rng.uniform(lo, hi);
        return t;
    }

    static Tensor normal(std::vector<std::size_t> s, double stddev, Rng& rng) {
        Tensor t(std::move(s));
        for (auto& e : t.v) e = stddev * rng.normal();
        return t;
    }

    std::size_t size() const { return v.size(); }
    std::size_t extent(std::size_t i) const { return shape[i]; }
    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    double& at2(std::size_t i, std::size_t j) { return v[i * shape[1] + j]; }
    double at2(std::size_t i, std::size_t j) const { return v[i * shape[1] + j]; }

    void fill(double x) {
        for (auto& e : v) e = x;
    }

    bool all_finite() const {
        for (double e : v)
            if (!std::isfinite(e)) return false;
        return true;
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// Trainable value with an accumulated gradient of identical shape.
struct Parameter {
    Tensor value;
    Tensor grad;
    bool trainable = true;

    Parameter() = default;
    explicit Parameter(Tensor t) : value(std::move(t)), grad(Tensor::zeros(value.shape)) {}

    void zero_grad() { grad.fill(0.0); }
    std::size_t size() const { return value.size(); }
};

} // namespace convpoint
