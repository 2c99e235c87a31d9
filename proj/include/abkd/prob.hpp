#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "abkd/error.hpp"

namespace abkd {

// Every simplex entry is clamped to at least this value and renormalized
// before logs or powers are taken; divergence formulas are undefined at
// exact zeros.
inline constexpr double kEpsilonFloor = 1e-12;

// Simplex-sum / row-sum / identity tolerances used across the library.
inline constexpr double kSumTolerance = 1e-12;

namespace detail {

inline std::vector<double> floor_and_renormalize(std::vector<double> v) {
    double sum = 0.0;
    for (auto& x : v) {
        if (x < kEpsilonFloor) x = kEpsilonFloor;
        sum += x;
    }
    for (auto& x : v) x /= sum;
    return v;
}

} // namespace detail

// A dense discrete probability distribution over C >= 2 classes.
// Entries are epsilon-floored and sum to 1 within 1e-12 by construction.
class Simplex {
public:
    // `raw` must contain non-negative entries with a positive sum.
    static Simplex from_raw(std::vector<double> raw) {
        if (raw.size() < 2) {
            throw InputError("simplex needs at least 2 classes, got " + std::to_string(raw.size()));
        }
        double sum = 0.0;
        for (double x : raw) {
            if (!std::isfinite(x) || x < 0.0) {
                throw InputError("simplex entries must be finite and non-negative");
            }
            sum += x;
        }
        if (sum <= 0.0) {
            throw InputError("simplex entries must not all be zero");
        }
        for (auto& x : raw) x /= sum;
        return Simplex(detail::floor_and_renormalize(std::move(raw)));
    }

    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t k) const noexcept { return probs_[k]; }
    const std::vector<double>& probs() const noexcept { return probs_; }

    bool operator==(const Simplex& other) const noexcept { return probs_ == other.probs_; }

private:
    explicit Simplex(std::vector<double> probs) : probs_(std::move(probs)) {}
    std::vector<double> probs_;
};

// Raw pre-softmax scores for one step of gradient descent.
struct Logits {
    std::vector<double> values;
    int step = 0;

    Logits(std::vector<double> v, int t = 0) : values(std::move(v)), step(t) {
        if (values.size() < 2) {
            throw InputError("logits need at least 2 classes");
        }
        for (double x : values) {
            if (!std::isfinite(x)) throw InputError("logits must be finite");
        }
        if (step < 0) throw InputError("step index must be non-negative");
    }

    std::size_t size() const noexcept { return values.size(); }
};

// Max-stabilized softmax with temperature; entry k ~ exp(f_k / T).
inline Simplex softmax(const Logits& f, double temperature = 1.0) {
    if (!(temperature > 0.0)) {
        throw ParameterError("softmax temperature must be positive");
    }
    const double max_logit = *std::max_element(f.values.begin(), f.values.end());
    std::vector<double> e(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
        e[k] = std::exp((f.values[k] - max_logit) / temperature);
    }
    return Simplex::from_raw(std::move(e));
}

// Normalize non-negative raw scores into a floored Simplex.
inline Simplex normalize(const std::vector<double>& raw) {
    return Simplex::from_raw(raw);
}

// d softmax / d logits: entry (i,j) = q(i)(delta_ij - q(j)).
// Symmetric; every row sums to zero.
inline std::vector<std::vector<double>> softmax_jacobian(const Simplex& q) {
    const std::size_t c = q.size();
    std::vector<std::vector<double>> jac(c, std::vector<double>(c));
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            jac[i][j] = (i == j) ? q[i] * (1.0 - q[i]) : -q[i] * q[j];
        }
    }
    return jac;
}

// -sum_k q(k) ln q(k), with 0*ln(0) read as 0. Value lies in [0, ln C].
inline double shannon_entropy(const Simplex& q) {
    double h = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) {
        if (q[k] > 0.0) h -= q[k] * std::log(q[k]);
    }
    return h < 0.0 ? 0.0 : h;
}

// Entropy of an arbitrary probability row (already normalized); used on
// model outputs where constructing a Simplex per sample would be waste.
inline double shannon_entropy(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h < 0.0 ? 0.0 : h;
}

} // namespace abkd
