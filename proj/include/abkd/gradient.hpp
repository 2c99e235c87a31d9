#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "abkd/divergence.hpp"
#include "abkd/error.hpp"
#include "abkd/prob.hpp"

namespace abkd {

// Gradients of one divergence at (p, q): with respect to the distribution
// entries q(k) and with respect to the logits behind q. Logit gradients sum
// to zero (softmax shift invariance).
struct GradResult {
    std::vector<double> wrt_probs;
    std::vector<double> wrt_logits;
    DivergenceSpec spec;
};

namespace detail {

// Chain a d/dq(k) gradient through the softmax Jacobian:
//   d/df_y = q(y) * (g(y) - sum_k q(k) g(k)).
// Any per-entry constant in g cancels here.
inline std::vector<double> chain_probs_to_logits(const Simplex& q, const std::vector<double>& g) {
    const std::size_t c = q.size();
    double weighted = 0.0;
    for (std::size_t k = 0; k < c; ++k) weighted += q[k] * g[k];
    std::vector<double> out(c);
    for (std::size_t y = 0; y < c; ++y) out[y] = q[y] * (g[y] - weighted);
    return out;
}

inline void check_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) throw OverflowError("gradient overflowed");
    }
}

} // namespace detail

// d FKLD / d f_y = q(y) - p(y).
inline std::vector<double> fkld_grad_logits(const Simplex& p, const Simplex& q) {
    detail::require_same_dimension(p, q);
    std::vector<double> out(p.size());
    for (std::size_t y = 0; y < p.size(); ++y) out[y] = q[y] - p[y];
    return out;
}

// d RKLD / d f_y = -q(y) (ln(p(y)/q(y)) + KL(q||p)).
inline std::vector<double> rkld_grad_logits(const Simplex& p, const Simplex& q) {
    detail::require_same_dimension(p, q);
    const double kl_qp = rkld(p, q);
    std::vector<double> out(p.size());
    for (std::size_t y = 0; y < p.size(); ++y) {
        out[y] = -q[y] * (std::log(p[y] / q[y]) + kl_qp);
    }
    return out;
}

// d D_AB / d q(k) = -q(k)^(a+b-1) * ((p(k)/q(k))^a - 1)/a,
// with the a -> 0 limit -q(k)^(b-1) * ln(p(k)/q(k)).
inline std::vector<double> ab_grad_probs(const Simplex& p, const Simplex& q, double alpha,
                                         double beta) {
    detail::require_same_dimension(p, q);
    const std::size_t c = p.size();
    std::vector<double> out(c);
    if (std::fabs(alpha) < kBranchTolerance) {
        for (std::size_t k = 0; k < c; ++k) {
            out[k] = -detail::checked_pow(q[k], beta - 1.0) * std::log(p[k] / q[k]);
        }
    } else {
        for (std::size_t k = 0; k < c; ++k) {
            const double weight = detail::checked_pow(q[k], alpha + beta - 1.0);
            const double zoom = (detail::checked_pow(p[k] / q[k], alpha) - 1.0) / alpha;
            out[k] = -weight * zoom;
        }
    }
    detail::check_finite(out);
    return out;
}

// d D_AB / d f_y = -[ q(y)^b s(y) - q(y) sum_k q(k)^b s(k) ]
// where s(k) = (p(k)^a - q(k)^a)/a, or ln(p(k)/q(k)) as a -> 0.
// The exact FKLD/RKLD corners reuse the dedicated closed forms so that the
// alpha-beta parameterization and the named families agree bit-for-bit.
inline std::vector<double> ab_grad_logits(const Simplex& p, const Simplex& q, double alpha,
                                          double beta) {
    detail::require_same_dimension(p, q);
    const bool a0 = std::fabs(alpha) < kBranchTolerance;
    const bool a1 = std::fabs(alpha - 1.0) < kBranchTolerance;
    const bool b0 = std::fabs(beta) < kBranchTolerance;
    const bool b1 = std::fabs(beta - 1.0) < kBranchTolerance;
    if (a1 && b0) return fkld_grad_logits(p, q);
    if (a0 && b1) return rkld_grad_logits(p, q);

    const std::size_t c = p.size();
    std::vector<double> s(c);
    if (a0) {
        for (std::size_t k = 0; k < c; ++k) s[k] = std::log(p[k] / q[k]);
    } else {
        for (std::size_t k = 0; k < c; ++k) {
            s[k] = (detail::checked_pow(p[k], alpha) - detail::checked_pow(q[k], alpha)) / alpha;
        }
    }
    double weighted = 0.0;
    std::vector<double> qb(c);
    for (std::size_t k = 0; k < c; ++k) {
        qb[k] = detail::checked_pow(q[k], beta);
        weighted += qb[k] * s[k];
    }
    std::vector<double> out(c);
    for (std::size_t y = 0; y < c; ++y) {
        out[y] = -(qb[y] * s[y] - q[y] * weighted);
    }
    detail::check_finite(out);
    return out;
}

// Logit gradients of the composite baselines (FKLD, RKLD, WSD, JSD).
// The WSD gradient follows by linearity; the JSD gradient chains
// d/dq(k) = 0.5 ln(q(k)/m(k)) through the softmax Jacobian.
inline std::vector<double> baseline_grad_logits(const Simplex& p, const Simplex& q,
                                                const DivergenceSpec& spec) {
    detail::require_same_dimension(p, q);
    switch (spec.family) {
        case Family::FKLD:
            return fkld_grad_logits(p, q);
        case Family::RKLD:
            return rkld_grad_logits(p, q);
        case Family::WSD: {
            if (spec.wsd_forward_weight < 0.0 || spec.wsd_reverse_weight < 0.0 ||
                (spec.wsd_forward_weight == 0.0 && spec.wsd_reverse_weight == 0.0)) {
                throw ParameterError("wsd weights must be non-negative and not both zero");
            }
            const auto gf = fkld_grad_logits(p, q);
            const auto gr = rkld_grad_logits(p, q);
            std::vector<double> out(p.size());
            for (std::size_t y = 0; y < p.size(); ++y) {
                out[y] = spec.wsd_forward_weight * gf[y] + spec.wsd_reverse_weight * gr[y];
            }
            return out;
        }
        case Family::JSD: {
            std::vector<double> g(p.size());
            for (std::size_t k = 0; k < p.size(); ++k) {
                const double m = 0.5 * (p[k] + q[k]);
                g[k] = 0.5 * std::log(q[k] / m);
            }
            return detail::chain_probs_to_logits(q, g);
        }
        default:
            throw ParameterError("baseline_grad_logits supports fkld/rkld/wsd/jsd only");
    }
}

// d/dq(k) for every family (unconstrained representation; families that are
// equal on the simplex may differ off it by a per-entry constant, which the
// softmax chain rule cancels).
inline std::vector<double> grad_probs(const DivergenceSpec& spec, const Simplex& p,
                                      const Simplex& q) {
    detail::require_same_dimension(p, q);
    const std::size_t c = p.size();
    switch (spec.family) {
        case Family::FKLD: {
            std::vector<double> g(c);
            for (std::size_t k = 0; k < c; ++k) g[k] = -p[k] / q[k];
            return g;
        }
        case Family::RKLD: {
            std::vector<double> g(c);
            for (std::size_t k = 0; k < c; ++k) g[k] = std::log(q[k] / p[k]) + 1.0;
            return g;
        }
        case Family::AlphaDiv: {
            if (std::fabs(spec.alpha) < kBranchTolerance ||
                std::fabs(spec.alpha - 1.0) < kBranchTolerance) {
                throw ParameterError("alpha divergence gradient undefined at alpha in {0,1}");
            }
            std::vector<double> g(c);
            for (std::size_t k = 0; k < c; ++k) {
                g[k] = -detail::checked_pow(p[k] / q[k], spec.alpha) / spec.alpha;
            }
            return g;
        }
        case Family::WSD: {
            std::vector<double> g(c);
            for (std::size_t k = 0; k < c; ++k) {
                g[k] = spec.wsd_forward_weight * (-p[k] / q[k]) +
                       spec.wsd_reverse_weight * (std::log(q[k] / p[k]) + 1.0);
            }
            return g;
        }
        case Family::JSD: {
            std::vector<double> g(c);
            for (std::size_t k = 0; k < c; ++k) {
                g[k] = 0.5 * std::log(q[k] / (0.5 * (p[k] + q[k])));
            }
            return g;
        }
        default: {
            const auto [a, b] = effective_alpha_beta(spec);
            return ab_grad_probs(p, q, a, b);
        }
    }
}

// d/df_y for every family.
inline std::vector<double> grad_logits(const DivergenceSpec& spec, const Simplex& p,
                                       const Simplex& q) {
    switch (spec.family) {
        case Family::FKLD:
        case Family::RKLD:
        case Family::WSD:
        case Family::JSD:
            return baseline_grad_logits(p, q, spec);
        default: {
            const auto [a, b] = effective_alpha_beta(spec);
            return ab_grad_logits(p, q, a, b);
        }
    }
}

inline GradResult make_grad_result(const DivergenceSpec& spec, const Simplex& p,
                                   const Simplex& q) {
    return GradResult{grad_probs(spec, p, q), grad_logits(spec, p, q), spec};
}

// Independent oracle: central finite differences of D(p, softmax(f)) along
// each logit coordinate. Kept free of the closed-form code paths above.
inline std::vector<double> fd_grad_logits(const Simplex& p, const Logits& f,
                                          const DivergenceSpec& spec, double h = 1e-5) {
    if (!(h >= 1e-7 && h <= 1e-3)) {
        throw ParameterError("finite-difference step must lie in [1e-7, 1e-3]");
    }
    if (p.size() != f.size()) {
        throw InputError("dimension mismatch between p and logits");
    }
    std::vector<double> out(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
        Logits fp = f;
        Logits fm = f;
        fp.values[k] += h;
        fm.values[k] -= h;
        const double dp = evaluate(spec, p, softmax(fp));
        const double dm = evaluate(spec, p, softmax(fm));
        out[k] = (dp - dm) / (2.0 * h);
    }
    return out;
}

} // namespace abkd
