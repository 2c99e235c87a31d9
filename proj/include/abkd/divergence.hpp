#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include "abkd/error.hpp"
#include "abkd/prob.hpp"

namespace abkd {

// Parameters within this distance of a degenerate value (alpha = 0, beta = 0,
// alpha + beta = 0) are routed to the corresponding limit branch; the generic
// closed form loses all precision as alpha*beta -> 0.
inline constexpr double kBranchTolerance = 1e-8;

// Intermediates beyond this are treated as overflow rather than silently
// saturating to inf: deterministic, testable failure.
inline constexpr double kOverflowCap = 1e300;

enum class Family {
    AlphaBeta,
    FKLD,
    RKLD,
    AlphaDiv,
    BetaDiv,
    Hellinger,
    SquaredEuclidean,
    WSD,
    JSD,
};

inline const char* to_string(Family f) {
    switch (f) {
        case Family::AlphaBeta: return "ab";
        case Family::FKLD: return "fkld";
        case Family::RKLD: return "rkld";
        case Family::AlphaDiv: return "alpha";
        case Family::BetaDiv: return "beta";
        case Family::Hellinger: return "hellinger";
        case Family::SquaredEuclidean: return "sqeuclid";
        case Family::WSD: return "wsd";
        case Family::JSD: return "jsd";
    }
    return "?";
}

inline Family family_from_string(std::string_view s) {
    if (s == "ab" || s == "alphabeta" || s == "alpha-beta") return Family::AlphaBeta;
    if (s == "fkld" || s == "kl") return Family::FKLD;
    if (s == "rkld") return Family::RKLD;
    if (s == "alpha" || s == "alpha-div") return Family::AlphaDiv;
    if (s == "beta" || s == "beta-div") return Family::BetaDiv;
    if (s == "hellinger") return Family::Hellinger;
    if (s == "sqeuclid" || s == "sed") return Family::SquaredEuclidean;
    if (s == "wsd") return Family::WSD;
    if (s == "jsd") return Family::JSD;
    throw ParameterError("unknown divergence family: " + std::string(s));
}

// Selects one divergence plus its parameters. alpha/beta are read only by the
// parametric families; the WSD weights only by WSD.
struct DivergenceSpec {
    Family family = Family::AlphaBeta;
    double alpha = 1.0;
    double beta = 0.0;
    double wsd_forward_weight = 0.5;
    double wsd_reverse_weight = 0.5;

    static DivergenceSpec alpha_beta(double a, double b) { return {Family::AlphaBeta, a, b, 0.0, 0.0}; }
    static DivergenceSpec fkld() { return {Family::FKLD, 1.0, 0.0, 0.0, 0.0}; }
    static DivergenceSpec rkld() { return {Family::RKLD, 0.0, 1.0, 0.0, 0.0}; }
    static DivergenceSpec alpha_div(double a) { return {Family::AlphaDiv, a, 1.0 - a, 0.0, 0.0}; }
    static DivergenceSpec wsd(double wf, double wr) { return {Family::WSD, 0.0, 0.0, wf, wr}; }
    static DivergenceSpec jsd() { return {Family::JSD, 0.0, 0.0, 0.0, 0.0}; }
};

namespace detail {

inline double checked_pow(double base, double exponent) {
    const double v = std::pow(base, exponent);
    if (!std::isfinite(v) || std::fabs(v) > kOverflowCap) {
        throw OverflowError("power overflow: pow(" + std::to_string(base) + ", " +
                            std::to_string(exponent) + ")");
    }
    return v;
}

// x^e - 1 evaluated as expm1(e ln x); exact cancellation of the leading 1
// keeps the generic branch stable as alpha*beta -> 0.
inline double checked_powm1(double base, double exponent) {
    const double v = std::expm1(exponent * std::log(base));
    if (!std::isfinite(v) || std::fabs(v) > kOverflowCap) {
        throw OverflowError("power overflow: pow(" + std::to_string(base) + ", " +
                            std::to_string(exponent) + ") - 1");
    }
    return v;
}

inline void require_same_dimension(const Simplex& p, const Simplex& q) {
    if (p.size() != q.size()) {
        throw InputError("dimension mismatch: " + std::to_string(p.size()) + " vs " +
                         std::to_string(q.size()));
    }
}

inline void check_finite_result(double v) {
    if (!std::isfinite(v) || std::fabs(v) > kOverflowCap) {
        throw OverflowError("divergence evaluation overflowed");
    }
}

} // namespace detail

// Forward KL: sum_k p(k) ln(p(k)/q(k)).
inline double fkld(const Simplex& p, const Simplex& q) {
    detail::require_same_dimension(p, q);
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        acc += p[k] * std::log(p[k] / q[k]);
    }
    detail::check_finite_result(acc);
    return acc;
}

// Reverse KL: sum_k q(k) ln(q(k)/p(k)).
inline double rkld(const Simplex& p, const Simplex& q) {
    detail::require_same_dimension(p, q);
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        acc += q[k] * std::log(q[k] / p[k]);
    }
    detail::check_finite_result(acc);
    return acc;
}

// Two-parameter alpha-beta divergence, continuously extended over all of
// (alpha, beta) via five branches:
//   (i)   generic:        -(1/ab) sum [p^a q^b - a/(a+b) p^(a+b) - b/(a+b) q^(a+b)]
//   (ii)  beta = 0:        (1/a^2) sum [p^a (ln p^a - ln q^a) - p^a + q^a]
//   (iii) alpha = -beta:   (1/a^2) sum [ln q^a - ln p^a + (p/q)^a - 1]
//   (iv)  alpha = 0:       (1/b^2) sum [q^b (ln q^b - ln p^b) - q^b + p^b]
//   (v)   alpha = beta = 0: (1/2) sum (ln p - ln q)^2
// The exact FKLD/RKLD corners are routed to the plain KL sums so that the
// named families and their alpha-beta parameterizations agree bit-for-bit.
inline double ab_divergence(const Simplex& p, const Simplex& q, double alpha, double beta) {
    detail::require_same_dimension(p, q);
    const bool a0 = std::fabs(alpha) < kBranchTolerance;
    const bool b0 = std::fabs(beta) < kBranchTolerance;
    const bool ab0 = std::fabs(alpha + beta) < kBranchTolerance;

    if (a0 && b0) {
        double acc = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double d = std::log(p[k]) - std::log(q[k]);
            acc += 0.5 * d * d;
        }
        detail::check_finite_result(acc);
        return acc;
    }
    // The x^e - 1 differences below go through expm1 so the limit branches
    // stay accurate when the surviving parameter is itself small.
    if (a0) {
        if (std::fabs(beta - 1.0) < kBranchTolerance) return rkld(p, q);
        double acc = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double qb = 1.0 + detail::checked_powm1(q[k], beta);
            const double diff = detail::checked_powm1(p[k], beta) - detail::checked_powm1(q[k], beta);
            acc += qb * beta * (std::log(q[k]) - std::log(p[k])) + diff;
        }
        acc /= beta * beta;
        detail::check_finite_result(acc);
        return acc;
    }
    if (b0) {
        if (std::fabs(alpha - 1.0) < kBranchTolerance) return fkld(p, q);
        double acc = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double pa = 1.0 + detail::checked_powm1(p[k], alpha);
            const double diff = detail::checked_powm1(q[k], alpha) - detail::checked_powm1(p[k], alpha);
            acc += pa * alpha * (std::log(p[k]) - std::log(q[k])) + diff;
        }
        acc /= alpha * alpha;
        detail::check_finite_result(acc);
        return acc;
    }
    if (ab0) {
        double acc = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            acc += alpha * (std::log(q[k]) - std::log(p[k])) +
                   detail::checked_powm1(p[k] / q[k], alpha);
        }
        acc /= alpha * alpha;
        detail::check_finite_result(acc);
        return acc;
    }

    // Generic branch. Using p^(a+b) = p^a p^b and q^(a+b) = q^a q^b, the
    // summand regroups exactly into
    //   p^a (q^b - p^b) + (b/s) (p^s - q^s),        s = a + b,
    // whose two pieces are both O(b) — or, mirrored,
    //   q^b (p^a - q^a) + (a/s) (q^s - p^s),
    // with pieces O(a). Picking the form that isolates the smaller parameter
    // keeps full relative precision as a*b -> 0, where the naive three-power
    // sum cancels catastrophically against the 1/(a*b) prefactor.
    const double apb = alpha + beta;
    double acc = 0.0;
    if (std::fabs(beta) <= std::fabs(alpha)) {
        const double w1 = beta / apb;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double pa = 1.0 + detail::checked_powm1(p[k], alpha);
            const double d1 = detail::checked_powm1(q[k], beta) - detail::checked_powm1(p[k], beta);
            const double d2 =
                detail::checked_powm1(p[k], apb) - detail::checked_powm1(q[k], apb);
            acc += pa * d1 + w1 * d2;
        }
    } else {
        const double w2 = alpha / apb;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double qb = 1.0 + detail::checked_powm1(q[k], beta);
            const double e1 =
                detail::checked_powm1(p[k], alpha) - detail::checked_powm1(q[k], alpha);
            const double e2 =
                detail::checked_powm1(q[k], apb) - detail::checked_powm1(p[k], apb);
            acc += qb * e1 + w2 * e2;
        }
    }
    acc *= -1.0 / (alpha * beta);
    detail::check_finite_result(acc);
    return acc;
}

// One-parameter alpha divergence: (1/(a(a-1))) [sum p^a q^(1-a) - 1].
// The a -> 1 / a -> 0 limits are FKLD / RKLD; callers wanting those should
// use them directly.
inline double alpha_divergence(const Simplex& p, const Simplex& q, double alpha) {
    detail::require_same_dimension(p, q);
    if (std::fabs(alpha) < kBranchTolerance) {
        throw ParameterError("alpha divergence undefined at alpha=0; use rkld");
    }
    if (std::fabs(alpha - 1.0) < kBranchTolerance) {
        throw ParameterError("alpha divergence undefined at alpha=1; use fkld");
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        acc += detail::checked_pow(p[k], alpha) * detail::checked_pow(q[k], 1.0 - alpha);
    }
    const double v = (acc - 1.0) / (alpha * (alpha - 1.0));
    detail::check_finite_result(v);
    return v;
}

// Weighted sum of forward and reverse KL.
inline double wsd(const Simplex& p, const Simplex& q, double w_forward, double w_reverse) {
    if (w_forward < 0.0 || w_reverse < 0.0) {
        throw ParameterError("wsd weights must be non-negative");
    }
    if (w_forward == 0.0 && w_reverse == 0.0) {
        throw ParameterError("wsd weights must not both be zero");
    }
    return w_forward * fkld(p, q) + w_reverse * rkld(p, q);
}

// Jensen-Shannon divergence through m = (p + q)/2; bounded by ln 2.
inline double jsd(const Simplex& p, const Simplex& q) {
    detail::require_same_dimension(p, q);
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double m = 0.5 * (p[k] + q[k]);
        acc += 0.5 * p[k] * std::log(p[k] / m) + 0.5 * q[k] * std::log(q[k] / m);
    }
    detail::check_finite_result(acc);
    return acc;
}

// The (alpha, beta) pair a family occupies inside the alpha-beta plane.
// WSD/JSD are composites without such a point and are rejected.
inline std::pair<double, double> effective_alpha_beta(const DivergenceSpec& spec) {
    switch (spec.family) {
        case Family::AlphaBeta: return {spec.alpha, spec.beta};
        case Family::FKLD: return {1.0, 0.0};
        case Family::RKLD: return {0.0, 1.0};
        case Family::AlphaDiv: return {spec.alpha, 1.0 - spec.alpha};
        case Family::BetaDiv: return {1.0, spec.beta};
        case Family::Hellinger: return {0.5, 0.5};
        case Family::SquaredEuclidean: return {1.0, 1.0};
        case Family::WSD:
        case Family::JSD:
            throw ParameterError("family has no single (alpha, beta) point");
    }
    throw ParameterError("unknown family");
}

// Evaluate whichever divergence the spec selects.
inline double evaluate(const DivergenceSpec& spec, const Simplex& p, const Simplex& q) {
    switch (spec.family) {
        case Family::AlphaBeta: return ab_divergence(p, q, spec.alpha, spec.beta);
        case Family::FKLD: return fkld(p, q);
        case Family::RKLD: return rkld(p, q);
        case Family::AlphaDiv: return alpha_divergence(p, q, spec.alpha);
        case Family::BetaDiv: return ab_divergence(p, q, 1.0, spec.beta);
        case Family::Hellinger: return ab_divergence(p, q, 0.5, 0.5);
        case Family::SquaredEuclidean: return ab_divergence(p, q, 1.0, 1.0);
        case Family::WSD: return wsd(p, q, spec.wsd_forward_weight, spec.wsd_reverse_weight);
        case Family::JSD: return jsd(p, q);
    }
    throw ParameterError("unknown family");
}

} // namespace abkd
