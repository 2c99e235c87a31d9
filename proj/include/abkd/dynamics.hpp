#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "abkd/divergence.hpp"
#include "abkd/error.hpp"
#include "abkd/gradient.hpp"
#include "abkd/prob.hpp"
#include "abkd/rng.hpp"

namespace abkd {

// Everything observable about one gradient step on the logits:
//   log_r(y)   = ln(q_after(y) / q_before(y))
//   normalizer = class-independent term with log_r(y) = -eta*grad(y) + normalizer
//   bound_rhs  = per-class upper bound on |log_r(y)| (triangle inequality on
//                the per-family bound decomposition)
struct StepTrace {
    Simplex q_before;
    Simplex q_after;
    double eta = 0.0;
    std::vector<double> log_r;
    std::vector<double> grad;
    double normalizer = 0.0;
    std::vector<double> bound_rhs;
    DivergenceSpec spec;
};

namespace detail {

// Per-class |gradient| decomposition used by the log-mass-ratio bounds:
//   FKLD:  |p(y) - q(y)|
//   RKLD:  q(y) (|ln p(y) - ln q(y)| + sum_k q(k) |ln p(k) - ln q(k)|)
//   (a,b)-parametric: q(y)^b |s(y)| + q(y) sum_k q(k)^b |s(k)|,
//                     s(k) = (p(k)^a - q(k)^a)/a  (ln(p/q) as a -> 0)
//   WSD:   weighted sum of the FKLD and RKLD terms
//   JSD:   |grad(y)| itself (no sharper decomposition available)
inline std::vector<double> bound_core(const DivergenceSpec& spec, const Simplex& p,
                                      const Simplex& q, const std::vector<double>& grad) {
    const std::size_t c = p.size();
    std::vector<double> core(c, 0.0);
    switch (spec.family) {
        case Family::FKLD: {
            for (std::size_t y = 0; y < c; ++y) core[y] = std::fabs(p[y] - q[y]);
            return core;
        }
        case Family::RKLD: {
            double sum = 0.0;
            for (std::size_t k = 0; k < c; ++k) sum += q[k] * std::fabs(std::log(p[k] / q[k]));
            for (std::size_t y = 0; y < c; ++y) {
                core[y] = q[y] * (std::fabs(std::log(p[y] / q[y])) + sum);
            }
            return core;
        }
        case Family::WSD: {
            DivergenceSpec f = DivergenceSpec::fkld();
            DivergenceSpec r = DivergenceSpec::rkld();
            const auto cf = bound_core(f, p, q, grad);
            const auto cr = bound_core(r, p, q, grad);
            for (std::size_t y = 0; y < c; ++y) {
                core[y] = spec.wsd_forward_weight * cf[y] + spec.wsd_reverse_weight * cr[y];
            }
            return core;
        }
        case Family::JSD: {
            for (std::size_t y = 0; y < c; ++y) core[y] = std::fabs(grad[y]);
            return core;
        }
        default: {
            const auto [a, b] = effective_alpha_beta(spec);
            std::vector<double> s(c);
            if (std::fabs(a) < kBranchTolerance) {
                for (std::size_t k = 0; k < c; ++k) s[k] = std::log(p[k] / q[k]);
            } else {
                for (std::size_t k = 0; k < c; ++k) {
                    s[k] = (checked_pow(p[k], a) - checked_pow(q[k], a)) / a;
                }
            }
            double sum = 0.0;
            std::vector<double> qb(c);
            for (std::size_t k = 0; k < c; ++k) {
                qb[k] = checked_pow(q[k], b);
                sum += qb[k] * std::fabs(s[k]);
            }
            for (std::size_t y = 0; y < c; ++y) {
                core[y] = qb[y] * std::fabs(s[y]) + q[y] * sum;
            }
            return core;
        }
    }
}

} // namespace detail

// Perform one gradient-descent step on the logits and trace the resulting
// probability-mass movement.
inline StepTrace step(const Simplex& p, const Logits& f, const DivergenceSpec& spec, double eta) {
    if (!(eta > 0.0)) throw ParameterError("step size eta must be positive");
    if (p.size() != f.size()) throw InputError("dimension mismatch between p and logits");

    Simplex q_before = softmax(f);
    std::vector<double> grad = grad_logits(spec, p, q_before);

    Logits f_next = f;
    for (std::size_t k = 0; k < f.size(); ++k) f_next.values[k] -= eta * grad[k];
    f_next.step = f.step + 1;
    Simplex q_after = softmax(f_next);

    const std::size_t c = p.size();
    std::vector<double> log_r(c);
    for (std::size_t y = 0; y < c; ++y) log_r[y] = std::log(q_after[y] / q_before[y]);

    // normalizer = -ln sum_k q(k) exp(-eta grad(k)); identical for every class.
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += q_before[k] * std::exp(-eta * grad[k]);
    const double normalizer = -std::log(z);

    const auto core = detail::bound_core(spec, p, q_before, grad);
    std::vector<double> bound_rhs(c);
    const double abs_n = std::fabs(normalizer);
    for (std::size_t y = 0; y < c; ++y) bound_rhs[y] = eta * core[y] + abs_n;

    return StepTrace{std::move(q_before), std::move(q_after), eta,      std::move(log_r),
                     std::move(grad),     normalizer,         std::move(bound_rhs), spec};
}

// Difference of log mass ratios across two classes; the normalizer cancels.
inline double delta(const StepTrace& trace, std::size_t y1, std::size_t y2) {
    const std::size_t c = trace.log_r.size();
    if (y1 >= c || y2 >= c) throw InputError("class index out of range");
    if (y1 == y2) throw InputError("delta requires two distinct classes");
    return trace.log_r[y1] - trace.log_r[y2];
}

// Largest violation of |log_r(y)| <= bound_rhs(y); sound traces stay <= ~1e-10.
inline double bound_check(const StepTrace& trace) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < trace.log_r.size(); ++y) {
        worst = std::max(worst, std::fabs(trace.log_r[y]) - trace.bound_rhs[y]);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Randomized verification of the mass-allocation theorems.
// ---------------------------------------------------------------------------

// T32: four-case comparison of RKLD vs FKLD single-step mass movement.
// T43: alpha/beta monotonicity of the two-parameter family (3 cases).
// TF:  four-case alpha monotonicity of the coupled one-parameter family.
enum class TheoremCase {
    T32Case1,
    T32Case2,
    T32Case3,
    T32Case4,
    T43Case1,
    T43Case2,
    T43Case3,
    TFCase1,
    TFCase2,
    TFCase3,
    TFCase4,
};

inline const char* to_string(TheoremCase c) {
    switch (c) {
        case TheoremCase::T32Case1: return "t32-case1";
        case TheoremCase::T32Case2: return "t32-case2";
        case TheoremCase::T32Case3: return "t32-case3";
        case TheoremCase::T32Case4: return "t32-case4";
        case TheoremCase::T43Case1: return "t43-case1";
        case TheoremCase::T43Case2: return "t43-case2";
        case TheoremCase::T43Case3: return "t43-case3";
        case TheoremCase::TFCase1: return "tf-case1";
        case TheoremCase::TFCase2: return "tf-case2";
        case TheoremCase::TFCase3: return "tf-case3";
        case TheoremCase::TFCase4: return "tf-case4";
    }
    return "?";
}

inline TheoremCase theorem_case_from_string(std::string_view s) {
    const std::pair<std::string_view, TheoremCase> table[] = {
        {"t32-case1", TheoremCase::T32Case1}, {"t32-case2", TheoremCase::T32Case2},
        {"t32-case3", TheoremCase::T32Case3}, {"t32-case4", TheoremCase::T32Case4},
        {"t3-case1", TheoremCase::T32Case1},  {"t3-case2", TheoremCase::T32Case2},
        {"t3-case3", TheoremCase::T32Case3},  {"t3-case4", TheoremCase::T32Case4},
        {"t43-case1", TheoremCase::T43Case1}, {"t43-case2", TheoremCase::T43Case2},
        {"t43-case3", TheoremCase::T43Case3}, {"tf-case1", TheoremCase::TFCase1},
        {"tf-case2", TheoremCase::TFCase2},   {"tf-case3", TheoremCase::TFCase3},
        {"tf-case4", TheoremCase::TFCase4},
    };
    for (const auto& [name, id] : table) {
        if (s == name) return id;
    }
    throw ParameterError("unknown theorem case: " + std::string(s));
}

inline std::vector<TheoremCase> all_theorem_cases() {
    return {TheoremCase::T32Case1, TheoremCase::T32Case2, TheoremCase::T32Case3,
            TheoremCase::T32Case4, TheoremCase::T43Case1, TheoremCase::T43Case2,
            TheoremCase::T43Case3, TheoremCase::TFCase1,  TheoremCase::TFCase2,
            TheoremCase::TFCase3,  TheoremCase::TFCase4};
}

// Constants instantiating the theorems' "appropriate positive constants".
// They satisfy every sampled hypothesis for n_classes in {3, 5, 10}.
struct SamplerConfig {
    std::size_t n_classes = 5;
    double delta1 = 0.2;  // lower bound on equal q entries (case-1 hypotheses)
    double delta2 = 0.05; // headroom below 1 for q entries
    double zeta = 0.05;   // minimum separation between compared entries
    double c0 = 1.2;      // underestimation ratio threshold (> 1)
    double c1 = 0.8;      // overestimation ratio threshold (< 1)
    double eta = 0.1;     // step size used for the Delta comparisons
    std::size_t max_attempts = 100000; // rejection-sampling cap per instance
};

// First failing instance, archived for reproduction.
struct TheoremWitness {
    std::vector<double> p;
    std::vector<double> q;
    std::size_t y1 = 0;
    std::size_t y2 = 0;
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double beta = 0.0;
    double delta_lhs = 0.0;
    double delta_rhs = 0.0;
    std::uint64_t instance = 0;
};

struct TheoremReport {
    TheoremCase theorem_id = TheoremCase::T32Case1;
    std::size_t instances_tested = 0;
    std::size_t violations = 0;
    std::optional<TheoremWitness> witness;
};

namespace detail {

struct TheoremInstance {
    Simplex p;
    Simplex q;
    std::size_t y1 = 0;
    std::size_t y2 = 0;
    double alpha1 = 0.0; // unused entries stay 0 (T32 cases compare families, not alphas)
    double alpha2 = 0.0;
    double beta = 0.0;
    double delta_lhs = 0.0;
    double delta_rhs = 0.0;

    TheoremInstance(Simplex pp, Simplex qq) : p(std::move(pp)), q(std::move(qq)) {}
};

// ln-mean of two positive numbers: (a - b) / (ln a - ln b).
inline double log_mean(double a, double b) {
    if (a == b) return a;
    return (a - b) / (std::log(a) - std::log(b));
}

// Mean-value point c of t ln t on (q2, q1): 1 + ln c = (q1 ln q1 - q2 ln q2)/(q1 - q2).
inline double tlnt_mean_point(double q1, double q2) {
    return std::exp((q1 * std::log(q1) - q2 * std::log(q2)) / (q1 - q2) - 1.0);
}

// Scatter (v1, v2, rest...) into a full C-vector with v1 at y1, v2 at y2 and
// the remaining mass spread over the other classes.
inline std::vector<double> scatter(std::size_t c, std::size_t y1, std::size_t y2, double v1,
                                   double v2, const std::vector<double>& rest_weights,
                                   double rest_mass) {
    std::vector<double> out(c, 0.0);
    out[y1] = v1;
    out[y2] = v2;
    std::size_t r = 0;
    for (std::size_t k = 0; k < c; ++k) {
        if (k == y1 || k == y2) continue;
        out[k] = rest_weights[r++] * rest_mass;
    }
    return out;
}

inline TheoremInstance sample_instance(TheoremCase id, const SamplerConfig& cfg, Rng& rng) {
    const std::size_t c = cfg.n_classes;
    if (c < 3) throw ConfigError("theorem samplers need at least 3 classes");
    if (!(cfg.delta1 > 0.0 && cfg.delta1 < 0.45 && cfg.zeta > 0.0 && cfg.c0 > 1.0 &&
          cfg.c1 < 1.0 && cfg.c1 > 0.0 && cfg.delta2 > 0.0)) {
        throw ConfigError("sampler constants violate the theorem hypotheses");
    }
    constexpr double kMinEntry = 0.002;

    for (std::size_t attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        std::size_t y1 = static_cast<std::size_t>(rng.uniform_index(c));
        std::size_t y2 = static_cast<std::size_t>(rng.uniform_index(c));
        if (y1 == y2) continue;
        const auto rest_p = rng.dirichlet(c - 2);
        const auto rest_q = rng.dirichlet(c - 2);

        switch (id) {
            case TheoremCase::T32Case1:
            case TheoremCase::T43Case1:
            case TheoremCase::TFCase1: {
                // delta1 < q(y1) = q(y2) <= p(y1), p(y1) >= p(y2) + zeta.
                const double qx = rng.uniform(cfg.delta1 * 1.000001, 0.45);
                const double p1 = rng.uniform(qx, 0.9);
                if (p1 - cfg.zeta <= kMinEntry) continue;
                const double p2 = rng.uniform(kMinEntry, p1 - cfg.zeta);
                const double rest_pm = 1.0 - p1 - p2;
                const double rest_qm = 1.0 - 2.0 * qx;
                if (rest_pm < kMinEntry * static_cast<double>(c - 2)) continue;
                if (rest_qm < kMinEntry * static_cast<double>(c - 2)) continue;
                if (id == TheoremCase::T32Case1) {
                    // The comparison holds when q(y1) clears the ln-mean of
                    // the two p entries; sample inside that regime.
                    if (!(qx > log_mean(p1, p2) * (1.0 + 1e-9))) continue;
                }
                if (id == TheoremCase::TFCase1) {
                    // Coupled-family monotonicity needs the alpha=1 endpoint
                    // slope non-positive: p1(ln(p1/qx)-1) <= p2(ln(p2/qx)-1).
                    const double g = p1 * (std::log(p1 / qx) - 1.0) -
                                     p2 * (std::log(p2 / qx) - 1.0);
                    if (!(g <= 0.0)) continue;
                }
                TheoremInstance inst(
                    Simplex::from_raw(scatter(c, y1, y2, p1, p2, rest_p, rest_pm)),
                    Simplex::from_raw(scatter(c, y1, y2, qx, qx, rest_q, rest_qm)));
                inst.y1 = y1;
                inst.y2 = y2;
                return inst;
            }
            case TheoremCase::T32Case2:
            case TheoremCase::T43Case2:
            case TheoremCase::TFCase2: {
                // p(y1) < q(y1) = q(y2) <= 1 - delta2, p(y1) >= p(y2) + zeta.
                const double q_hi = std::min(0.45, 1.0 - cfg.delta2);
                const double q_lo = cfg.zeta + 2.0 * kMinEntry;
                if (q_lo >= q_hi) continue;
                const double qx = rng.uniform(q_lo, q_hi);
                const double p1 = rng.uniform(cfg.zeta + 1.5 * kMinEntry, qx * 0.999);
                const double p2 = rng.uniform(kMinEntry, p1 - cfg.zeta);
                const double rest_pm = 1.0 - p1 - p2;
                const double rest_qm = 1.0 - 2.0 * qx;
                if (rest_pm < kMinEntry * static_cast<double>(c - 2)) continue;
                if (rest_qm < kMinEntry * static_cast<double>(c - 2)) continue;
                TheoremInstance inst(
                    Simplex::from_raw(scatter(c, y1, y2, p1, p2, rest_p, rest_pm)),
                    Simplex::from_raw(scatter(c, y1, y2, qx, qx, rest_q, rest_qm)));
                inst.y1 = y1;
                inst.y2 = y2;
                return inst;
            }
            case TheoremCase::T32Case3:
            case TheoremCase::TFCase3: {
                // q(y2) + zeta <= q(y1) <= 1 - delta2, p(y1) = p(y2) > c0 q(y1).
                const double q1 = rng.uniform(cfg.zeta + 0.012, 0.38);
                const double q2 = rng.uniform(0.01, q1 - cfg.zeta);
                const double pv_max = (1.0 - kMinEntry * static_cast<double>(c - 2)) / 2.0;
                const double pv_min = cfg.c0 * q1 * (1.0 + 1e-9);
                if (pv_min >= pv_max) continue;
                const double pv = rng.uniform(pv_min, pv_max);
                const double rest_pm = 1.0 - 2.0 * pv;
                const double rest_qm = 1.0 - q1 - q2;
                if (rest_qm < kMinEntry * static_cast<double>(c - 2)) continue;
                TheoremInstance inst(
                    Simplex::from_raw(scatter(c, y1, y2, pv, pv, rest_p, rest_pm)),
                    Simplex::from_raw(scatter(c, y1, y2, q1, q2, rest_q, rest_qm)));
                inst.y1 = y1;
                inst.y2 = y2;
                return inst;
            }
            case TheoremCase::T32Case4:
            case TheoremCase::TFCase4: {
                // q(y2) + zeta <= q(y1) <= 1 - delta2,
                // c0 q(y2) < p(y1) = p(y2) < c1 q(y1), p drawn from the upper
                // half of its window plus the proof-side floor below.
                const double q1 = rng.uniform(0.15, std::min(0.45, 1.0 - cfg.delta2));
                const double q2_hi = std::min(q1 - cfg.zeta, q1 * cfg.c1 / cfg.c0 * 0.98);
                if (q2_hi <= 0.01) continue;
                const double q2 = rng.uniform(0.01, q2_hi);
                const double lo = cfg.c0 * q2;
                const double hi = cfg.c1 * q1;
                if (lo >= hi) continue;
                double pv_floor = 0.5 * (lo + hi); // upper half of the window
                if (id == TheoremCase::TFCase4) {
                    // h'(alpha) < 0 needs p above the weighted geometric mean
                    // of (q1, q2) with weights q^((1-alpha)/2), for all alpha.
                    double c_max = 0.0;
                    for (int g = 0; g <= 20; ++g) {
                        const double a = g / 20.0;
                        const double w1 = std::pow(q1, 0.5 * (1.0 - a));
                        const double w2 = std::pow(q2, 0.5 * (1.0 - a));
                        const double ca =
                            std::exp((w1 * std::log(q1) + w2 * std::log(q2)) / (w1 + w2));
                        c_max = std::max(c_max, ca);
                    }
                    pv_floor = std::max(pv_floor, c_max * (1.0 + 1e-9));
                }
                if (pv_floor >= hi) continue;
                const double pv = rng.uniform(pv_floor, hi);
                const double rest_pm = 1.0 - 2.0 * pv;
                const double rest_qm = 1.0 - q1 - q2;
                if (rest_pm < kMinEntry * static_cast<double>(c - 2)) continue;
                if (rest_qm < kMinEntry * static_cast<double>(c - 2)) continue;
                TheoremInstance inst(
                    Simplex::from_raw(scatter(c, y1, y2, pv, pv, rest_p, rest_pm)),
                    Simplex::from_raw(scatter(c, y1, y2, q1, q2, rest_q, rest_qm)));
                inst.y1 = y1;
                inst.y2 = y2;
                if (id == TheoremCase::T32Case4) {
                    // Exact discriminant of the comparison: Delta_r - Delta_f
                    // = eta (q1 - q2) [ln(p / c) + KL(q||p)] with c the
                    // mean-value point of t ln t on (q2, q1); the sampler
                    // keeps it positive.
                    const double disc = std::log(pv / tlnt_mean_point(q1, q2)) +
                                        rkld(inst.p, inst.q);
                    if (!(disc > 1e-9)) continue;
                }
                return inst;
            }
            case TheoremCase::T43Case3: {
                // Pure weighting-term ordering check; only q and two betas.
                auto q = rng.dirichlet(c);
                TheoremInstance inst(Simplex::from_raw(q), Simplex::from_raw(q));
                inst.y1 = y1;
                inst.y2 = y2;
                return inst;
            }
        }
    }
    throw ConfigError(std::string("sampler for ") + to_string(id) +
                      " exhausted attempts; constraints unsatisfiable");
}

// Delta across two classes from the exact logit-gradient formulas; the
// normalizer cancels exactly in the difference.
inline double delta_from_grad(const std::vector<double>& grad, double eta, std::size_t y1,
                              std::size_t y2) {
    return -eta * (grad[y1] - grad[y2]);
}

// Check one instance; returns true when the asserted inequality HOLDS.
inline bool check_instance(TheoremCase id, const SamplerConfig& cfg, TheoremInstance& inst,
                           Rng& rng) {
    constexpr double kSlack = 1e-12;
    switch (id) {
        case TheoremCase::T32Case1:
        case TheoremCase::T32Case2:
        case TheoremCase::T32Case3:
        case TheoremCase::T32Case4: {
            const auto gf = fkld_grad_logits(inst.p, inst.q);
            const auto gr = rkld_grad_logits(inst.p, inst.q);
            inst.delta_rhs = delta_from_grad(gf, cfg.eta, inst.y1, inst.y2);
            inst.delta_lhs = delta_from_grad(gr, cfg.eta, inst.y1, inst.y2);
            return inst.delta_lhs - inst.delta_rhs > -kSlack;
        }
        case TheoremCase::T43Case1:
        case TheoremCase::T43Case2: {
            double a1 = rng.uniform();
            double a2 = rng.uniform();
            if (a1 > a2) std::swap(a1, a2);
            const double b = rng.uniform();
            inst.alpha1 = a1;
            inst.alpha2 = a2;
            inst.beta = b;
            const auto g1 = ab_grad_logits(inst.p, inst.q, a1, b);
            const auto g2 = ab_grad_logits(inst.p, inst.q, a2, b);
            inst.delta_lhs = delta_from_grad(g1, cfg.eta, inst.y1, inst.y2);
            inst.delta_rhs = delta_from_grad(g2, cfg.eta, inst.y1, inst.y2);
            return inst.delta_lhs - inst.delta_rhs > -kSlack;
        }
        case TheoremCase::T43Case3: {
            // Larger beta must weight high-confidence classes relatively more:
            // q(i) < q(j) implies q(i)^(b2-b1) <= q(j)^(b2-b1).
            double b1 = rng.uniform();
            double b2 = rng.uniform();
            if (b1 > b2) std::swap(b1, b2);
            inst.alpha1 = b1;
            inst.alpha2 = b2;
            const auto& q = inst.q;
            for (std::size_t i = 0; i < q.size(); ++i) {
                for (std::size_t j = 0; j < q.size(); ++j) {
                    if (q[i] < q[j] &&
                        std::pow(q[i], b2 - b1) > std::pow(q[j], b2 - b1) + kSlack) {
                        return false;
                    }
                }
            }
            return true;
        }
        case TheoremCase::TFCase1:
        case TheoremCase::TFCase2:
        case TheoremCase::TFCase3:
        case TheoremCase::TFCase4: {
            double a1 = rng.uniform();
            double a2 = rng.uniform();
            if (a1 > a2) std::swap(a1, a2);
            inst.alpha1 = a1;
            inst.alpha2 = a2;
            const auto g1 = ab_grad_logits(inst.p, inst.q, a1, 1.0 - a1);
            const auto g2 = ab_grad_logits(inst.p, inst.q, a2, 1.0 - a2);
            inst.delta_lhs = delta_from_grad(g1, cfg.eta, inst.y1, inst.y2);
            inst.delta_rhs = delta_from_grad(g2, cfg.eta, inst.y1, inst.y2);
            return inst.delta_lhs - inst.delta_rhs > -kSlack;
        }
    }
    return true;
}

} // namespace detail

// Draw n constrained instances and count violations of the case's asserted
// inequality. Instances are seeded per index, so results do not depend on the
// worker count; shards merge by summing counts and keeping the witness with
// the smallest instance index.
inline TheoremReport verify_theorem(TheoremCase id, const SamplerConfig& cfg,
                                    std::size_t n_instances, std::uint64_t seed,
                                    unsigned workers = 1) {
    if (n_instances == 0) throw ConfigError("n_instances must be positive");
    workers = std::max(1u, workers);
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n_instances));

    struct Shard {
        std::size_t violations = 0;
        std::optional<TheoremWitness> witness;
    };
    std::vector<Shard> shards(workers);
    std::vector<std::string> shard_errors(workers);

    auto run_range = [&](unsigned w, std::size_t begin, std::size_t end) {
        try {
            for (std::size_t i = begin; i < end; ++i) {
                Rng rng = Rng::derive(seed, i);
                auto inst = detail::sample_instance(id, cfg, rng);
                if (!detail::check_instance(id, cfg, inst, rng)) {
                    ++shards[w].violations;
                    if (!shards[w].witness) {
                        TheoremWitness wit;
                        wit.p = inst.p.probs();
                        wit.q = inst.q.probs();
                        wit.y1 = inst.y1;
                        wit.y2 = inst.y2;
                        wit.alpha1 = inst.alpha1;
                        wit.alpha2 = inst.alpha2;
                        wit.beta = inst.beta;
                        wit.delta_lhs = inst.delta_lhs;
                        wit.delta_rhs = inst.delta_rhs;
                        wit.instance = i;
                        shards[w].witness = std::move(wit);
                    }
                }
            }
        } catch (const std::exception& e) {
            shard_errors[w] = e.what();
        }
    };

    if (workers == 1) {
        run_range(0, 0, n_instances);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n_instances + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t b = w * chunk;
            const std::size_t e = std::min(n_instances, b + chunk);
            if (b >= e) break;
            pool.emplace_back(run_range, w, b, e);
        }
        for (auto& t : pool) t.join();
    }
    for (const auto& msg : shard_errors) {
        if (!msg.empty()) throw ConfigError(msg);
    }

    TheoremReport report;
    report.theorem_id = id;
    report.instances_tested = n_instances;
    for (const auto& s : shards) {
        report.violations += s.violations;
        if (s.witness && (!report.witness || s.witness->instance < report.witness->instance)) {
            report.witness = s.witness;
        }
    }
    return report;
}

} // namespace abkd
