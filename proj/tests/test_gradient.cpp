#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "abkd/divergence.hpp"
#include "abkd/gradient.hpp"
#include "abkd/prob.hpp"
#include "abkd/rng.hpp"

using namespace abkd;

namespace {

double l2(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double max_rel_err(const std::vector<double>& closed, const std::vector<double>& fd) {
    double worst = 0.0;
    for (std::size_t k = 0; k < closed.size(); ++k) {
        worst = std::max(worst, std::fabs(closed[k] - fd[k]) / (1.0 + std::fabs(fd[k])));
    }
    return worst;
}

} // namespace

TEST_CASE("gradient with respect to distribution entries") {
    const auto p = normalize({0.9, 0.1});
    const auto q = normalize({0.5, 0.5});

    SUBCASE("entrywise factor at alpha=beta=0.5") {
        const auto g = ab_grad_probs(p, q, 0.5, 0.5);
        // -q^0 ((p/q)^0.5 - 1)/0.5 for entry 0
        const double expected = -(std::sqrt(1.8) - 1.0) / 0.5;
        CHECK(expected == doctest::Approx(-0.683282).epsilon(1e-5));
        CHECK(g[0] == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("vanishes at p = q") {
        for (double a : {0.0, 0.3, 1.0}) {
            for (double b : {0.0, 0.5, 1.0}) {
                const auto g = ab_grad_probs(p, p, a, b);
                for (double v : g) CHECK(std::fabs(v) <= 1e-12);
            }
        }
    }
    SUBCASE("the (1,0) slice matches the plain-KL form up to a constant") {
        // Off the simplex the two gradient representations differ by a
        // per-entry constant, which the softmax chain rule cancels.
        const auto g_ab = ab_grad_probs(p, q, 1.0, 0.0);
        const auto g_kl = grad_probs(DivergenceSpec::fkld(), p, q);
        CHECK(g_kl[0] == doctest::Approx(-p[0] / q[0]).epsilon(1e-12));
        const double c0 = g_ab[0] - g_kl[0];
        const double c1 = g_ab[1] - g_kl[1];
        CHECK(c0 == doctest::Approx(c1).epsilon(1e-12));
    }
    SUBCASE("alpha -> 0 limit uses the log ratio") {
        const auto g = ab_grad_probs(p, q, 0.0, 1.0);
        CHECK(g[0] == doctest::Approx(-std::log(1.8)).epsilon(1e-12));
        CHECK(g[1] == doctest::Approx(-std::log(0.2)).epsilon(1e-12));
    }
}

TEST_CASE("logit gradient closed forms") {
    const auto p = normalize({0.9, 0.1});
    const auto q = normalize({0.5, 0.5});

    SUBCASE("FKLD corner reduces to q - p") {
        const auto g = ab_grad_logits(p, q, 1.0, 0.0);
        CHECK(g[0] == doctest::Approx(-0.4).epsilon(1e-15));
        CHECK(g[1] == doctest::Approx(0.4).epsilon(1e-15));
    }
    SUBCASE("RKLD corner closed form") {
        // oracle: -q(y)(ln(p(y)/q(y)) + KL(q||p))
        const double kl_qp = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
        const double expected0 = -0.5 * (std::log(1.8) + kl_qp);
        CHECK(expected0 == doctest::Approx(-0.549306).epsilon(1e-5));
        const auto g = ab_grad_logits(p, q, 0.0, 1.0);
        CHECK(g[0] == doctest::Approx(expected0).epsilon(1e-12));
        CHECK(g[1] == doctest::Approx(-expected0).epsilon(1e-12));
    }
    SUBCASE("vanishes at p = q") {
        for (double a : {0.0, 0.5, 1.0, 1.5}) {
            for (double b : {0.0, 0.5, 1.0}) {
                const auto g = ab_grad_logits(p, p, a, b);
                for (double v : g) CHECK(std::fabs(v) <= 1e-12);
            }
        }
    }
}

TEST_CASE("reduction identities on random inputs") {
    Rng rng(13);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t c = 2 + rng.uniform_index(9);
        const auto p = Simplex::from_raw(rng.dirichlet(c));
        const auto q = Simplex::from_raw(rng.dirichlet(c));
        const auto g10 = ab_grad_logits(p, q, 1.0, 0.0);
        const auto g01 = ab_grad_logits(p, q, 0.0, 1.0);
        const auto gr = rkld_grad_logits(p, q);
        for (std::size_t k = 0; k < c; ++k) {
            CHECK(std::fabs(g10[k] - (q[k] - p[k])) <= 1e-12);
            CHECK(std::fabs(g01[k] - gr[k]) <= 1e-10);
        }
    }
}

TEST_CASE("logit gradients sum to zero") {
    Rng rng(19);
    const Family families[] = {Family::AlphaBeta, Family::FKLD,    Family::RKLD,
                               Family::AlphaDiv,  Family::BetaDiv, Family::Hellinger,
                               Family::SquaredEuclidean, Family::WSD, Family::JSD};
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t c = 2 + rng.uniform_index(9);
        const auto p = Simplex::from_raw(rng.dirichlet(c));
        const auto q = Simplex::from_raw(rng.dirichlet(c));
        for (Family fam : families) {
            DivergenceSpec spec;
            spec.family = fam;
            spec.alpha = rng.uniform(0.15, 1.5);
            spec.beta = rng.uniform(0.0, 1.5);
            if (fam == Family::AlphaDiv) spec.alpha = rng.uniform(0.15, 0.85);
            spec.wsd_forward_weight = 0.4;
            spec.wsd_reverse_weight = 0.6;
            const auto g = grad_logits(spec, p, q);
            double sum = 0.0;
            for (double v : g) sum += v;
            CHECK(std::fabs(sum) <= 1e-9);
        }
    }
}

TEST_CASE("closed form matches the finite-difference oracle") {
    Rng rng(43);
    double worst = 0.0;
    for (int trial = 0; trial < 250; ++trial) {
        const std::size_t c = 2 + rng.uniform_index(9);
        const auto p = Simplex::from_raw(rng.dirichlet(c));
        std::vector<double> raw(c);
        for (auto& v : raw) v = rng.uniform(-3.0, 3.0);
        const Logits f(raw);
        const auto q = softmax(f);
        DivergenceSpec spec = DivergenceSpec::alpha_beta(rng.uniform(0.1, 1.5),
                                                         rng.uniform(0.0, 1.5));
        const auto closed = ab_grad_logits(p, q, spec.alpha, spec.beta);
        const auto fd = fd_grad_logits(p, f, spec, 1e-5);
        worst = std::max(worst, max_rel_err(closed, fd));
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("finite differences at p = q stay near zero") {
    Rng rng(47);
    std::vector<double> raw{0.3, -0.2, 0.4};
    const Logits f(raw);
    const auto q = softmax(f);
    const auto fd = fd_grad_logits(q, f, DivergenceSpec::alpha_beta(0.7, 0.6), 1e-5);
    for (double v : fd) CHECK(std::fabs(v) <= 1e-8);
}

TEST_CASE("finite differences reproduce q - p for FKLD") {
    Rng rng(53);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t c = 3 + rng.uniform_index(5);
        const auto p = Simplex::from_raw(rng.dirichlet(c));
        std::vector<double> raw(c);
        for (auto& v : raw) v = rng.uniform(-2.0, 2.0);
        const Logits f(raw);
        const auto q = softmax(f);
        const auto fd = fd_grad_logits(p, f, DivergenceSpec::fkld(), 1e-5);
        for (std::size_t k = 0; k < c; ++k) {
            CHECK(std::fabs(fd[k] - (q[k] - p[k])) <= 1e-7);
        }
    }
}

TEST_CASE("fd step size is validated") {
    const auto p = normalize({0.5, 0.5});
    const Logits f(std::vector<double>{0.0, 0.1});
    CHECK_THROWS_AS(fd_grad_logits(p, f, DivergenceSpec::fkld(), 1e-8), ParameterError);
    CHECK_THROWS_AS(fd_grad_logits(p, f, DivergenceSpec::fkld(), 1e-2), ParameterError);
}

TEST_CASE("baseline gradients") {
    const auto p = normalize({0.9, 0.1});
    const auto q = normalize({0.5, 0.5});

    const auto gf = baseline_grad_logits(p, q, DivergenceSpec::fkld());
    CHECK(gf[0] == doctest::Approx(-0.4).epsilon(1e-15));
    CHECK(gf[1] == doctest::Approx(0.4).epsilon(1e-15));

    const auto gr = baseline_grad_logits(p, q, DivergenceSpec::rkld());
    CHECK(gr[0] == doctest::Approx(-0.549306).epsilon(1e-5));
    CHECK(gr[1] == doctest::Approx(0.549306).epsilon(1e-5));

    const auto gw = baseline_grad_logits(p, q, DivergenceSpec::wsd(0.25, 0.75));
    CHECK(gw[0] == doctest::Approx(0.25 * gf[0] + 0.75 * gr[0]).epsilon(1e-14));

    const auto gj = baseline_grad_logits(q, q, DivergenceSpec::jsd());
    for (double v : gj) CHECK(std::fabs(v) <= 1e-14);

    DivergenceSpec ab = DivergenceSpec::alpha_beta(0.5, 0.5);
    CHECK_THROWS_AS(baseline_grad_logits(p, q, ab), ParameterError);
}

TEST_CASE("composite baselines agree with finite differences") {
    Rng rng(59);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t c = 2 + rng.uniform_index(6);
        const auto p = Simplex::from_raw(rng.dirichlet(c));
        std::vector<double> raw(c);
        for (auto& v : raw) v = rng.uniform(-2.5, 2.5);
        const Logits f(raw);
        const auto q = softmax(f);
        for (const auto& spec :
             {DivergenceSpec::fkld(), DivergenceSpec::rkld(), DivergenceSpec::wsd(0.3, 0.7),
              DivergenceSpec::jsd(), DivergenceSpec::alpha_div(0.4)}) {
            const auto closed = grad_logits(spec, p, q);
            const auto fd = fd_grad_logits(p, f, spec, 1e-5);
            CHECK(max_rel_err(closed, fd) <= 1e-6);
        }
    }
}

TEST_CASE("jsd gradient vanishes as supports separate") {
    double prev_ratio = std::numeric_limits<double>::infinity();
    for (double d : {1e-2, 1e-4, 1e-6}) {
        const auto p = normalize({1.0 - d, d});
        const auto q = normalize({d, 1.0 - d});
        const double njsd = l2(baseline_grad_logits(p, q, DivergenceSpec::jsd()));
        const double nfkld = l2(baseline_grad_logits(p, q, DivergenceSpec::fkld()));
        const double ratio = njsd / nfkld;
        CHECK(ratio <= prev_ratio + 1e-12);
        prev_ratio = ratio;
    }
}

TEST_CASE("grad result bundles both views") {
    const auto p = normalize({0.2, 0.3, 0.5});
    const auto q = normalize({0.4, 0.4, 0.2});
    const auto res = make_grad_result(DivergenceSpec::alpha_beta(0.8, 0.4), p, q);
    REQUIRE(res.wrt_probs.size() == 3);
    REQUIRE(res.wrt_logits.size() == 3);
    double sum = 0.0;
    for (double v : res.wrt_logits) {
        CHECK(std::isfinite(v));
        sum += v;
    }
    CHECK(std::fabs(sum) <= 1e-9);
    // chaining the prob gradient through the softmax Jacobian reproduces the
    // closed-form logit gradient
    for (std::size_t y = 0; y < 3; ++y) {
        double chained = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            const double jac = (k == y) ? q[k] * (1.0 - q[k]) : -q[k] * q[y];
            chained += res.wrt_probs[k] * jac;
        }
        CHECK(chained == doctest::Approx(res.wrt_logits[y]).epsilon(1e-10));
    }
}
