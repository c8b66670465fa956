#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "runsup/dual_semigroup.hpp"
#include "runsup/quadrature.hpp"

using namespace runsup;

namespace {

ModelSpec constant_model(double mu) {
    return build_model(drift_constant({mu}), gaussian_initial_density({0.0}, 0.25), 1);
}

}  // namespace

TEST_CASE("gamma0 heat kernel") {
    ModelSpec zero = build_model(drift_zero(1), gaussian_initial_density({0.0}, 0.25), 1);
    KernelEval k(zero, KernelMode::exact_zero_drift);
    double x = 0.4, y = 0.4;
    CHECK(k.gamma0(std::span(&x, 1), std::span(&y, 1), 0.5) ==
          doctest::Approx(std::pow(2.0 * M_PI * 0.5, -0.5)).epsilon(1e-12));
    // symmetry
    double a = -0.3, b = 1.2;
    CHECK(k.gamma0(std::span(&a, 1), std::span(&b, 1), 0.7) ==
          k.gamma0(std::span(&b, 1), std::span(&a, 1), 0.7));
    // Chapman-Kolmogorov by quadrature
    double s = 0.3, r = 0.6;
    double quad = adaptive_simpson(
        [&](double z) {
            return k.gamma0(std::span(&a, 1), std::span(&z, 1), s) *
                   k.gamma0(std::span(&z, 1), std::span(&b, 1), r);
        },
        -12.0, 12.0, 1e-12);
    CHECK(std::abs(quad - k.gamma0(std::span(&a, 1), std::span(&b, 1), s + r)) < 1e-7);
    CHECK_THROWS_AS(k.gamma0(std::span(&a, 1), std::span(&b, 1), 0.0), std::domain_error);
}

TEST_CASE("gamma exact for constant drift") {
    ModelSpec cst = constant_model(1.0);
    KernelEval k(cst, KernelMode::exact_constant_drift);
    double x = 0.2, y = 0.2;
    GammaPair g = k.gamma_exact(std::span(&x, 1), std::span(&y, 1), 1.0);
    CHECK(g.gamma == doctest::Approx(0.24197072451914337).epsilon(1e-12));
    CHECK(g.gamma1 == doctest::Approx(-0.15697155588228934).epsilon(1e-10));

    // zero drift: Gamma1 vanishes identically
    ModelSpec zero = build_model(drift_zero(1), gaussian_initial_density({0.0}, 0.25), 1);
    KernelEval k0(zero, KernelMode::exact_zero_drift);
    GammaPair g0 = k0.gamma_exact(std::span(&x, 1), std::span(&y, 1), 0.8);
    CHECK(g0.gamma1 == 0.0);

    // probability kernel: integrates to 1 in y
    double mass = adaptive_simpson(
        [&](double yy) { return k.gamma_exact(std::span(&x, 1), std::span(&yy, 1), 0.7).gamma; },
        -12.0, 12.0, 1e-12);
    CHECK(std::abs(mass - 1.0) < 1e-9);

    // semigroup composition for the drifted kernel
    double a = -0.4, b = 0.9, s = 0.25, r = 0.45;
    double quad = adaptive_simpson(
        [&](double z) {
            return k.gamma_exact(std::span(&a, 1), std::span(&z, 1), s).gamma *
                   k.gamma_exact(std::span(&z, 1), std::span(&b, 1), r).gamma;
        },
        -12.0, 12.0, 1e-12);
    CHECK(std::abs(quad - k.gamma_exact(std::span(&a, 1), std::span(&b, 1), s + r).gamma) < 1e-6);

    // general drift has no exact mode
    ModelSpec th = build_model(drift_tanh(1), gaussian_initial_density({0.0}, 0.25), 1);
    CHECK_THROWS_AS(KernelEval(th, KernelMode::exact_constant_drift), std::invalid_argument);
    KernelEval kmc(th, KernelMode::mc_estimate);
    CHECK_THROWS_AS(kmc.gamma_exact(std::span(&x, 1), std::span(&y, 1), 0.5), std::runtime_error);
}

TEST_CASE("gamma_mc matches exact kernels within 3 sigma") {
    double x = 0.1;
    double lo = 0.2, hi = 0.6;
    const std::size_t n = 200000;
    // zero drift: cell average of Gamma0
    ModelSpec zero = build_model(drift_zero(1), gaussian_initial_density({0.0}, 0.25), 1);
    KernelEval k0(zero, KernelMode::exact_zero_drift);
    double est0 = k0.gamma_mc(std::span(&x, 1), std::span(&lo, 1), std::span(&hi, 1), 0.5, n, 50, 3);
    double avg0 = adaptive_simpson(
                      [&](double y) { return k0.gamma0(std::span(&x, 1), std::span(&y, 1), 0.5); },
                      lo, hi, 1e-10) /
                  (hi - lo);
    double p_cell = avg0 * (hi - lo);
    double sigma = std::sqrt(p_cell * (1.0 - p_cell) / n) / (hi - lo);
    CHECK(std::abs(est0 - avg0) < 3.0 * sigma);

    // constant drift: cell average of the exact kernel, weights still 1
    ModelSpec cst = constant_model(0.8);
    KernelEval kc(cst, KernelMode::exact_constant_drift);
    double estc = kc.gamma_mc(std::span(&x, 1), std::span(&lo, 1), std::span(&hi, 1), 0.5, n, 50, 4);
    double avgc =
        adaptive_simpson(
            [&](double y) { return kc.gamma_exact(std::span(&x, 1), std::span(&y, 1), 0.5).gamma; },
            lo, hi, 1e-10) /
        (hi - lo);
    double pc = avgc * (hi - lo);
    double sigc = std::sqrt(pc * (1.0 - pc) / n) / (hi - lo);
    CHECK(std::abs(estc - avgc) < 3.0 * sigc);

    // empty far cell: zero estimate with the low-statistics flag
    double far_lo = 30.0, far_hi = 31.0;
    bool low = false;
    double far = kc.gamma_mc(std::span(&x, 1), std::span(&far_lo, 1), std::span(&far_hi, 1), 0.5,
                             1000, 20, 5, &low);
    CHECK(far == 0.0);
    CHECK(low);
}

TEST_CASE("d_gamma_dx1 analytic vs finite differences") {
    ModelSpec cst = constant_model(1.0);
    KernelEval k(cst, KernelMode::exact_constant_drift);
    const double h = 1e-5;
    for (double x : {-0.3, 0.4})
        for (double y : {-0.1, 0.8})
            for (double t : {0.2, 0.9}) {
                double xp = x + h, xm = x - h;
                double fd = (k.gamma_exact(std::span(&xp, 1), std::span(&y, 1), t).gamma -
                             k.gamma_exact(std::span(&xm, 1), std::span(&y, 1), t).gamma) /
                            (2.0 * h);
                double an = k.d_gamma_dx1(std::span(&x, 1), std::span(&y, 1), t);
                CHECK(std::abs(fd - an) <= 10.0 * h * h * (1.0 + std::abs(an)) + 1e-9);
            }
    // zero drift: the derivative vanishes on the diagonal (odd factor)
    ModelSpec zero = build_model(drift_zero(1), gaussian_initial_density({0.0}, 0.25), 1);
    KernelEval k0(zero, KernelMode::exact_zero_drift);
    double x = 0.5;
    CHECK(k0.d_gamma_dx1(std::span(&x, 1), std::span(&x, 1), 0.4) == 0.0);
}

TEST_CASE("envelope fit is finite, stable and violation-free") {
    ModelSpec cst = constant_model(1.0);
    KernelEstimateParams prm;
    prm.alpha = 0.5;
    prm.c = 4.0;
    prm.T = 1.0;
    KernelEval k(cst, KernelMode::exact_constant_drift, prm);
    std::vector<double> ts{0.05, 0.1, 0.2, 0.5, 1.0};
    EnvelopeFit coarse = gamma_envelope_check(k, ts, 3.0, 41);
    EnvelopeFit fine = gamma_envelope_check(k, ts, 3.0, 81);
    CHECK(coarse.violations == 0);
    CHECK(fine.violations == 0);
    CHECK(fine.C_gamma1 > 0.0);
    CHECK(std::isfinite(fine.C_gamma1));
    CHECK(std::isfinite(fine.C_dgamma1));
    // stability under grid refinement (+-10%)
    CHECK(fine.C_gamma1 == doctest::Approx(coarse.C_gamma1).epsilon(0.10));
    CHECK(fine.C_dgamma1 == doctest::Approx(coarse.C_dgamma1).epsilon(0.10));

    // zero drift: Gamma1 = 0 so the fitted constant is 0
    ModelSpec zero = build_model(drift_zero(1), gaussian_initial_density({0.0}, 0.25), 1);
    KernelEval k0(zero, KernelMode::exact_zero_drift, prm);
    EnvelopeFit z = gamma_envelope_check(k0, ts, 3.0, 21);
    CHECK(z.C_gamma1 == 0.0);
}

TEST_CASE("ball representation residual decays at second order") {
    ModelSpec cst = constant_model(0.6);
    TestFunction F = make_test_function(TestFunction::Kind::bump,
                                        std::vector<double>{0.0, 0.2}, 1.2);
    Profile1D g = bump_profile(-0.1, 1.0);
    double t = 0.8;
    double r1 = std::abs(ball_representation_residual(cst, F, g, t, 32));
    double r2 = std::abs(ball_representation_residual(cst, F, g, t, 64));
    double r4 = std::abs(ball_representation_residual(cst, F, g, t, 128));
    double rate1 = std::log2(r1 / r2);
    double rate2 = std::log2(r2 / r4);
    CHECK(rate1 >= 1.8);
    CHECK(rate2 >= 1.8);
}

TEST_CASE("Q strong continuity proxy") {
    ModelSpec cst = constant_model(0.5);
    Profile1D f = bump_profile(0.3, 1.0);
    double prev = 1e9;
    for (double t : {0.2, 0.05, 0.01, 0.002}) {
        double gap = q_strong_continuity_gap(cst, f, t, 2.0, 41);
        CHECK(gap < prev);
        prev = gap;
    }
    CHECK(prev < 0.02);
}
