#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "runsup/brownian.hpp"
#include "runsup/quadrature.hpp"

using namespace runsup;

TEST_CASE("bm joint density closed values and support") {
    CHECK(bm_joint_density1(1.0, 0.0, 1.0, 0.0) ==
          doctest::Approx(0.21596386605275223).epsilon(1e-12));
    // below max(x^1, x0^1) the density vanishes
    CHECK(bm_joint_density1(-0.1, 0.0, 1.0, 0.0) == 0.0);
    CHECK(bm_joint_density1(0.5, 0.8, 1.0, 0.0) == 0.0);
    CHECK(bm_joint_density1(0.5, 0.2, 1.0, 0.7) == 0.0);
    CHECK_THROWS_AS(bm_joint_density1(1.0, 0.0, 0.0, 0.0), std::domain_error);

    std::vector<double> x{0.0, 0.3}, x0{0.0, 0.1};
    CHECK(bm_joint_density(1.0, x, 1.0, x0) ==
          doctest::Approx(bm_joint_density1(1.0, 0.0, 1.0, 0.0) * phi1(0.2, 1.0)).epsilon(1e-12));
}

TEST_CASE("bm joint density normalizes over the wedge") {
    // int_{m >= x} p dm dx at t = 1 equals 1 (outer x, inner m in [max(0,x), inf)).
    double mass = adaptive_simpson(
        [&](double x) {
            double lo = std::max(0.0, x);
            return adaptive_simpson(
                [&](double m) { return bm_joint_density1(m, x, 1.0, 0.0); }, lo, lo + 9.0, 1e-11);
        },
        -8.0, 8.0, 1e-9);
    CHECK(std::abs(mass - 1.0) < 1e-6);
}

TEST_CASE("bm sup cdf") {
    CHECK(bm_sup_cdf(0.0, 1.0, 0.0) == 0.0);
    CHECK(bm_sup_cdf(100.0, 1.0, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(bm_sup_cdf(1.0, 1.0, 0.0) == doctest::Approx(0.6826894921370859).epsilon(1e-12));
    CHECK(bm_sup_cdf(-0.5, 1.0, 0.0) == 0.0);

    // marginal of the joint density reproduces the sup cdf
    double m_level = 1.0;
    double prob = adaptive_simpson(
        [&](double m) {
            return adaptive_simpson(
                [&](double x) { return bm_joint_density1(m, x, 1.0, 0.0); }, m - 9.0, m, 1e-11);
        },
        0.0, m_level, 1e-9);
    CHECK(std::abs(prob - bm_sup_cdf(m_level, 1.0, 0.0)) < 1e-5);
}

TEST_CASE("bm joint cdf vs quadrature") {
    double F = bm_joint_cdf(1.0, 0.3, 1.0, 0.0);
    double quad = adaptive_simpson(
        [&](double m) {
            return adaptive_simpson(
                [&](double x) { return bm_joint_density1(m, x, 1.0, 0.0); }, m - 9.0,
                std::min(0.3, m), 1e-11);
        },
        0.0, 1.0, 1e-9);
    CHECK(F == doctest::Approx(quad).epsilon(1e-5));
    CHECK(bm_joint_cdf(50.0, 50.0, 1.0, 0.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("drifted joint density and cdf") {
    // mu = 0 reduces exactly
    CHECK(drifted_bm_joint_density(0.8, 0.1, 0.7, 0.0, 0.0) ==
          bm_joint_density1(0.8, 0.1, 0.7, 0.0));
    CHECK(drifted_bm_joint_density(1.0, 0.0, 1.0, 1.0, 0.0) ==
          doctest::Approx(0.13098870615106661).epsilon(1e-12));

    // normalization for mu = 1, t = 1
    double mass = adaptive_simpson(
        [&](double x) {
            double lo = std::max(0.0, x);
            return adaptive_simpson(
                [&](double m) { return drifted_bm_joint_density(m, x, 1.0, 1.0, 0.0); }, lo,
                lo + 10.0, 1e-11);
        },
        -8.0, 10.0, 1e-9);
    CHECK(std::abs(mass - 1.0) < 1e-6);

    // cdf vs quadrature of the density
    double F = drifted_bm_joint_cdf(1.2, 0.4, 1.0, 0.5, 0.0);
    double quad = adaptive_simpson(
        [&](double m) {
            return adaptive_simpson(
                [&](double x) { return drifted_bm_joint_density(m, x, 1.0, 0.5, 0.0); }, m - 9.0,
                std::min(0.4, m), 1e-11);
        },
        0.0, 1.2, 1e-9);
    CHECK(F == doctest::Approx(quad).epsilon(1e-5));
}

TEST_CASE("p0_gauss closed form against quadrature mixture") {
    // The f0-mixture integrand is supported on x0 <= m, so the oracle
    // integrates only over that (smooth) range.
    for (double w : {1e-3, 0.25}) {
        InitialDensity f0 = gaussian_initial_density({0.0}, w);
        for (double t : {0.1, 1.0})
            for (double m : {0.3, 1.0})
                for (double x : {-0.5, 0.29, 0.999}) {
                    if (m < x) continue;
                    double closed = p0_gauss(m, x, t, 0.0, w);
                    double lo = -9.0 * w, hi = std::min(m, 9.0 * w);
                    double quad = hi <= lo ? 0.0
                                           : gl_integrate(
                                                 [&](double x0) {
                                                     return bm_joint_density1(m, x, t, x0) *
                                                            f0(std::span(&x0, 1));
                                                 },
                                                 lo, hi, 96);
                    CHECK(closed == doctest::Approx(quad).epsilon(1e-7));
                }
    }
    // narrow f0 reproduces the point-start density to O(w^2)
    double w0 = 1e-3;
    double diff = std::abs(p0_gauss(1.0, 0.0, 1.0, 0.0, w0) - bm_joint_density1(1.0, 0.0, 1.0, 0.0));
    CHECK(diff < 10.0 * w0 * w0);
}

TEST_CASE("p0_gauss_submass against quadrature") {
    for (double w : {1e-3, 0.3})
        for (double s : {0.05, 0.6})
            for (double m : {0.4, 1.5})
                for (double a : {-0.7, 0.39}) {
                    if (m < a) continue;
                    double closed = p0_gauss_submass(m, a, s, 0.1, w);
                    double quad = adaptive_simpson(
                        [&](double b) { return p0_gauss(b, a, s, 0.1, w); }, a, m, 1e-12);
                    CHECK(std::abs(closed - quad) < 1e-7);
                }
}

TEST_CASE("p0_seed grid fill and mass") {
    ModelSpec model = build_model(drift_zero(1), gaussian_initial_density({0.0}, 0.25), 1);
    auto grid = make_grid(1, 6.0, 48, 4, 1.0);
    JointDensityGrid p0 = p0_seed(model, grid);
    CHECK(p0.provenance == Provenance::exact);
    for (std::size_t k = 0; k < grid->times.size(); ++k)
        CHECK(std::abs(p0.slice_mass(k) - 1.0) < 5e-3);
    p0.validate(5e-3);

    // diagonal trace is the continuous limit of the interior values
    const TriangularGrid& g = *grid;
    int k = 3, i = 30;
    double extrap = 2.0 * p0.values[k][g.idx(i, i - 1)] - p0.values[k][g.idx(i, i - 2)];
    CHECK(std::abs(extrap - p0.diag[k][i]) < 0.05 * (std::abs(p0.diag[k][i]) + 0.1));
}

TEST_CASE("p0_seed factorizes for d = 2 product Gaussian") {
    ModelSpec model = build_model(drift_zero(2), gaussian_initial_density({0.0, 0.3}, 0.2), 2);
    auto grid = make_grid(2, 4.0, 10, 2, 0.8);
    JointDensityGrid p0 = p0_seed(model, grid);
    const TriangularGrid& g = *grid;
    int k = 1;
    for (int i = 3; i <= 8; ++i)
        for (int j = 0; j <= i; ++j)
            for (int j2 = 2; j2 <= 7; ++j2) {
                double joint = p0.values[k][g.idx(i, j, j2)];
                double first = p0_gauss(g.axis[i], g.axis[j], g.times[k], 0.0, 0.2);
                double second = phi1(g.x2_axis[j2] - 0.3, g.times[k] + 0.2 * 0.2);
                CHECK(joint == doctest::Approx(first * second).epsilon(1e-10));
            }
}

TEST_CASE("strong-form boundary cancellation for the driftless closed form") {
    // 1/2 (d1 + d2) p + 1/2 d2 p = 0 identically for p = bm_joint_density
    // (the cancellation extends off the diagonal); finite-difference check at
    // 1e3 points approaching the diagonal from the interior.
    const double t = 0.8, h = 1e-5;
    double worst = 0.0;
    for (int q = 0; q < 1000; ++q) {
        double m = 0.05 + 3.0 * q / 999.0;
        double x = m - 0.02 - 0.2 * (q % 7) / 7.0;
        double d1 = (bm_joint_density1(m + h, x, t, 0.0) - bm_joint_density1(m - h, x, t, 0.0)) /
                    (2.0 * h);
        double d2 = (bm_joint_density1(m, x + h, t, 0.0) - bm_joint_density1(m, x - h, t, 0.0)) /
                    (2.0 * h);
        double resid = 0.5 * (d1 + d2) + 0.5 * d2;
        worst = std::max(worst, std::abs(resid));
    }
    CHECK(worst <= 10.0 * h);
}

TEST_CASE("strong-form identity for the drifted closed form") {
    // B p(m,m) = 1/2 (d1 + d2) p + 1/2 d2 p holds exactly for the Girsanov
    // closed form; interior finite differences.
    const double t = 0.6, h = 1e-5, mu = 0.8;
    double worst = 0.0;
    for (int q = 0; q < 200; ++q) {
        double m = 0.1 + 2.0 * q / 199.0;
        double x = m - 0.15;
        double d1 =
            (drifted_bm_joint_density(m + h, x, t, mu, 0.0) -
             drifted_bm_joint_density(m - h, x, t, mu, 0.0)) /
            (2.0 * h);
        double d2 =
            (drifted_bm_joint_density(m, x + h, t, mu, 0.0) -
             drifted_bm_joint_density(m, x - h, t, mu, 0.0)) /
            (2.0 * h);
        double resid = mu * drifted_bm_joint_density(m, x, t, mu, 0.0) - 0.5 * (d1 + d2) - 0.5 * d2;
        worst = std::max(worst, std::abs(resid));
    }
    CHECK(worst <= 10.0 * h);
}

TEST_CASE("gaussian domination envelope") {
    ModelSpec model = build_model(drift_zero(1), gaussian_initial_density({0.0}, 0.25), 1);
    auto grid = make_grid(1, 6.0, 64, 8, 1.0);
    JointDensityGrid p0 = p0_seed(model, grid);
    double C = fit_gaussian_domination(model, p0);
    CHECK(C > 0.0);
    CHECK(C < 50.0);
    // post-fit envelope holds everywhere (by construction of the fit)
    const TriangularGrid& g = *grid;
    for (std::size_t k = 0; k < g.times.size(); ++k)
        for (int i = 0; i < g.n_axis(); i += 5)
            for (int j = 0; j <= i; j += 5) {
                double env = phi1(g.axis[i] - g.axis[j], 2.0 * g.times[k]) *
                             phi1(g.axis[i], 2.0 * g.times[k] + 0.25 * 0.25);
                CHECK(p0.values[k][g.idx(i, j)] <= C * env * (1.0 + 1e-9) + 1e-300);
            }
}

TEST_CASE("envelope outside mass shrinks with the box") {
    // The pVversusGauss envelope spreads the x-marginal to variance ~4t, so
    // its outside fraction is far more conservative than the true density's.
    ModelSpec model = build_model(drift_constant({0.5}), gaussian_initial_density({0.0}, 0.25), 1);
    auto g6 = make_grid(1, 6.0, 32, 4, 1.0);
    auto g12 = make_grid(1, 12.0, 32, 4, 1.0);
    double out6 = envelope_outside_mass(model, *g6);
    double out12 = envelope_outside_mass(model, *g12);
    CHECK(out6 < 5e-3);
    CHECK(out12 < 1e-8);
    CHECK(out12 < out6);
}

TEST_CASE("bmpair kernel primitives") {
    const double tau = 0.37;
    // dsubmax_dv equals the density (fundamental theorem in the level slot)
    CHECK(bmpair::dsubmax_dv(0.8, 0.2, tau) == bmpair::density(0.8, 0.2, tau));

    // Q matches the numerically integrated density
    for (double v : {0.3, 1.1})
        for (double w : {-0.9, 0.1, 0.295}) {
            if (v < std::max(0.0, w)) continue;
            double quad = adaptive_simpson(
                [&](double vp) { return bmpair::density(vp, w, tau); }, std::max(0.0, w), v, 1e-12);
            CHECK(bmpair::submax(v, w, tau) == doctest::Approx(quad).epsilon(1e-8));
        }

    // slot derivatives of Q match finite differences (interior points)
    const double h = 1e-6;
    for (double v : {0.6, 1.2})
        for (double w : {-0.4, 0.3}) {
            double fd_v = (bmpair::submax(v + h, w, tau) - bmpair::submax(v - h, w, tau)) / (2 * h);
            CHECK(bmpair::dsubmax_dv(v, w, tau) == doctest::Approx(fd_v).epsilon(1e-6));
            double fd_w = (bmpair::submax(v, w + h, tau) - bmpair::submax(v, w - h, tau)) / (2 * h);
            CHECK(bmpair::dsubmax_dw(v, w, tau) == doctest::Approx(fd_w).epsilon(1e-6));
        }
}
