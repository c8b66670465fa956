#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "runsup/model.hpp"

using namespace runsup;

TEST_CASE("build_model classifies drift kinds") {
    ModelSpec zero = build_model(drift_zero(1), gaussian_initial_density({0.0}, 1e-3), 1);
    CHECK(zero.drift_kind == DriftKind::zero);
    CHECK(zero.drift_bound == 0.0);

    ModelSpec cst = build_model(drift_constant({1.0}), gaussian_initial_density({0.0}, 1.0), 1);
    CHECK(cst.drift_kind == DriftKind::constant);
    CHECK(cst.drift_bound == doctest::Approx(1.0));
    CHECK(cst.constant_mu[0] == doctest::Approx(1.0));

    ModelSpec th = build_model(drift_tanh(1), gaussian_initial_density({0.0}, 1.0), 1);
    CHECK(th.drift_kind == DriftKind::general);
    CHECK(th.drift_bound == doctest::Approx(1.0));
    CHECK(th.divergence_bound == doctest::Approx(1.0));
    double x = 2.5;
    std::vector<double> b(1);
    th.drift_at(std::span(&x, 1), b);
    CHECK(b[0] == doctest::Approx(std::tanh(2.5)));
    CHECK(th.partial_kk(std::span(&x, 1), 0) == doctest::Approx(1.0 / std::pow(std::cosh(2.5), 2)));
}

TEST_CASE("build_model validation errors") {
    CHECK_THROWS_AS(gaussian_initial_density({0.0}, 0.0), std::invalid_argument);
    // declared bound too small: the sweep names the violating sample
    DriftField bad = drift_tanh(1);
    bad.sup_norm = 0.5;
    try {
        build_model(bad, gaussian_initial_density({0.0}, 1.0), 1);
        CHECK(false);
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("drift sample above declared bound at") !=
              std::string::npos);
    }
}

TEST_CASE("build_model is deterministic") {
    ModelSpec a = build_model(drift_tanh(1), gaussian_initial_density({0.2}, 0.5), 1);
    ModelSpec b = build_model(drift_tanh(1), gaussian_initial_density({0.2}, 0.5), 1);
    CHECK(a.drift_bound == b.drift_bound);
    CHECK(a.divergence_bound == b.divergence_bound);
    CHECK(a.f0.l2_norm == b.f0.l2_norm);
}

TEST_CASE("numeric derivative fallback") {
    DriftField f = drift_tanh(1);
    f.partial_kk = nullptr;
    ModelSpec m = build_model(f, gaussian_initial_density({0.0}, 1.0), 1);
    CHECK(m.numeric_derivatives);
    double x = 0.7;
    double exact = 1.0 / std::pow(std::cosh(0.7), 2);
    CHECK(m.partial_kk(std::span(&x, 1), 0) == doctest::Approx(exact).epsilon(1e-8));
}

TEST_CASE("triangular grid geometry") {
    auto g = make_grid(1, 4.0, 16, 8, 2.0);
    CHECK(g->n_axis() == 17);
    CHECK(g->h() == doctest::Approx(0.5));
    CHECK(g->axis.front() == doctest::Approx(-4.0));
    CHECK(g->axis.back() == doctest::Approx(4.0));
    CHECK(g->times.front() == doctest::Approx(0.25));
    CHECK(g->times.back() == doctest::Approx(2.0));
    // every active node satisfies m >= x^1; masking again changes nothing
    for (int i = 0; i < g->n_axis(); ++i)
        for (int j = 0; j < g->n_axis(); ++j) {
            CHECK(g->active(i, j) == (g->axis[i] >= g->axis[j] - 1e-15));
            CHECK(g->active(i, j) == g->active(i, j));
        }
    CHECK(g->slice_index(0.25) == 0);
    CHECK(g->slice_index(2.0) == 7);
    CHECK(g->slice_index(0.3) == -1);
}

TEST_CASE("test function derivatives match finite differences") {
    std::vector<double> center{0.5, 0.0};
    for (auto kind : {TestFunction::Kind::bump, TestFunction::Kind::polynomial_times_bump}) {
        TestFunction tf = make_test_function(kind, center, 1.5, 2);
        const double h = 1e-4;
        for (double m : {0.1, 0.5, 1.2})
            for (double x : {-0.8, 0.0, 0.9}) {
                double fd_m = (tf.phi(m + h, std::span(&x, 1)) - tf.phi(m - h, std::span(&x, 1))) /
                              (2.0 * h);
                double an_m = tf.dphi_dm(m, std::span(&x, 1));
                CHECK(std::abs(fd_m - an_m) <= 10.0 * h * h * (1.0 + std::abs(an_m)) + 1e-10);

                double xp = x + h, xm = x - h;
                double fd_x = (tf.phi(m, std::span(&xp, 1)) - tf.phi(m, std::span(&xm, 1))) /
                              (2.0 * h);
                double an_x = tf.H.f(m) * tf.F_partial(std::span(&x, 1), 0);
                CHECK(std::abs(fd_x - an_x) <= 10.0 * h * h * (1.0 + std::abs(an_x)) + 1e-10);

                double fd_xx = (tf.phi(m, std::span(&xp, 1)) - 2.0 * tf.phi(m, std::span(&x, 1)) +
                                tf.phi(m, std::span(&xm, 1))) /
                               (h * h);
                double an_xx = tf.H.f(m) * tf.F_laplacian(std::span(&x, 1));
                CHECK(std::abs(fd_xx - an_xx) <= 100.0 * h * h * (1.0 + std::abs(an_xx)) + 1e-6);
            }
        // compact support
        double far = center[1] + 1.5;
        CHECK(tf.phi(0.5, std::span(&far, 1)) == 0.0);
        CHECK(tf.phi(center[0] + 1.5, std::span(&center[1], 1)) == 0.0);
    }
}

TEST_CASE("L Phi from declared derivatives matches finite differences of Phi") {
    ModelSpec m = build_model(drift_tanh(1), gaussian_initial_density({0.0}, 0.5), 1);
    std::vector<double> center{0.0, 0.2};
    TestFunction tf = make_test_function(TestFunction::Kind::bump, center, 2.0);
    const double h = 1e-4;
    for (double mm : {0.3, 1.1})
        for (double x : {-0.5, 0.4, 1.3}) {
            std::vector<double> b(1);
            m.drift_at(std::span(&x, 1), b);
            double xp = x + h, xm = x - h;
            double fd = b[0] *
                            (tf.phi(mm, std::span(&xp, 1)) - tf.phi(mm, std::span(&xm, 1))) /
                            (2.0 * h) +
                        0.5 *
                            (tf.phi(mm, std::span(&xp, 1)) - 2.0 * tf.phi(mm, std::span(&x, 1)) +
                             tf.phi(mm, std::span(&xm, 1))) /
                            (h * h);
            double an = tf.l_phi(m, mm, std::span(&x, 1));
            CHECK(std::abs(fd - an) <= 100.0 * h * h * (1.0 + std::abs(an)) + 1e-6);
        }
}

TEST_CASE("canonical battery has 12 members") {
    CHECK(canonical_test_battery(1).size() == 12);
}
