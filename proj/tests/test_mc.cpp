#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "runsup/brownian.hpp"
#include "runsup/mc.hpp"
#include "runsup/parallel.hpp"
#include "runsup/quadrature.hpp"

using namespace runsup;

namespace {

ModelSpec zero_model(double w0 = 1e-6) {
    return build_model(drift_zero(1), gaussian_initial_density({0.0}, w0), 1);
}

}  // namespace

TEST_CASE("bridge maximum sample closed value") {
    // endpoints 0, dt = 1, U = e^{-2}: 1/2 sqrt(0 + 4) = 1
    CHECK(bridge_max_sample(0.0, 0.0, 1.0, std::exp(-2.0)) == doctest::Approx(1.0).epsilon(1e-14));
    // the sample always dominates both endpoints
    CHECK(bridge_max_sample(0.3, -0.2, 0.1, 0.5) >= 0.3);
    CHECK(bridge_max_sample(-0.4, 0.6, 0.1, 0.9999) >= 0.6);
}

TEST_CASE("simulate reproducibility across worker counts") {
    ModelSpec model = build_model(drift_tanh(1), gaussian_initial_density({0.0}, 0.3), 1);
    set_thread_count(1);
    PathBatch a = simulate(model, 0.5, 50, 20000, true, 42);
    set_thread_count(5);
    PathBatch b = simulate(model, 0.5, 50, 20000, true, 42);
    set_thread_count(0);
    REQUIRE(a.n_paths == b.n_paths);
    bool identical = true;
    for (std::size_t p = 0; p < a.n_paths; ++p)
        identical = identical && a.sup[p] == b.sup[p] && a.terminal[p] == b.terminal[p] &&
                    a.weight[p] == b.weight[p];
    CHECK(identical);
}

TEST_CASE("path batch invariants") {
    ModelSpec model = build_model(drift_constant({0.7}), gaussian_initial_density({0.0}, 0.2), 1);
    PathBatch batch = simulate(model, 1.0, 100, 20000, true, 7);
    CHECK(batch.n_excluded == 0);
    bool sup_ok = true, weights_one = true;
    for (std::size_t p = 0; p < batch.n_paths; ++p) {
        sup_ok = sup_ok && batch.sup[p] >= batch.terminal[p] - 1e-12;
        weights_one = weights_one && batch.weight[p] == 1.0;  // div B = 0
    }
    CHECK(sup_ok);
    CHECK(weights_one);
}

TEST_CASE("drift blow-up excludes paths and aborts") {
    DriftField explode;
    explode.name = "explode";
    explode.dim = 1;
    explode.sup_norm = 1e300;
    explode.div_sup_norm = 0.0;
    explode.eval = [](std::span<const double> x, std::span<double> out) {
        out[0] = 1e300 * (1.0 + x[0] * x[0]);
    };
    explode.partial_kk = [](std::span<const double>, int) { return 0.0; };
    ModelSpec m;
    m.dim = 1;
    m.drift = explode;
    m.drift_kind = DriftKind::general;
    m.f0 = gaussian_initial_density({0.0}, 0.1);
    CHECK_THROWS_AS(simulate(m, 1.0, 10, 1000, true, 1), std::runtime_error);
}

TEST_CASE("driftless supremum mean") {
    ModelSpec model = zero_model();
    PathBatch batch = simulate(model, 1.0, 200, 200000, true, 11);
    double mean = 0.0;
    for (double m : batch.sup) mean += m;
    mean /= batch.n_paths;
    double sd = std::sqrt(1.0 - 2.0 / M_PI);  // Var sup = (1 - 2/pi) t
    double se = sd / std::sqrt(static_cast<double>(batch.n_paths));
    CHECK(std::abs(mean - std::sqrt(2.0 / M_PI)) < 3.0 * se);
}

TEST_CASE("one-step bridge maximum reproduces the sup law") {
    // One Euler step with bridge correction samples (M_dt, W_dt) exactly;
    // KS distance of M against 2 Phi(y/sqrt(dt)) - 1 at the 1% level.
    ModelSpec model = zero_model();
    const std::size_t n = 200000;
    PathBatch batch = simulate(model, 1.0, 1, n, true, 3);
    std::vector<double> m(batch.sup);
    std::sort(m.begin(), m.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double F = bm_sup_cdf(m[i], 1.0, 0.0);
        ks = std::max(ks, std::max((i + 1.0) / n - F, F - static_cast<double>(i) / n));
    }
    CHECK(ks <= 1.63 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("discrete monitoring bias without bridge correction") {
    ModelSpec model = zero_model();
    const std::size_t n = 200000;
    double exact = bm_sup_cdf(1.0, 1.0, 0.0);
    std::vector<double> bias;
    for (int steps : {10, 100, 1000}) {
        PathBatch batch = simulate(model, 1.0, steps, n, false, 17);
        std::size_t below = 0;
        for (double m : batch.sup)
            if (m <= 1.0) ++below;
        bias.push_back(static_cast<double>(below) / n - exact);
    }
    CHECK(bias[0] > bias[1]);
    CHECK(bias[1] > bias[2]);
    CHECK(bias[2] > 0.0);
    // and the bridge-corrected estimate has no such bias at coarse steps
    PathBatch corrected = simulate(model, 1.0, 10, n, true, 17);
    std::size_t below = 0;
    for (double m : corrected.sup)
        if (m <= 1.0) ++below;
    double resid = std::abs(static_cast<double>(below) / n - exact);
    CHECK(resid < 3.0 * std::sqrt(exact * (1.0 - exact) / n) + 1e-3);
}

TEST_CASE("feynman-kac unit payout and linear payout") {
    ModelSpec zero = zero_model();
    double x = 0.4;
    McValue one = feynman_kac(zero, [](std::span<const double>) { return 1.0; },
                              std::span(&x, 1), 0.5, 20000, 50, 5);
    CHECK(one.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(one.std_error == doctest::Approx(0.0).epsilon(1e-12));

    // constant drift mu: Y has drift -mu, so E[Y_t] = x - mu t
    ModelSpec cst = build_model(drift_constant({1.0}), gaussian_initial_density({0.0}, 0.2), 1);
    McValue lin = feynman_kac(cst, [](std::span<const double> y) { return y[0]; },
                              std::span(&x, 1), 1.0, 200000, 100, 9);
    CHECK(std::abs(lin.value - (x - 1.0)) < 3.0 * lin.std_error);
}

TEST_CASE("feynman-kac short-time expansion for tanh drift") {
    // Q_t 1 (x) = 1 - t sech^2(x) + O(t^2)
    ModelSpec th = build_model(drift_tanh(1), gaussian_initial_density({0.0}, 0.2), 1);
    double x = 0.3, t = 0.05;
    McValue v = feynman_kac(th, [](std::span<const double>) { return 1.0; }, std::span(&x, 1), t,
                            100000, 50, 13);
    double sech2 = 1.0 / std::pow(std::cosh(x), 2);
    CHECK(std::abs(v.value - (1.0 - t * sech2)) < 3.0 * v.std_error + 2.0 * t * t);
}

TEST_CASE("semigroup composition within MC error") {
    // Q_{t+s} f = Q_t (Q_s f) for constant drift and a bump payout.
    ModelSpec cst = build_model(drift_constant({0.5}), gaussian_initial_density({0.0}, 0.2), 1);
    Profile1D f = bump_profile(0.0, 1.5);
    double x = 0.2, t = 0.3, s = 0.2;
    const double mu = 0.5;

    auto qs_f = [&](std::span<const double> y) {
        // closed form of Q_s f for constant drift (div B = 0)
        return gauss_density_integrate([&](double z) { return f.f(z); }, y[0] - mu * s,
                                       std::sqrt(s), 1e-10);
    };
    McValue direct = feynman_kac(cst, [&](std::span<const double> y) { return f.f(y[0]); },
                                 std::span(&x, 1), t + s, 100000, 100, 21);
    McValue staged = feynman_kac(cst, qs_f, std::span(&x, 1), t, 100000, 60, 22);
    double combined = std::sqrt(direct.std_error * direct.std_error +
                                staged.std_error * staged.std_error);
    CHECK(std::abs(direct.value - staged.value) < 3.0 * combined);
}

TEST_CASE("histogram density estimate") {
    ModelSpec model = zero_model();
    auto grid = make_grid(1, 4.0, 32, 4, 1.0);
    PathBatch batch = simulate(model, 1.0, 100, 200000, true, 23);
    EstimateInfo info;
    JointDensityGrid est = estimate_density(batch, grid, DensityEstimator::histogram, &info);
    CHECK(est.provenance == Provenance::monte_carlo);
    CHECK(info.escaped_mass < 1e-3);

    // mass is 1 minus the escaped fraction by construction
    int slice = grid->slice_index(1.0);
    double mass = 0.0;
    const TriangularGrid& g = *grid;
    for (int i = 0; i < g.n_axis(); ++i)
        for (int j = 0; j <= i; ++j)
            mass += est.values[slice][g.idx(i, j)] * g.h() * g.h() * (j == i ? 0.5 : 1.0);
    CHECK(mass == doctest::Approx(1.0 - info.escaped_mass).epsilon(1e-9));

    // far tail cell with no samples stays zero
    CHECK(est.values[slice][g.idx(g.n_axis() - 1, 0)] == 0.0);

    // agreement with the closed form at a well-populated node
    int i = grid->slice_index(1.0);
    (void)i;
    double m_node = 1.0, x_node = 0.0;
    int im = static_cast<int>((m_node - g.axis[0]) / g.h() + 0.5);
    int jx = static_cast<int>((x_node - g.axis[0]) / g.h() + 0.5);
    double est_v = est.values[slice][g.idx(im, jx)];
    double exact_v = bm_joint_density1(g.axis[im], g.axis[jx], 1.0, 0.0);
    CHECK(std::abs(est_v - exact_v) < 0.05);
}

TEST_CASE("kernel-smoothed estimate reports leakage and roughly matches") {
    ModelSpec model = zero_model();
    auto grid = make_grid(1, 4.0, 32, 2, 1.0);
    PathBatch batch = simulate(model, 1.0, 50, 50000, true, 29);
    EstimateInfo info;
    JointDensityGrid est = estimate_density(batch, grid, DensityEstimator::kernel_smoothed, &info);
    CHECK(info.smoothing_leakage < 0.2);
    int slice = grid->slice_index(1.0);
    const TriangularGrid& g = *grid;
    int im = static_cast<int>((1.0 - g.axis[0]) / g.h() + 0.5);
    int jx = static_cast<int>((0.0 - g.axis[0]) / g.h() + 0.5);
    CHECK(std::abs(est.values[slice][g.idx(im, jx)] -
                   bm_joint_density1(g.axis[im], g.axis[jx], 1.0, 0.0)) < 0.08);
}

TEST_CASE("cell standard error scales as 1/sqrt(n)") {
    ModelSpec model = zero_model();
    auto edges = [] {
        std::vector<double> e;
        for (int i = 0; i <= 16; ++i) e.push_back(-2.0 + 4.0 * i / 16.0);
        return e;
    }();
    // 16 disjoint subsets of 12500 paths vs 8 subsets of 25000.
    std::vector<std::vector<double>> freq_small, freq_big;
    for (int s = 0; s < 16; ++s) {
        PathBatch b = simulate(model, 1.0, 50, 12500, true, 1000 + s);
        CellHistogram h = histogram2d(b, edges, edges);
        std::vector<double> f(h.counts.size());
        for (std::size_t q = 0; q < f.size(); ++q) f[q] = double(h.counts[q]) / b.n_paths;
        freq_small.push_back(f);
        if (s % 2 == 1) {
            PathBatch b2 = simulate(model, 1.0, 50, 25000, true, 2000 + s);
            CellHistogram h2 = histogram2d(b2, edges, edges);
            std::vector<double> f2(h2.counts.size());
            for (std::size_t q = 0; q < f2.size(); ++q) f2[q] = double(h2.counts[q]) / b2.n_paths;
            freq_big.push_back(f2);
        }
    }
    auto mean_cell_sd = [](const std::vector<std::vector<double>>& runs) {
        std::size_t ncells = runs[0].size();
        double acc = 0.0;
        int counted = 0;
        for (std::size_t c = 0; c < ncells; ++c) {
            double mu = 0.0, m2 = 0.0;
            for (const auto& r : runs) mu += r[c];
            mu /= runs.size();
            for (const auto& r : runs) m2 += (r[c] - mu) * (r[c] - mu);
            double sd = std::sqrt(m2 / (runs.size() - 1));
            if (mu > 1e-3) {
                acc += sd;
                ++counted;
            }
        }
        return acc / counted;
    };
    double ratio = mean_cell_sd(freq_small) / mean_cell_sd(freq_big);
    CHECK(ratio > std::sqrt(2.0) * 0.85);
    CHECK(ratio < std::sqrt(2.0) * 1.15);
}

TEST_CASE("path batch binary round trip") {
    ModelSpec model = build_model(drift_constant({0.3}), gaussian_initial_density({0.1}, 0.2), 1);
    PathBatch batch = simulate(model, 0.7, 30, 5000, true, 31);
    std::string path = "/tmp/runsup_test_batch.bin";
    save_path_batch(path, batch);
    PathBatch loaded = load_path_batch(path);
    CHECK(loaded.n_paths == batch.n_paths);
    CHECK(loaded.seed == batch.seed);
    CHECK(loaded.horizon == batch.horizon);
    bool same = true;
    for (std::size_t p = 0; p < batch.n_paths; ++p)
        same = same && loaded.sup[p] == batch.sup[p] && loaded.terminal[p] == batch.terminal[p] &&
               loaded.weight[p] == batch.weight[p];
    CHECK(same);
    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
}
