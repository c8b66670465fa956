#include "runsup/pricing.hpp"

#include <cmath>
#include <stdexcept>

namespace runsup {

namespace {

// Triangular quadrature of f(m, x1) against the last slice, with a stride-2
// rerun for the error estimate.
double pair_quad(const JointDensityGrid& d, int slice, int stride,
                 const std::function<double(double, double)>& f) {
    const TriangularGrid& g = *d.grid;
    double h = g.h() * stride;
    std::vector<int> nodes;
    for (int i = 0; i < g.n_axis(); i += stride) nodes.push_back(i);
    const int n = static_cast<int>(nodes.size());
    double acc = 0.0;
    for (int a = 1; a < n; ++a) {
        double wm = h * ((a == n - 1) ? 0.5 : 1.0);
        for (int b = 0; b <= a; ++b) {
            double wx = h * ((b == 0 || b == a) ? 0.5 : 1.0);
            acc += wm * wx * f(g.axis[nodes[a]], g.axis[nodes[b]]) *
                   d.values[slice][g.idx(nodes[a], nodes[b])];
        }
    }
    return acc;
}

int last_slice_for(const JointDensityGrid& density, double T) {
    int slice = density.grid->slice_index(T);
    if (slice < 0) throw std::invalid_argument("pricing: T is not a stored density slice");
    return slice;
}

}  // namespace

PriceResult lookback_put_from_density(const JointDensityGrid& density, double T) {
    if (density.grid->dim != 1) throw std::invalid_argument("pricing: d = 1 densities");
    int slice = last_slice_for(density, T);
    auto payoff = [](double m, double x) { return m - x; };
    double fine = pair_quad(density, slice, 1, payoff);
    PriceResult r;
    r.value = fine;
    r.source = PriceSource::density;
    if (density.grid->n_cells % 2 == 0) {
        double coarse = pair_quad(density, slice, 2, payoff);
        r.error = std::abs(fine - coarse);
    } else {
        r.error = 1e-6 * std::abs(fine);
    }
    // Monte Carlo inputs carry statistical noise on top of the quadrature.
    if (density.provenance == Provenance::monte_carlo) r.error = std::max(r.error, 5e-3);
    return r;
}

PriceResult lookback_put_from_batch(const PathBatch& batch) {
    if (batch.n_paths == 0) throw std::invalid_argument("pricing: empty batch");
    double s = 0.0, s2 = 0.0;
    for (std::size_t p = 0; p < batch.n_paths; ++p) {
        double v = batch.sup[p] - batch.terminal[p * batch.dim];
        s += v;
        s2 += v * v;
    }
    PriceResult r;
    r.source = PriceSource::monte_carlo;
    r.value = s / batch.n_paths;
    double var = std::max(0.0, s2 / batch.n_paths - r.value * r.value);
    r.error = std::sqrt(var / batch.n_paths);
    return r;
}

PriceResult barrier_touch_prob_from_density(const JointDensityGrid& density, double T, double L) {
    if (density.grid->dim != 1) throw std::invalid_argument("pricing: d = 1 densities");
    int slice = last_slice_for(density, T);
    auto indicator = [L](double m, double) { return m >= L ? 1.0 : 0.0; };
    double fine = pair_quad(density, slice, 1, indicator);
    PriceResult r;
    r.value = std::min(1.0, std::max(0.0, fine));
    r.source = PriceSource::density;
    if (density.grid->n_cells % 2 == 0)
        r.error = std::abs(fine - pair_quad(density, slice, 2, indicator)) +
                  density.grid->h();  // indicator edge: one-cell uncertainty
    else
        r.error = density.grid->h();
    if (density.provenance == Provenance::monte_carlo) r.error = std::max(r.error, 5e-3);
    return r;
}

PriceResult barrier_touch_prob_from_batch(const PathBatch& batch, double L) {
    if (batch.n_paths == 0) throw std::invalid_argument("pricing: empty batch");
    std::size_t hits = 0;
    for (std::size_t p = 0; p < batch.n_paths; ++p)
        if (batch.sup[p] >= L) ++hits;
    PriceResult r;
    r.source = PriceSource::monte_carlo;
    r.value = static_cast<double>(hits) / batch.n_paths;
    r.error = std::sqrt(std::max(1e-300, r.value * (1.0 - r.value) / batch.n_paths));
    return r;
}

CrossCheck cross_validate(const PriceResult& density_route, const PriceResult& mc_route) {
    CrossCheck c;
    c.density = density_route;
    c.mc = mc_route;
    double combined = std::sqrt(density_route.error * density_route.error +
                                mc_route.error * mc_route.error);
    c.sigma_distance = std::abs(density_route.value - mc_route.value) / std::max(combined, 1e-300);
    c.pass = c.sigma_distance <= 3.0;
    return c;
}

}  // namespace runsup
