#pragma once

#include <cstdint>
#include <string>

#include "runsup/mc.hpp"
#include "runsup/model.hpp"

namespace runsup {

enum class PriceSource { density, monte_carlo };

struct PriceResult {
    double value = 0.0;
    double error = 0.0;  // quadrature estimate or 3-sigma-ready std error
    PriceSource source = PriceSource::density;
};

// E[M_T - X_T^1] from a density grid (T must be the last stored slice).
PriceResult lookback_put_from_density(const JointDensityGrid& density, double T);
// Sample-mean route.
PriceResult lookback_put_from_batch(const PathBatch& batch);

// P(M_T >= L).
PriceResult barrier_touch_prob_from_density(const JointDensityGrid& density, double T, double L);
PriceResult barrier_touch_prob_from_batch(const PathBatch& batch, double L);

struct CrossCheck {
    PriceResult density;
    PriceResult mc;
    double sigma_distance = 0.0;  // |diff| / sqrt(err_d^2 + err_mc^2)
    bool pass = true;             // within 3 sigma
};

CrossCheck cross_validate(const PriceResult& density_route, const PriceResult& mc_route);

}  // namespace runsup
