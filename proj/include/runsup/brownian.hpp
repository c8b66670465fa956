#pragma once

#include <memory>
#include <span>

#include "runsup/model.hpp"

namespace runsup {

// Joint density of (M_t, X_t) for standard Brownian motion from x0:
//   2 (2m - x^1 - x0^1) / sqrt(2 pi t^3) exp(-(2m - x^1 - x0^1)^2 / (2t))
//     * phi_{d-1}(x~ - x0~; t)            on m >= max(x^1, x0^1), else 0.
double bm_joint_density(double m, std::span<const double> x, double t, std::span<const double> x0);
double bm_joint_density1(double m, double x1, double t, double x01);

// P(M_t <= m) = 2 Phi((m - x0^1)/sqrt(t)) - 1 for m >= x0^1, else 0.
double bm_sup_cdf(double m, double t, double x01);

// P(M_t <= m, X_t <= x1) for Brownian motion from x01 (d = 1 marginal pair).
double bm_joint_cdf(double m, double x1, double t, double x01);

// d = 1 constant drift via the Girsanov weight exp(mu (x1 - x01) - mu^2 t / 2).
double drifted_bm_joint_density(double m, double x1, double t, double mu, double x01);

// P(M_t <= m, X_t <= x1) for drifted Brownian motion (d = 1, start x01).
double drifted_bm_joint_cdf(double m, double x1, double t, double mu, double x01);

// Gaussian-start closed forms (d = 1, f0 = N(mean, w^2)); the parametrix seed.
double p0_gauss(double m, double x1, double t, double mean, double w);
// P_0(m, a; s) = int_{b <= m} p_0(b, a; s) db.
double p0_gauss_submass(double m, double a, double s, double mean, double w);

// Zero-drift seed p_0 = f0-mixture of bm_joint_density on the grid.
// provenance = exact when the model drift is zero.
JointDensityGrid p0_seed(const ModelSpec& model, std::shared_ptr<const TriangularGrid> grid);

// Exact density of (M_t, X_t) for the model, f0-mixed: zero or constant
// drift only (d = 1 for the drifted case). Throws otherwise.
JointDensityGrid exact_density(const ModelSpec& model, std::shared_ptr<const TriangularGrid> grid);

// f0-mixture of the constant-drift closed form at a point (d = 1 oracle).
double exact_density_value(const ModelSpec& model, double m, double x1, double t);

// Fits the smallest C_T with bm(m,x;t,x0) <= C_T phi_{d+1}(m-x0^1, m-x^1, x~-x0~; 2t)
// over the grid nodes and slices; the fitted envelope constant.
double fit_gaussian_domination(const ModelSpec& model, const JointDensityGrid& density);

// Mass the Gaussian envelope puts outside the truncation box (manifest entry).
double envelope_outside_mass(const ModelSpec& model, const TriangularGrid& grid);

// Reflection-pair kernel of standard Brownian motion from 0: joint density
// K(v, w; tau) of (sup, endpoint) at (v, w), its partial derivatives, the
// level-integrated kernel Q(v, w; tau) = int_{v' <= v} K(v', w; tau) dv'
// and Q's slot derivatives. These are the building blocks of the Volterra
// correction terms.
namespace bmpair {
double density(double v, double w, double tau);      // K
double ddensity_dv(double v, double w, double tau);  // interior derivative
double ddensity_dw(double v, double w, double tau);  // interior derivative
double submax(double v, double w, double tau);       // Q = phi1(w) - phi1(2v - w)
double dsubmax_dv(double v, double w, double tau);   // = K
double dsubmax_dw(double v, double w, double tau);
}  // namespace bmpair

}  // namespace runsup
