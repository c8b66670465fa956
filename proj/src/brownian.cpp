#include "runsup/brownian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "runsup/parallel.hpp"
#include "runsup/quadrature.hpp"

namespace runsup {

namespace {

// int_L^inf u exp(-(u - mu)^2 / (2 s2)) du
double trunc_first_moment(double L, double mu, double s2) {
    double z = (L - mu) / std::sqrt(s2);
    return s2 * std::exp(-z * z / 2.0) + mu * std::sqrt(2.0 * M_PI * s2) * norm_sf(z);
}

}  // namespace

double bm_joint_density1(double m, double x1, double t, double x01) {
    if (t <= 0.0) throw std::domain_error("bm_joint_density: t must be positive");
    if (m < x1 || m < x01) return 0.0;
    double u = 2.0 * m - x1 - x01;
    return 2.0 * u / std::sqrt(2.0 * M_PI * t * t * t) * std::exp(-u * u / (2.0 * t));
}

double bm_joint_density(double m, std::span<const double> x, double t, std::span<const double> x0) {
    if (x.size() != x0.size() || x.empty()) throw std::invalid_argument("dimension mismatch");
    double v = bm_joint_density1(m, x[0], t, x0[0]);
    for (std::size_t k = 1; k < x.size(); ++k) v *= phi1(x[k] - x0[k], t);
    return v;
}

double bm_sup_cdf(double m, double t, double x01) {
    if (t <= 0.0) throw std::domain_error("bm_sup_cdf: t must be positive");
    if (m < x01) return 0.0;
    return 2.0 * norm_cdf((m - x01) / std::sqrt(t)) - 1.0;
}

double bm_joint_cdf(double m, double x1, double t, double x01) {
    if (t <= 0.0) throw std::domain_error("bm_joint_cdf: t must be positive");
    if (m < x01) return 0.0;
    double v = m - x01;
    double w = std::min(x1, m) - x01;
    double st = std::sqrt(t);
    double f = norm_cdf(w / st) + norm_cdf((2.0 * v - w) / st) - 1.0;
    return std::max(0.0, f);
}

double drifted_bm_joint_density(double m, double x1, double t, double mu, double x01) {
    double base = bm_joint_density1(m, x1, t, x01);
    if (base == 0.0) return 0.0;
    return base * std::exp(mu * (x1 - x01) - 0.5 * mu * mu * t);
}

double drifted_bm_joint_cdf(double m, double x1, double t, double mu, double x01) {
    if (t <= 0.0) throw std::domain_error("drifted_bm_joint_cdf: t must be positive");
    if (m < x01) return 0.0;
    double v = m - x01;
    double w = std::min(x1, m) - x01;
    double st = std::sqrt(t);
    double f = norm_cdf((w - mu * t) / st) -
               std::exp(2.0 * mu * v) * norm_cdf((w - 2.0 * v - mu * t) / st);
    return std::clamp(f, 0.0, 1.0);
}

double p0_gauss(double m, double x1, double t, double mean, double w) {
    if (t <= 0.0) throw std::domain_error("p0_gauss: t must be positive");
    if (m < x1) return 0.0;
    const double ct = 2.0 / std::sqrt(2.0 * M_PI * t * t * t);
    const double s2 = t * w * w / (t + w * w);
    const double delta = 2.0 * m - x1 - mean;
    const double mu_star = delta * t / (t + w * w);
    const double L = m - x1;
    const double e0 = -delta * delta / (2.0 * (t + w * w));
    return ct / (w * std::sqrt(2.0 * M_PI)) * std::exp(e0) * trunc_first_moment(L, mu_star, s2);
}

double p0_gauss_submass(double m, double a, double s, double mean, double w) {
    if (s <= 0.0) throw std::domain_error("p0_gauss_submass: s must be positive");
    if (m < a) return 0.0;
    const double v2 = s + w * w;
    const double sig_hat = std::sqrt(s * w * w / v2);
    // First term: int_{x0 <= m} phi1(a - x0; s) f0(x0) dx0.
    double mu1 = (a * w * w + mean * s) / v2;
    double term1 = phi1(a - mean, v2) * norm_cdf((m - mu1) / sig_hat);
    // Image term with a -> 2m - a.
    double ar = 2.0 * m - a;
    double mu2 = (ar * w * w + mean * s) / v2;
    double term2 = phi1(ar - mean, v2) * norm_cdf((m - mu2) / sig_hat);
    return std::max(0.0, term1 - term2);
}

JointDensityGrid p0_seed(const ModelSpec& model, std::shared_ptr<const TriangularGrid> grid) {
    if (model.dim != grid->dim) throw std::invalid_argument("model/grid dimension mismatch");
    JointDensityGrid out = make_density_shell(
        grid, model.drift_kind == DriftKind::zero ? Provenance::exact : Provenance::parametrix);
    const TriangularGrid& g = *grid;
    const int n = g.n_axis();
    const double mean = model.f0.mean[0];
    const double w = model.f0.width;

    for (std::size_t k = 0; k < g.times.size(); ++k) {
        double t = g.times[k];
        if (g.dim == 1) {
            parallel_chunks(n, 8, [&](std::size_t r0, std::size_t r1, std::size_t) {
                for (std::size_t i = r0; i < r1; ++i) {
                    for (int j = 0; j <= static_cast<int>(i); ++j) {
                        double v = p0_gauss(g.axis[i], g.axis[j], t, mean, w);
                        if (!std::isfinite(v))
                            throw std::runtime_error("p0_seed: non-finite value at node m=" +
                                                     std::to_string(g.axis[i]) +
                                                     " x=" + std::to_string(g.axis[j]));
                        out.values[k][g.idx(static_cast<int>(i), j)] = v;
                    }
                    out.diag[k][i] = p0_gauss(g.axis[i], g.axis[i], t, mean, w);
                }
            });
        } else {
            const int n2 = static_cast<int>(g.x2_axis.size());
            const double mean2 = model.f0.mean[1];
            parallel_chunks(n, 4, [&](std::size_t r0, std::size_t r1, std::size_t) {
                for (std::size_t i = r0; i < r1; ++i) {
                    for (int j = 0; j <= static_cast<int>(i); ++j) {
                        double first = p0_gauss(g.axis[i], g.axis[j], t, mean, w);
                        for (int j2 = 0; j2 < n2; ++j2)
                            out.values[k][g.idx(static_cast<int>(i), j, j2)] =
                                first * phi1(g.x2_axis[j2] - mean2, t + w * w);
                    }
                    double first_diag = p0_gauss(g.axis[i], g.axis[i], t, mean, w);
                    for (int j2 = 0; j2 < n2; ++j2)
                        out.diag[k][i * n2 + j2] =
                            first_diag * phi1(g.x2_axis[j2] - mean2, t + w * w);
                }
            });
        }
    }
    return out;
}

double exact_density_value(const ModelSpec& model, double m, double x1, double t) {
    if (model.drift_kind == DriftKind::zero)
        return p0_gauss(m, x1, t, model.f0.mean[0], model.f0.width);
    if (model.drift_kind != DriftKind::constant)
        throw std::invalid_argument("exact_density_value: closed form needs zero or constant drift");
    const double mu = model.constant_mu[0];
    const double mean = model.f0.mean[0];
    const double w = model.f0.width;
    double lo = mean - 9.0 * w;
    double hi = std::min(m, mean + 9.0 * w);
    if (hi <= lo) return 0.0;
    return gl_integrate(
        [&](double x0) {
            return drifted_bm_joint_density(m, x1, t, mu, x0) * model.f0(std::span(&x0, 1));
        },
        lo, hi, 64);
}

JointDensityGrid exact_density(const ModelSpec& model, std::shared_ptr<const TriangularGrid> grid) {
    if (model.drift_kind == DriftKind::zero) return p0_seed(model, grid);
    if (model.drift_kind != DriftKind::constant)
        throw std::invalid_argument("exact_density: closed form needs zero or constant drift");
    JointDensityGrid out = make_density_shell(grid, Provenance::exact);
    const TriangularGrid& g = *grid;
    const int n = g.n_axis();
    for (std::size_t k = 0; k < g.times.size(); ++k) {
        double t = g.times[k];
        if (g.dim == 1) {
            parallel_chunks(n, 4, [&](std::size_t r0, std::size_t r1, std::size_t) {
                for (std::size_t i = r0; i < r1; ++i) {
                    for (int j = 0; j <= static_cast<int>(i); ++j)
                        out.values[k][g.idx(static_cast<int>(i), j)] =
                            exact_density_value(model, g.axis[i], g.axis[j], t);
                    out.diag[k][i] = exact_density_value(model, g.axis[i], g.axis[i], t);
                }
            });
        } else {
            const int n2 = static_cast<int>(g.x2_axis.size());
            const double mu2 = model.constant_mu[1];
            const double mean2 = model.f0.mean[1];
            const double w = model.f0.width;
            parallel_chunks(n, 2, [&](std::size_t r0, std::size_t r1, std::size_t) {
                for (std::size_t i = r0; i < r1; ++i) {
                    for (int j = 0; j <= static_cast<int>(i); ++j) {
                        double first = exact_density_value(model, g.axis[i], g.axis[j], t);
                        for (int j2 = 0; j2 < n2; ++j2)
                            out.values[k][g.idx(static_cast<int>(i), j, j2)] =
                                first * phi1(g.x2_axis[j2] - mean2 - mu2 * t, t + w * w);
                    }
                    double first_diag = exact_density_value(model, g.axis[i], g.axis[i], t);
                    for (int j2 = 0; j2 < n2; ++j2)
                        out.diag[k][i * n2 + j2] =
                            first_diag * phi1(g.x2_axis[j2] - mean2 - mu2 * t, t + w * w);
                }
            });
        }
    }
    return out;
}

double fit_gaussian_domination(const ModelSpec& model, const JointDensityGrid& density) {
    const TriangularGrid& g = *density.grid;
    if (g.dim != 1)
        throw std::invalid_argument("fit_gaussian_domination implemented for d = 1");
    const double mean = model.f0.mean[0];
    const double w = model.f0.width;
    double C = 0.0;
    for (std::size_t k = 0; k < g.times.size(); ++k) {
        double t = g.times[k];
        for (int i = 0; i < g.n_axis(); ++i)
            for (int j = 0; j <= i; ++j) {
                double p = density.values[k][g.idx(i, j)];
                if (p <= 0.0) continue;
                double m = g.axis[i], x1 = g.axis[j];
                // f0-mixture of phi_2(m - x0, m - x; 2t).
                double env = phi1(m - x1, 2.0 * t) * phi1(m - mean, 2.0 * t + w * w);
                if (env < 1e-300) continue;
                C = std::max(C, p / env);
            }
    }
    return C;
}

namespace bmpair {

double density(double v, double w, double tau) {
    if (v < std::max(0.0, w)) return 0.0;
    double u = 2.0 * v - w;
    return 2.0 * u / std::sqrt(2.0 * M_PI * tau * tau * tau) * std::exp(-u * u / (2.0 * tau));
}

double ddensity_dv(double v, double w, double tau) {
    if (v < std::max(0.0, w)) return 0.0;
    double u = 2.0 * v - w;
    double c = 2.0 / std::sqrt(2.0 * M_PI * tau * tau * tau);
    return 2.0 * c * (1.0 - u * u / tau) * std::exp(-u * u / (2.0 * tau));
}

double ddensity_dw(double v, double w, double tau) {
    if (v < std::max(0.0, w)) return 0.0;
    double u = 2.0 * v - w;
    double c = 2.0 / std::sqrt(2.0 * M_PI * tau * tau * tau);
    return -c * (1.0 - u * u / tau) * std::exp(-u * u / (2.0 * tau));
}

double submax(double v, double w, double tau) {
    if (v < std::max(0.0, w)) return 0.0;
    return phi1(w, tau) - phi1(2.0 * v - w, tau);
}

double dsubmax_dv(double v, double w, double tau) { return density(v, w, tau); }

double dsubmax_dw(double v, double w, double tau) {
    if (v < std::max(0.0, w)) return 0.0;
    double u = 2.0 * v - w;
    return -(w / tau) * phi1(w, tau) - (u / tau) * phi1(u, tau);
}

}  // namespace bmpair

double envelope_outside_mass(const ModelSpec& model, const TriangularGrid& grid) {
    const double t = grid.horizon;
    const double M = grid.m_box;
    const double mean = model.f0.mean[0];
    const double w = model.f0.width;
    // f0-mixed envelope on the wedge {m >= x}: phi1(m - mean; 2t + w^2)
    // phi1(m - x; 2t), which carries total wedge mass 1/2. The estimate is
    // the fraction of that mass outside the truncation box.
    double inside = gl_integrate(
        [&](double m) {
            double inner = norm_cdf((m + M) / std::sqrt(2.0 * t)) - 0.5;  // x from -M to m
            return phi1(m - mean, 2.0 * t + w * w) * std::max(0.0, inner);
        },
        -M, M, 256);
    double outside = 1.0 - inside / 0.5;
    if (grid.dim == 2) {
        double inside2 = norm_cdf((M - model.f0.mean[1]) / std::sqrt(2.0 * t + w * w)) -
                         norm_cdf((-M - model.f0.mean[1]) / std::sqrt(2.0 * t + w * w));
        outside = 1.0 - (inside / 0.5) * inside2;
    }
    return std::max(0.0, outside);
}

}  // namespace runsup
