#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "runsup/kernels.hpp"
#include "runsup/model.hpp"

namespace runsup {

enum class KernelMode { exact_zero_drift, exact_constant_drift, mc_estimate };

struct GammaPair {
    double gamma;
    double gamma1;
};

// Evaluator for the kernel Gamma = Gamma0 + Gamma1 of the semigroup
// generated by L* f = -B . grad f - f div B + (1/2) Laplacian f.
// Exact closed forms exist for zero and constant drift; anything else goes
// through the Monte Carlo estimate.
class KernelEval {
public:
    KernelEval(const ModelSpec& model, KernelMode mode, KernelEstimateParams params = {});

    KernelMode mode() const { return mode_; }
    const KernelEstimateParams& params() const { return params_; }

    // Heat kernel Gamma0(x, y; t) = phi_d(x - y; t).
    double gamma0(std::span<const double> x, std::span<const double> y, double t) const;

    // (Gamma, Gamma1) for zero/constant drift: Gamma(x,y;t) = phi_d(y - x + mu t; t).
    GammaPair gamma_exact(std::span<const double> x, std::span<const double> y, double t) const;

    // Cell-averaged kernel from weighted hit frequencies of Y^x.
    double gamma_mc(std::span<const double> x, std::span<const double> y_lo,
                    std::span<const double> y_hi, double t, std::size_t n_paths, int n_steps,
                    std::uint64_t seed, bool* low_statistics = nullptr) const;

    // d/dx^1 of Gamma (analytic in exact modes; throws in mc mode).
    double d_gamma_dx1(std::span<const double> x, std::span<const double> y, double t) const;

private:
    const ModelSpec* model_;
    KernelMode mode_;
    KernelEstimateParams params_;
};

struct EnvelopeFit {
    double C_gamma1 = 0.0;    // smallest C with |Gamma1| <= C t^{-d/2+a/2} e^{-|x-y|^2/(ct)}
    double C_dgamma1 = 0.0;   // same for |d_{x^1} Gamma1|, exponent -(d+1)/2 + a/2
    int violations = 0;       // post-fit violations (zero by construction)
    std::size_t n_samples = 0;
};

// Fits the Garroni-Menaldi-style envelope constants over a sample grid of
// (x, y, t) triples; exact constant-drift mode only.
EnvelopeFit gamma_envelope_check(const KernelEval& kernel, std::span<const double> t_values,
                                 double box, int n_space);

// Residual of the mild-solution representation u(t) = int_0^t Q_{t-s} f(s) ds
// against the weak form of u' = L* u + f, for constant drift and a separable
// source f(s, y) = a(s) g(y) built from bumps. Time integrals use n_steps
// trapezoid panels; space integrals are spectrally accurate, so the residual
// measures the time discretization alone.
double ball_representation_residual(const ModelSpec& model, const TestFunction& F,
                                    const Profile1D& g, double t, int n_steps);

// sup_x |Q_t f(x) - f(x)| over a probe grid (strong-continuity proxy).
double q_strong_continuity_gap(const ModelSpec& model, const Profile1D& f, double t,
                               double box, int n_probe);

}  // namespace runsup
