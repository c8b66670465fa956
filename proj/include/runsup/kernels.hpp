#pragma once

#include <functional>
#include <span>
#include <utility>

namespace runsup {

// Isotropic Gaussian density phi_k(u; t) = (2 pi t)^{-k/2} exp(-|u|^2 / (2t)).
double phi(std::span<const double> u, double t);
double phi1(double u, double t);

// Standard normal CDF / survival.
double norm_cdf(double z);
double norm_sf(double z);

struct GaussianKernelParams {
    int dim;
    double t;
};

struct KernelEstimateParams {
    double alpha = 0.5;  // Hoelder exponent in (0,1)
    double C = 1.0;      // prefactor (fitted empirically, not given by theory)
    double c = 4.0;      // variance inflation in exp(-|x-y|^2/(c t))
    double T = 1.0;
    void validate() const;
};

// Both sides of the convolution identity
//   int phi_k(x-a; s) phi_k(x-b; r) dx = phi_k(b-a; r+s).
struct ConvolveCheck {
    double analytic;
    double quadrature;
};
ConvolveCheck gaussian_convolve_check(std::span<const double> a, std::span<const double> b,
                                      double s, double r);

// Closed form of the n-fold convolution power of g_alpha(t) = t^{alpha/2 - 1}:
//   g^{*n}(t) = t^{n alpha/2 - 1} Gamma(alpha/2)^n / Gamma(n alpha/2).
double g_alpha_power(int n, double alpha, double t);

// b_n = (C_T/2)^n (2M)^{d/2} T^{n alpha/2 + 1} Gamma(alpha/2)^n / Gamma(n alpha/2).
double log_contraction_bound(int n, double alpha, double C_T, double M_box, double T, int d);
double contraction_bound(int n, double alpha, double C_T, double M_box, double T, int d);
// Smallest n with b_n < tol (searches up to n_max; throws if none).
int contraction_first_below(double tol, double alpha, double C_T, double M_box, double T, int d,
                            int n_max = 100000);

// Scalar profile with two derivatives and compact support.
struct Profile1D {
    std::function<double(double)> f;
    std::function<double(double)> df;
    std::function<double(double)> ddf;
    double center = 0.0;
    double radius = 1.0;  // support [center - radius, center + radius]
};

// Normalization constant a with int a exp(-1/(1-u^2)) du = 1 over (-1,1).
double bump_normalizer();

// chi_eps(m) = (1/eps) chi((m - center)/eps); integrates to 1,
// support [center - eps, center + eps].
Profile1D mollifier(double eps, double center);

// Unnormalized C^infty bump profile exp(-1/(1-s^2)), s = (x-center)/radius,
// with derivatives; the building block for test functions.
Profile1D bump_profile(double center, double radius);
// s^degree * bump, same support.
Profile1D poly_bump_profile(double center, double radius, int degree);

}  // namespace runsup
