#include "runsup/kernels.hpp"

#include <cmath>
#include <stdexcept>

#include "runsup/quadrature.hpp"

namespace runsup {

double phi1(double u, double t) {
    if (t <= 0.0) throw std::domain_error("phi: variance parameter must be positive");
    return std::exp(-u * u / (2.0 * t)) / std::sqrt(2.0 * M_PI * t);
}

double phi(std::span<const double> u, double t) {
    if (t <= 0.0) throw std::domain_error("phi: variance parameter must be positive");
    double q = 0.0;
    for (double ui : u) q += ui * ui;
    double k = static_cast<double>(u.size());
    return std::exp(-q / (2.0 * t)) * std::pow(2.0 * M_PI * t, -0.5 * k);
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double norm_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

void KernelEstimateParams::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
    if (!(C > 0.0 && c > 0.0 && T > 0.0)) throw std::invalid_argument("C, c, T must be positive");
}

ConvolveCheck gaussian_convolve_check(std::span<const double> a, std::span<const double> b,
                                      double s, double r) {
    if (s <= 0.0 || r <= 0.0) throw std::domain_error("variances must be positive");
    if (a.size() != b.size()) throw std::invalid_argument("dimension mismatch");
    std::size_t k = a.size();
    double analytic = 1.0, quadrature = 1.0;
    // The integrand factorizes across coordinates; per coordinate the
    // product of the two Gaussians concentrates at the precision-weighted
    // midpoint with variance s r / (s + r).
    for (std::size_t i = 0; i < k; ++i) {
        analytic *= phi1(b[i] - a[i], r + s);
        double center = (a[i] * r + b[i] * s) / (s + r);
        double sd = std::sqrt(s * r / (s + r));
        double ai = a[i], bi = b[i];
        quadrature *= adaptive_simpson(
            [ai, bi, s, r](double x) { return phi1(x - ai, s) * phi1(x - bi, r); },
            center - 10.0 * sd, center + 10.0 * sd, 1e-13);
    }
    return {analytic, quadrature};
}

double g_alpha_power(int n, double alpha, double t) {
    if (n < 1) throw std::domain_error("g_alpha_power: n must be >= 1");
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::domain_error("g_alpha_power: alpha must be in (0,2)");
    if (t <= 0.0) throw std::domain_error("g_alpha_power: t must be positive");
    double lg = (n * alpha / 2.0 - 1.0) * std::log(t) + n * std::lgamma(alpha / 2.0) -
                std::lgamma(n * alpha / 2.0);
    return std::exp(lg);
}

double log_contraction_bound(int n, double alpha, double C_T, double M_box, double T, int d) {
    if (n < 1) throw std::domain_error("contraction_bound: n must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("contraction_bound: alpha in (0,1)");
    if (!(C_T > 0.0 && M_box > 0.0 && T > 0.0) || d < 1)
        throw std::domain_error("contraction_bound: parameters must be positive");
    return n * std::log(C_T / 2.0) + 0.5 * d * std::log(2.0 * M_box) +
           (n * alpha / 2.0 + 1.0) * std::log(T) + n * std::lgamma(alpha / 2.0) -
           std::lgamma(n * alpha / 2.0);
}

double contraction_bound(int n, double alpha, double C_T, double M_box, double T, int d) {
    return std::exp(log_contraction_bound(n, alpha, C_T, M_box, T, d));
}

int contraction_first_below(double tol, double alpha, double C_T, double M_box, double T, int d,
                            int n_max) {
    if (tol <= 0.0) throw std::domain_error("tolerance must be positive");
    double log_tol = std::log(tol);
    for (int n = 1; n <= n_max; ++n)
        if (log_contraction_bound(n, alpha, C_T, M_box, T, d) < log_tol) return n;
    throw std::runtime_error("contraction bound did not fall below tolerance");
}

namespace {

double raw_bump(double s) { return std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0; }

double raw_bump_d1(double s) {
    if (std::abs(s) >= 1.0) return 0.0;
    double d = 1.0 - s * s;
    return raw_bump(s) * (-2.0 * s / (d * d));
}

double raw_bump_d2(double s) {
    if (std::abs(s) >= 1.0) return 0.0;
    double d = 1.0 - s * s;
    double g1 = -2.0 * s / (d * d);
    double g2 = (-2.0 * d - 8.0 * s * s) / (d * d * d);
    return raw_bump(s) * (g1 * g1 + g2);
}

}  // namespace

double bump_normalizer() {
    static const double a = [] {
        double mass = tanh_sinh([](double u) { return raw_bump(u); }, -1.0, 1.0, 11);
        return 1.0 / mass;
    }();
    return a;
}

Profile1D mollifier(double eps, double center) {
    if (eps <= 0.0) throw std::domain_error("mollifier: width must be positive");
    const double a = bump_normalizer();
    Profile1D p;
    p.center = center;
    p.radius = eps;
    p.f = [a, eps, center](double m) { return a / eps * raw_bump((m - center) / eps); };
    p.df = [a, eps, center](double m) { return a / (eps * eps) * raw_bump_d1((m - center) / eps); };
    p.ddf = [a, eps, center](double m) {
        return a / (eps * eps * eps) * raw_bump_d2((m - center) / eps);
    };
    return p;
}

Profile1D bump_profile(double center, double radius) {
    if (radius <= 0.0) throw std::domain_error("bump_profile: radius must be positive");
    Profile1D p;
    p.center = center;
    p.radius = radius;
    p.f = [center, radius](double x) { return raw_bump((x - center) / radius); };
    p.df = [center, radius](double x) { return raw_bump_d1((x - center) / radius) / radius; };
    p.ddf = [center, radius](double x) {
        return raw_bump_d2((x - center) / radius) / (radius * radius);
    };
    return p;
}

Profile1D poly_bump_profile(double center, double radius, int degree) {
    if (radius <= 0.0) throw std::domain_error("poly_bump_profile: radius must be positive");
    if (degree < 1) return bump_profile(center, radius);
    Profile1D p;
    p.center = center;
    p.radius = radius;
    auto mono = [degree](double s) { return std::pow(s, degree); };
    auto mono1 = [degree](double s) { return degree * std::pow(s, degree - 1); };
    auto mono2 = [degree](double s) {
        return degree < 2 ? 0.0 : degree * (degree - 1) * std::pow(s, degree - 2);
    };
    p.f = [=](double x) {
        double s = (x - center) / radius;
        return mono(s) * raw_bump(s);
    };
    p.df = [=](double x) {
        double s = (x - center) / radius;
        return (mono1(s) * raw_bump(s) + mono(s) * raw_bump_d1(s)) / radius;
    };
    p.ddf = [=](double x) {
        double s = (x - center) / radius;
        return (mono2(s) * raw_bump(s) + 2.0 * mono1(s) * raw_bump_d1(s) + mono(s) * raw_bump_d2(s)) /
               (radius * radius);
    };
    return p;
}

}  // namespace runsup
