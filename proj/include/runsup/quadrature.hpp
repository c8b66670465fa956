#pragma once

#include <functional>
#include <vector>

namespace runsup {

using Fn1 = std::function<double(double)>;

// Adaptive Simpson on [a, b] with absolute tolerance.
double adaptive_simpson(const Fn1& f, double a, double b, double tol, int max_depth = 40);

struct QuadRule {
    std::vector<double> x;
    std::vector<double> w;
};

// Gauss-Legendre on [-1, 1]; cached per order.
const QuadRule& gauss_legendre(int n);
// Gauss-Hermite for weight exp(-z^2) on the real line; cached per order.
const QuadRule& gauss_hermite(int n);

// int_a^b f via an n-point Gauss-Legendre rule.
double gl_integrate(const Fn1& f, double a, double b, int n);

// int f(x) phi(x; mean, sd) dx by Gauss-Hermite, doubling the order from 8
// until the result moves by less than tol (or 256 nodes).
double gauss_density_integrate(const Fn1& f, double mean, double sd, double tol = 1e-8);

// tanh-sinh (double exponential) rule on (a, b); handles integrable endpoint
// singularities like x^(alpha-1). Abscissae near an endpoint are formed from
// the stable distance-to-endpoint, which is only representable without
// rounding when that endpoint is 0 -- put singular endpoints there.
double tanh_sinh(const Fn1& f, double a, double b, int levels = 9);

// int_0^t f with possible algebraic singularities at both 0 and t: split at
// t/2 with each half parametrized by its distance to the singular endpoint,
// lower(s) = f(s) and upper(u) = f(t - u), both on (0, t/2]. Writing the
// halves in offset form keeps the singular factor's argument exact.
double tanh_sinh_split(const Fn1& lower, const Fn1& upper, double t, int levels = 10);

}  // namespace runsup
