#include "runsup/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace runsup {

namespace {

double simpson_step(const Fn1& f, double a, double fa, double b, double fb, double m, double fm,
                    double whole, double tol, int depth) {
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const Fn1& f, double a, double b, double tol, int max_depth) {
    if (a == b) return 0.0;
    double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_step(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

namespace {

QuadRule make_gauss_legendre(int n) {
    QuadRule r;
    r.x.resize(n);
    r.w.resize(n);
    const double eps = 1e-15;
    int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p0 / pp;
            if (std::abs(z - z1) < eps) break;
        }
        r.x[i] = -z;
        r.x[n - 1 - i] = z;
        r.w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        r.w[n - 1 - i] = r.w[i];
    }
    return r;
}

QuadRule make_gauss_hermite(int n) {
    QuadRule r;
    r.x.resize(n);
    r.w.resize(n);
    const double eps = 1e-14;
    const double pim4 = 0.7511255444649425;  // pi^{-1/4}
    int m = (n + 1) / 2;
    double z = 0.0, pp = 0.0;
    for (int i = 0; i < m; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
        else if (i == 1)
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * r.x[0];
        else if (i == 3)
            z = 1.91 * z - 0.91 * r.x[1];
        else
            z = 2.0 * z - r.x[i - 2];
        for (int it = 0; it < 200; ++it) {
            double p0 = pim4, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = z * std::sqrt(2.0 / (j + 1.0)) * p1 - std::sqrt(static_cast<double>(j) / (j + 1.0)) * p2;
            }
            pp = std::sqrt(2.0 * n) * p1;
            double z1 = z;
            z = z1 - p0 / pp;
            if (std::abs(z - z1) < eps) break;
        }
        r.x[i] = z;
        r.x[n - 1 - i] = -z;
        r.w[i] = 2.0 / (pp * pp);
        r.w[n - 1 - i] = r.w[i];
    }
    return r;
}

const QuadRule& cached_rule(int n, std::map<int, QuadRule>& cache, std::mutex& mu,
                            QuadRule (*make)(int)) {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make(n)).first;
    return it->second;
}

}  // namespace

const QuadRule& gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
    static std::map<int, QuadRule> cache;
    static std::mutex mu;
    return cached_rule(n, cache, mu, make_gauss_legendre);
}

const QuadRule& gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");
    static std::map<int, QuadRule> cache;
    static std::mutex mu;
    return cached_rule(n, cache, mu, make_gauss_hermite);
}

double gl_integrate(const Fn1& f, double a, double b, int n) {
    const QuadRule& r = gauss_legendre(n);
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += r.w[i] * f(mid + half * r.x[i]);
    return acc * half;
}

double gauss_density_integrate(const Fn1& f, double mean, double sd, double tol) {
    const double inv_sqrt_pi = 0.5641895835477563;
    double prev = 0.0;
    for (int n = 8; n <= 256; n *= 2) {
        const QuadRule& r = gauss_hermite(n);
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += r.w[i] * f(mean + std::sqrt(2.0) * sd * r.x[i]);
        acc *= inv_sqrt_pi;
        if (n > 8 && std::abs(acc - prev) < tol) return acc;
        prev = acc;
    }
    return prev;
}

double tanh_sinh(const Fn1& f, double a, double b, int levels) {
    // Map (a,b) -> (-1,1), then x = tanh(pi/2 sinh(u)); trapezoid in u.
    // Node arguments are formed from the stable endpoint offset
    // 1 - |x| = 2 / (1 + e^{2y}), which keeps algebraic endpoint
    // singularities resolvable far below machine epsilon in x.
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    if (half == 0.0) return 0.0;
    const double h = 4.0 / (1 << levels);
    double sum = 0.0;
    int quiet = 0;
    for (int k = 0; k * h <= 6.8; ++k) {
        double u = k * h;
        double y = 0.5 * M_PI * std::sinh(u);
        double e = std::exp(-2.0 * y);  // y >= 0
        // cosh(y)^{-2} = 4 e^{-2y} / (1 + e^{-2y})^2;  1 - tanh(y) = 2 e^{-2y} / (1 + e^{-2y})
        double w = 0.5 * M_PI * std::cosh(u) * 4.0 * e / ((1.0 + e) * (1.0 + e));
        double offset = half * 2.0 * e / (1.0 + e);
        double term;
        if (k == 0) {
            term = f(mid);
        } else {
            term = 0.0;
            double xp = b - offset, xm = a + offset;
            if (xp < b) term += f(xp);
            if (xm > a) term += f(xm);
        }
        double contrib = w * term;
        sum += contrib;
        if (k > 0) {
            if (std::abs(contrib) <= 1e-16 * (std::abs(sum) + 1e-300))
                ++quiet;
            else
                quiet = 0;
            if (quiet >= 4) break;
        }
    }
    return sum * half * h;
}

double tanh_sinh_split(const Fn1& lower, const Fn1& upper, double t, int levels) {
    if (t <= 0.0) return 0.0;
    return tanh_sinh(lower, 0.0, 0.5 * t, levels) + tanh_sinh(upper, 0.0, 0.5 * t, levels);
}

}  // namespace runsup
