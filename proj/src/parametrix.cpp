#include "runsup/parametrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "runsup/brownian.hpp"
#include "runsup/kernels.hpp"
#include "runsup/parallel.hpp"
#include "runsup/quadrature.hpp"

namespace runsup {

namespace {

// Slot weights: wv for the m slot, ww1 / ww2 for x^1 / x^2. The combined
// alpha kernel in the first pair of slots is
//   wv dK/dv + ww1 dK/dw = (2 wv - ww1) c3 (1 - u^2/tau) e^{-u^2/(2 tau)},
// and the combined beta kernel (slot derivatives of the integrated kernel Q)
//   (2 wv - ww1) (u/tau) phi1(u) - ww1 (w/tau) phi1(w),
// with u = 2m - x^1 - a^1, w = x^1 - a^1.
struct TermSelect {
    bool alpha = true;
    bool beta = true;
    double wv = 1.0;
    double ww1 = 1.0;
    double ww2 = 1.0;
};

struct SPoint {
    double s;
    double weight;
    enum class Src { seed, slice, lerp } src;
    int idx = 0;       // slice index (src == slice) or lower slice (lerp)
    double lambda = 0; // lerp fraction toward idx + 1
};

// Time quadrature for the Volterra integral int_0^{t_k} G(s) ds. G grows
// like (t_k - s)^{-1/2} toward s = t_k, so every slice panel is integrated
// in the substituted variable u = sqrt(t_k - s) (per-panel Gauss rules, the
// singular panel getting extra nodes); [0, t_1] closes against the seed.
std::vector<SPoint> time_plan(const std::vector<double>& times, int k) {
    std::vector<SPoint> plan;
    const double t = times[k];
    if (k == 0) {
        const QuadRule& r = gauss_legendre(8);
        for (int q = 0; q < 8; ++q) {
            double theta = 0.25 * M_PI * (r.x[q] + 1.0);
            double s = t * std::sin(theta) * std::sin(theta);
            double w = r.w[q] * 0.25 * M_PI * t * std::sin(2.0 * theta);
            plan.push_back({s, w, SPoint::Src::seed, 0, 0.0});
        }
        return plan;
    }
    const double dt = times[1] - times[0];
    {
        const QuadRule& r = gauss_legendre(4);
        for (int q = 0; q < 4; ++q) {
            double s = 0.5 * times[0] * (r.x[q] + 1.0);
            plan.push_back({s, r.w[q] * 0.5 * times[0], SPoint::Src::seed, 0, 0.0});
        }
    }
    for (int j = 0; j < k; ++j) {
        // panel [times[j], times[j+1]] in u-space: [sqrt(t - times[j+1]), sqrt(t - times[j])]
        double u_hi = std::sqrt(t - times[j]);
        double u_lo = (j + 1 == k) ? 0.0 : std::sqrt(t - times[j + 1]);
        int order = (j + 1 == k) ? 4 : 2;
        const QuadRule& r = gauss_legendre(order);
        for (int q = 0; q < order; ++q) {
            double u = 0.5 * (u_lo + u_hi) + 0.5 * (u_hi - u_lo) * r.x[q];
            double s = t - u * u;
            double lambda = (s - times[j]) / dt;
            plan.push_back({s, r.w[q] * 0.5 * (u_hi - u_lo) * 2.0 * u, SPoint::Src::lerp, j,
                            lambda});
        }
    }
    return plan;
}

// Antiderivative tables over a contiguous node range, in the kernel variable.
// Three moments per family: the alpha kernel behaves like a derivative of a
// delta at small tau, and piecewise-quadratic product integration is what
// keeps the recovered derivative second-order accurate there.
struct FamilyTables {
    // alpha family c3 (1 - z^2/tau) e^{-z^2/(2 tau)}: F0, F1, F2
    // U family (z/tau) phi1(z; tau): G0, G1, G2
    // phi family phi1(z; tau): H0, H1, H2
    std::vector<double> F0, F1, F2, G0, G1, G2, H0, H1, H2;
};

void fill_tables(FamilyTables& tb, const std::vector<double>& z, double tau, bool want_alpha,
                 bool want_u, bool want_phi) {
    const std::size_t n = z.size();
    const double c3 = 2.0 / std::sqrt(2.0 * M_PI * tau * tau * tau);
    const double inv_s2pt = 1.0 / std::sqrt(2.0 * M_PI * tau);
    const double inv_sqrt_tau = 1.0 / std::sqrt(tau);
    const double sqrt_2pit = std::sqrt(2.0 * M_PI * tau);
    if (want_alpha) {
        tb.F0.resize(n);
        tb.F1.resize(n);
        tb.F2.resize(n);
    }
    if (want_u) {
        tb.G0.resize(n);
        tb.G1.resize(n);
        tb.G2.resize(n);
    }
    if (want_phi) {
        tb.H0.resize(n);
        tb.H1.resize(n);
        tb.H2.resize(n);
    }
    for (std::size_t q = 0; q < n; ++q) {
        double zz = z[q];
        double e = std::exp(-zz * zz / (2.0 * tau));
        double cdf = (want_alpha || want_u || want_phi) ? norm_cdf(zz * inv_sqrt_tau) : 0.0;
        if (want_alpha) {
            tb.F0[q] = c3 * zz * e;
            tb.F1[q] = c3 * (zz * zz + tau) * e;
            tb.F2[q] = c3 * (zz * (zz * zz + 2.0 * tau) * e - 2.0 * tau * sqrt_2pit * cdf);
        }
        if (want_u) {
            tb.G0[q] = -e * inv_s2pt;
            tb.G1[q] = -zz * e * inv_s2pt + cdf;
            tb.G2[q] = -(zz * zz + 2.0 * tau) * e * inv_s2pt;
        }
        if (want_phi) {
            tb.H0[q] = cdf;
            tb.H1[q] = -tau * e * inv_s2pt;
            tb.H2[q] = tau * (-zz * e * inv_s2pt + cdf);
        }
    }
}

// int over the node range of Psi(a) * family(z(a)) da with z = z0 - a
// (uniform spacing h in both), Psi reconstructed piecewise-quadratically
// from consecutive node triples; (A0, A1, A2) are the family antiderivative
// tables int z^j f(z) dz at the nodes. A leftover segment at the far (small
// kernel) edge falls back to linear.
double product_integrate(const std::vector<double>& psi, const std::vector<double>& z,
                         const std::vector<double>& A0, const std::vector<double>& A1,
                         const std::vector<double>& A2, double h) {
    const std::size_t n = psi.size();
    if (n < 2) return 0.0;
    double acc = 0.0;
    std::size_t start = 0;
    if (n % 2 == 0) {
        // linear leftover on the first segment
        double sigma = (psi[1] - psi[0]) / h;
        double a_coef = psi[0] + sigma * z[0];
        acc += a_coef * (A0[0] - A0[1]) - sigma * (A1[0] - A1[1]);
        start = 1;
    }
    for (std::size_t q = start; q + 2 <= n - 1; q += 2) {
        // quadratic through nodes q, q+1, q+2 centered at z[q+1]
        double zc = z[q + 1];
        double b = (psi[q] - psi[q + 2]) / (2.0 * h);
        double c = (psi[q] - 2.0 * psi[q + 1] + psi[q + 2]) / (2.0 * h * h);
        double d0 = A0[q] - A0[q + 2];
        double d1 = A1[q] - A1[q + 2];
        double d2 = A2[q] - A2[q + 2];
        acc += psi[q + 1] * d0 + b * (d1 - zc * d0) + c * (d2 - 2.0 * zc * d1 + zc * zc * d0);
    }
    return acc;
}

struct RowCache {
    std::vector<double> p;  // p(m_i, a; s) over a-nodes (d=1) or slab (d=2)
    std::vector<double> P;  // int_{b <= m_i} p(b, a; s) db
    // scratch buffers reused across eval calls
    std::vector<double> z, zw, psiA, psiB;
    FamilyTables tb, tbw;
};

// Column-cumulative sub-diagonal mass for every slice: P[k][idx(i,j)].
std::vector<std::vector<double>> submass_all(const JointDensityGrid& p) {
    const TriangularGrid& g = *p.grid;
    const int n = g.n_axis();
    std::vector<std::vector<double>> P(p.values.size());
    const double h = g.h();
    if (g.dim == 1) {
        for (std::size_t k = 0; k < p.values.size(); ++k) {
            P[k].assign(g.slice_size(), 0.0);
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                double prev = p.values[k][g.idx(j, j)];
                for (int i = j + 1; i < n; ++i) {
                    double cur = p.values[k][g.idx(i, j)];
                    acc += 0.5 * h * (prev + cur);
                    P[k][g.idx(i, j)] = acc;
                    prev = cur;
                }
            }
        }
    } else {
        const int n2 = static_cast<int>(g.x2_axis.size());
        for (std::size_t k = 0; k < p.values.size(); ++k) {
            P[k].assign(g.slice_size(), 0.0);
            for (int j = 0; j < n; ++j)
                for (int j2 = 0; j2 < n2; ++j2) {
                    double acc = 0.0;
                    double prev = p.values[k][g.idx(j, j, j2)];
                    for (int i = j + 1; i < n; ++i) {
                        double cur = p.values[k][g.idx(i, j, j2)];
                        acc += 0.5 * h * (prev + cur);
                        P[k][g.idx(i, j, j2)] = acc;
                        prev = cur;
                    }
                }
        }
    }
    return P;
}

struct Engine1D {
    const ModelSpec* model;
    const TriangularGrid* g;
    const SolverSettings* st;
    TermSelect sel;
    const JointDensityGrid* p;
    const std::vector<std::vector<double>>* P;
    std::vector<double> drift_nodes;

    void build_row(int i, const SPoint& sp, RowCache& row) const {
        const int n = g->n_axis();
        row.p.assign(n, 0.0);
        row.P.assign(n, 0.0);
        const double m = g->axis[i];
        const double mean = model->f0.mean[0];
        const double w0 = model->f0.width;
        switch (sp.src) {
            case SPoint::Src::seed:
                for (int j = 0; j <= i; ++j) {
                    row.p[j] = p0_gauss(m, g->axis[j], sp.s, mean, w0);
                    row.P[j] = p0_gauss_submass(m, g->axis[j], sp.s, mean, w0);
                }
                break;
            case SPoint::Src::slice:
                for (int j = 0; j <= i; ++j) {
                    row.p[j] = p->values[sp.idx][g->idx(i, j)];
                    row.P[j] = (*P)[sp.idx][g->idx(i, j)];
                }
                break;
            case SPoint::Src::lerp: {
                double l = sp.lambda;
                int k0 = sp.idx;
                for (int j = 0; j <= i; ++j) {
                    row.p[j] = (1.0 - l) * p->values[k0][g->idx(i, j)] +
                               l * p->values[k0 + 1][g->idx(i, j)];
                    row.P[j] = (1.0 - l) * (*P)[k0][g->idx(i, j)] + l * (*P)[k0 + 1][g->idx(i, j)];
                }
                break;
            }
        }
    }

    // G(s) for target node (i, j) given the row cache at source time s.
    double eval(int i, int j, double tau, RowCache& row) const {
        const double m = g->axis[i];
        const double x = g->axis[j];
        const double h = g->h();
        const double a0 = 2.0 * m - x;
        const double R = std::sqrt(2.0 * tau * std::log(1.0 / st->kernel_cutoff));
        const double cA = 2.0 * sel.wv - sel.ww1;
        const double cW = -sel.ww1;
        double acc = 0.0;

        const bool do_u = (m - x) <= R && cA != 0.0;
        if (do_u && (sel.alpha || sel.beta)) {
            int lo = std::max(0, static_cast<int>(std::floor((a0 - R - g->axis[0]) / h)));
            int hi = i;
            if (lo < hi) {
                std::size_t nw = hi - lo + 1;
                row.z.resize(nw);
                for (std::size_t q = 0; q < nw; ++q) row.z[q] = a0 - g->axis[lo + q];
                fill_tables(row.tb, row.z, tau, sel.alpha, sel.beta, false);
                if (sel.alpha) {
                    row.psiA.resize(nw);
                    for (std::size_t q = 0; q < nw; ++q)
                        row.psiA[q] = drift_nodes[lo + q] * row.P[lo + q];
                    acc += cA * product_integrate(row.psiA, row.z, row.tb.F0, row.tb.F1, row.tb.F2, h);
                }
                if (sel.beta) {
                    row.psiB.resize(nw);
                    for (std::size_t q = 0; q < nw; ++q)
                        row.psiB[q] = drift_nodes[lo + q] * row.p[lo + q];
                    acc += cA * product_integrate(row.psiB, row.z, row.tb.G0, row.tb.G1, row.tb.G2, h);
                }
            }
        }
        if (sel.beta && cW != 0.0) {
            int lo = std::max(0, static_cast<int>(std::floor((x - R - g->axis[0]) / h)));
            int hi = std::min(i, static_cast<int>(std::ceil((x + R - g->axis[0]) / h)));
            if (lo < hi) {
                std::size_t nw = hi - lo + 1;
                row.zw.resize(nw);
                row.psiB.resize(nw);
                for (std::size_t q = 0; q < nw; ++q) {
                    row.zw[q] = x - g->axis[lo + q];
                    row.psiB[q] = drift_nodes[lo + q] * row.p[lo + q];
                }
                fill_tables(row.tbw, row.zw, tau, false, true, false);
                acc += cW * product_integrate(row.psiB, row.zw, row.tbw.G0, row.tbw.G1, row.tbw.G2, h);
            }
        }
        return acc;
    }
};

struct Engine2D {
    const ModelSpec* model;
    const TriangularGrid* g;
    const SolverSettings* st;
    TermSelect sel;
    const JointDensityGrid* p;
    const std::vector<std::vector<double>>* P;
    std::vector<double> b1_nodes, b2_nodes;  // drift components on the (a1, a2) grid
    bool b2_zero = true;

    std::size_t nid(int j1, int j2) const {
        return static_cast<std::size_t>(j1) * g->x2_axis.size() + j2;
    }

    void build_slab(int i, const SPoint& sp, RowCache& row) const {
        const int n = g->n_axis();
        const int n2 = static_cast<int>(g->x2_axis.size());
        row.p.assign(static_cast<std::size_t>(n) * n2, 0.0);
        row.P.assign(static_cast<std::size_t>(n) * n2, 0.0);
        const double m = g->axis[i];
        const double mean = model->f0.mean[0];
        const double mean2 = model->f0.mean[1];
        const double w0 = model->f0.width;
        if (sp.src == SPoint::Src::seed) {
            for (int j = 0; j <= i; ++j) {
                double pj = p0_gauss(m, g->axis[j], sp.s, mean, w0);
                double Pj = p0_gauss_submass(m, g->axis[j], sp.s, mean, w0);
                for (int j2 = 0; j2 < n2; ++j2) {
                    double f2 = phi1(g->x2_axis[j2] - mean2, sp.s + w0 * w0);
                    row.p[nid(j, j2)] = pj * f2;
                    row.P[nid(j, j2)] = Pj * f2;
                }
            }
            return;
        }
        if (sp.src == SPoint::Src::slice) {
            for (int j = 0; j <= i; ++j)
                for (int j2 = 0; j2 < n2; ++j2) {
                    row.p[nid(j, j2)] = p->values[sp.idx][g->idx(i, j, j2)];
                    row.P[nid(j, j2)] = (*P)[sp.idx][g->idx(i, j, j2)];
                }
            return;
        }
        double l = sp.lambda;
        int k0 = sp.idx;
        for (int j = 0; j <= i; ++j)
            for (int j2 = 0; j2 < n2; ++j2) {
                row.p[nid(j, j2)] = (1.0 - l) * p->values[k0][g->idx(i, j, j2)] +
                                    l * p->values[k0 + 1][g->idx(i, j, j2)];
                row.P[nid(j, j2)] = (1.0 - l) * (*P)[k0][g->idx(i, j, j2)] +
                                    l * (*P)[k0 + 1][g->idx(i, j, j2)];
            }
    }

    double eval(int i, int j1, int j2, double tau, const RowCache& row) const {
        const double m = g->axis[i];
        const double x1 = g->axis[j1];
        const double x2 = g->x2_axis[j2];
        const double h = g->h();
        const double h2 = g->x2_axis[1] - g->x2_axis[0];
        const double a0 = 2.0 * m - x1;
        const double R = std::sqrt(2.0 * tau * std::log(1.0 / st->kernel_cutoff));
        const double cA = 2.0 * sel.wv - sel.ww1;
        const double cW = -sel.ww1;
        const int n2 = static_cast<int>(g->x2_axis.size());

        // a2 window and tables (phi and U families in z2 = x2 - a2).
        int lo2 = std::max(0, static_cast<int>(std::floor((x2 - R - g->x2_axis[0]) / h2)));
        int hi2 = std::min(n2 - 1, static_cast<int>(std::ceil((x2 + R - g->x2_axis[0]) / h2)));
        if (lo2 >= hi2) return 0.0;
        std::size_t nw2 = hi2 - lo2 + 1;
        std::vector<double> z2(nw2);
        for (std::size_t q = 0; q < nw2; ++q) z2[q] = x2 - g->x2_axis[lo2 + q];
        FamilyTables tb2;
        fill_tables(tb2, z2, tau, false, !b2_zero && sel.ww2 != 0.0, true);

        // Contract a2 for a1-window nodes.
        int lo1u = std::max(0, static_cast<int>(std::floor((a0 - R - g->axis[0]) / h)));
        int lo1w = std::max(0, static_cast<int>(std::floor((x1 - R - g->axis[0]) / h)));
        int lo1 = std::min(lo1u, lo1w);
        int hi1 = i;
        if (lo1 >= hi1) return 0.0;
        std::size_t nw1 = hi1 - lo1 + 1;
        std::vector<double> cP1(nw1, 0.0), cp1(nw1, 0.0), cP2(nw1, 0.0), cp2(nw1, 0.0);
        std::vector<double> colP(nw2), colp(nw2);
        const bool want2 = !b2_zero && sel.ww2 != 0.0;
        for (std::size_t q1 = 0; q1 < nw1; ++q1) {
            int j = lo1 + static_cast<int>(q1);
            for (std::size_t q2 = 0; q2 < nw2; ++q2) {
                int jj2 = lo2 + static_cast<int>(q2);
                colP[q2] = b1_nodes[nid(j, jj2)] * row.P[nid(j, jj2)];
                colp[q2] = b1_nodes[nid(j, jj2)] * row.p[nid(j, jj2)];
            }
            cP1[q1] = product_integrate(colP, z2, tb2.H0, tb2.H1, tb2.H2, h2);
            cp1[q1] = product_integrate(colp, z2, tb2.H0, tb2.H1, tb2.H2, h2);
            if (want2) {
                for (std::size_t q2 = 0; q2 < nw2; ++q2) {
                    int jj2 = lo2 + static_cast<int>(q2);
                    colP[q2] = b2_nodes[nid(j, jj2)] * row.P[nid(j, jj2)];
                    colp[q2] = b2_nodes[nid(j, jj2)] * row.p[nid(j, jj2)];
                }
                // phi1'(z2) = -U(z2): negate the U-family moments.
                cP2[q1] = -product_integrate(colP, z2, tb2.G0, tb2.G1, tb2.G2, h2);
                cp2[q1] = -product_integrate(colp, z2, tb2.G0, tb2.G1, tb2.G2, h2);
            }
        }

        // a1 families: u = a0 - a1 and w = x1 - a1.
        std::vector<double> zu(nw1), zw(nw1);
        for (std::size_t q = 0; q < nw1; ++q) {
            zu[q] = a0 - g->axis[lo1 + q];
            zw[q] = x1 - g->axis[lo1 + q];
        }
        FamilyTables tbu, tbw;
        fill_tables(tbu, zu, tau, sel.alpha, true, want2);
        fill_tables(tbw, zw, tau, false, sel.beta, want2 && sel.beta);

        double acc = 0.0;
        if (sel.alpha && cA != 0.0) acc += cA * product_integrate(cP1, zu, tbu.F0, tbu.F1, tbu.F2, h);
        if (sel.alpha && want2) acc += sel.ww2 * 2.0 * product_integrate(cP2, zu, tbu.G0, tbu.G1, tbu.G2, h);
        if (sel.beta && cA != 0.0) acc += cA * product_integrate(cp1, zu, tbu.G0, tbu.G1, tbu.G2, h);
        if (sel.beta && cW != 0.0) acc += cW * product_integrate(cp1, zw, tbw.G0, tbw.G1, tbw.G2, h);
        if (sel.beta && want2)
            acc += sel.ww2 * (product_integrate(cp2, zw, tbw.H0, tbw.H1, tbw.H2, h) -
                              product_integrate(cp2, zu, tbu.H0, tbu.H1, tbu.H2, h));
        return acc;
    }
};

JointDensityGrid correction(const JointDensityGrid& p, const ModelSpec& model,
                            const TermSelect& sel, const SolverSettings& st) {
    const TriangularGrid& g = *p.grid;
    if (model.dim != g.dim) throw std::invalid_argument("model/grid dimension mismatch");
    if (g.dim > 2) throw std::invalid_argument("parametrix correction supports d in {1, 2}");
    const int n = g.n_axis();
    const double dt0 = g.times[0];
    for (std::size_t k = 1; k < g.times.size(); ++k)
        if (std::abs(g.times[k] - g.times[k - 1] - dt0) > 1e-9 * g.horizon)
            throw std::invalid_argument("parametrix correction requires uniform time slices");

    JointDensityGrid out = make_density_shell(p.grid, Provenance::parametrix);
    std::vector<std::vector<double>> P = submass_all(p);

    if (g.dim == 1) {
        Engine1D eng{&model, &g, &st, sel, &p, &P, {}};
        eng.drift_nodes.resize(n);
        std::vector<double> b(1);
        for (int j = 0; j < n; ++j) {
            double a = g.axis[j];
            model.drift_at(std::span(&a, 1), b);
            eng.drift_nodes[j] = b[0];
        }
        for (std::size_t k = 0; k < g.times.size(); ++k) {
            std::vector<SPoint> plan = time_plan(g.times, static_cast<int>(k));
            double t = g.times[k];
            parallel_chunks(n, 2, [&](std::size_t i0, std::size_t i1, std::size_t) {
                RowCache row;
                for (std::size_t i = i0; i < i1; ++i) {
                    for (const SPoint& sp : plan) {
                        eng.build_row(static_cast<int>(i), sp, row);
                        double tau = t - sp.s;
                        for (int j = 0; j <= static_cast<int>(i); ++j)
                            out.values[k][g.idx(static_cast<int>(i), j)] +=
                                sp.weight * eng.eval(static_cast<int>(i), j, tau, row);
                    }
                    out.diag[k][i] = out.values[k][g.idx(static_cast<int>(i), static_cast<int>(i))];
                }
            });
        }
        return out;
    }

    Engine2D eng{&model, &g, &st, sel, &p, &P, {}, {}, true};
    const int n2 = static_cast<int>(g.x2_axis.size());
    eng.b1_nodes.resize(static_cast<std::size_t>(n) * n2);
    eng.b2_nodes.resize(static_cast<std::size_t>(n) * n2);
    std::vector<double> b(2), xpt(2);
    for (int j = 0; j < n; ++j)
        for (int j2 = 0; j2 < n2; ++j2) {
            xpt[0] = g.axis[j];
            xpt[1] = g.x2_axis[j2];
            model.drift_at(xpt, b);
            eng.b1_nodes[eng.nid(j, j2)] = b[0];
            eng.b2_nodes[eng.nid(j, j2)] = b[1];
            if (b[1] != 0.0) eng.b2_zero = false;
        }
    for (std::size_t k = 0; k < g.times.size(); ++k) {
        std::vector<SPoint> plan = time_plan(g.times, static_cast<int>(k));
        double t = g.times[k];
        parallel_chunks(n, 1, [&](std::size_t i0, std::size_t i1, std::size_t) {
            RowCache row;
            for (std::size_t i = i0; i < i1; ++i) {
                for (const SPoint& sp : plan) {
                    eng.build_slab(static_cast<int>(i), sp, row);
                    double tau = t - sp.s;
                    for (int j = 0; j <= static_cast<int>(i); ++j)
                        for (int j2 = 0; j2 < n2; ++j2)
                            out.values[k][g.idx(static_cast<int>(i), j, j2)] +=
                                sp.weight * eng.eval(static_cast<int>(i), j, j2, tau, row);
                }
                for (int j2 = 0; j2 < n2; ++j2)
                    out.diag[k][i * n2 + j2] =
                        out.values[k][g.idx(static_cast<int>(i), static_cast<int>(i), j2)];
            }
        });
    }
    return out;
}

TermSelect select_for_k(int k, int dim) {
    if (k < 0 || k > dim) throw std::invalid_argument("term slot k out of range");
    TermSelect sel;
    sel.wv = (k == 0) ? 1.0 : 0.0;
    sel.ww1 = (k == 1) ? 1.0 : 0.0;
    sel.ww2 = (k == 2) ? 1.0 : 0.0;
    return sel;
}

}  // namespace

JointDensityGrid apply_alpha_term(const JointDensityGrid& iterate, const ModelSpec& model, int k) {
    TermSelect sel = select_for_k(k, model.dim);
    sel.alpha = true;
    sel.beta = false;
    SolverSettings st;
    return correction(iterate, model, sel, st);
}

JointDensityGrid apply_beta_term(const JointDensityGrid& iterate, const ModelSpec& model, int k) {
    TermSelect sel = select_for_k(k, model.dim);
    sel.alpha = false;
    sel.beta = true;
    SolverSettings st;
    return correction(iterate, model, sel, st);
}

JointDensityGrid apply_correction(const JointDensityGrid& iterate, const ModelSpec& model) {
    SolverSettings st;
    return correction(iterate, model, TermSelect{}, st);
}

JointDensityGrid parametrix_solve(const ModelSpec& model,
                                  std::shared_ptr<const TriangularGrid> grid,
                                  const SolverSettings& settings, ConvergenceReport* report) {
    ConvergenceReport local;
    ConvergenceReport& rep = report ? *report : local;
    rep = ConvergenceReport{};

    const double layer_cells = std::sqrt(grid->times[0]) / grid->h();
    if (layer_cells < 2.0)
        throw std::invalid_argument(
            "grid does not resolve the diagonal boundary layer: fewer than 2 cells within "
            "sqrt(t_min) of m = x^1");
    if (layer_cells < 8.0)
        rep.warnings.push_back("diagonal boundary layer thinner than 8 cells (" +
                               std::to_string(layer_cells) + ")");

    JointDensityGrid seed = p0_seed(model, grid);
    if (model.drift_kind == DriftKind::zero) {
        rep.converged = true;
        rep.iterations = 0;
        return seed;
    }

    JointDensityGrid current = seed;
    current.provenance = Provenance::parametrix;
    int rising = 0;
    for (int n = 1; n <= settings.max_iter; ++n) {
        JointDensityGrid corr = correction(current, model, TermSelect{}, settings);
        JointDensityGrid next = seed;
        next.provenance = Provenance::parametrix;
        double sup = 0.0;
        for (std::size_t k = 0; k < next.values.size(); ++k) {
            for (std::size_t q = 0; q < next.values[k].size(); ++q)
                next.values[k][q] -= corr.values[k][q];
            for (std::size_t q = 0; q < next.diag[k].size(); ++q)
                next.diag[k][q] -= corr.diag[k][q];
        }
        double l1 = next.l1_distance(current);
        for (std::size_t k = 0; k < next.values.size(); ++k)
            for (std::size_t q = 0; q < next.values[k].size(); ++q)
                sup = std::max(sup, std::abs(next.values[k][q] - current.values[k][q]));
        rep.increment_l1.push_back(l1);
        rep.increment_sup.push_back(sup);
        rep.iterations = n;
        current = std::move(next);
        if (l1 < settings.tol) {
            rep.converged = true;
            break;
        }
        if (rep.increment_l1.size() >= 2 && l1 >= rep.increment_l1[rep.increment_l1.size() - 2]) {
            if (++rising >= 3) {
                std::string diag = "parametrix iteration diverging; increments:";
                for (double d : rep.increment_l1) diag += " " + std::to_string(d);
                throw std::runtime_error(diag);
            }
        } else {
            rising = 0;
        }
    }

    // Theoretical decay sequence with C_T fitted to the first observed ratio.
    if (rep.increment_l1.size() >= 2 && rep.increment_l1[0] > 0.0) {
        double r1 = rep.increment_l1[1] / rep.increment_l1[0];
        double a = settings.alpha;
        double T = grid->horizon;
        double gamma_ratio = std::exp(std::lgamma(a / 2.0) + std::lgamma(a / 2.0) - std::lgamma(a));
        rep.fitted_CT = 1.2 * 2.0 * r1 / (std::pow(T, a / 2.0) * gamma_ratio);
        double b1 = contraction_bound(1, a, rep.fitted_CT, grid->m_box, T, model.dim);
        for (std::size_t n = 1; n <= rep.increment_l1.size() + 2; ++n)
            rep.bound_sequence.push_back(contraction_bound(static_cast<int>(n), a, rep.fitted_CT,
                                                           grid->m_box, T, model.dim) /
                                         b1 * rep.increment_l1[0]);
    }

    if (settings.check_output) {
        double min_v = 0.0, max_v = 0.0;
        for (const auto& slice : current.values)
            for (double v : slice) {
                min_v = std::min(min_v, v);
                max_v = std::max(max_v, v);
            }
        if (min_v < -1e-6 * std::max(1.0, max_v))
            rep.warnings.push_back("converged density has negative values below tolerance: " +
                                   std::to_string(min_v));
        for (std::size_t k = 0; k < current.values.size(); ++k) {
            double mass = current.slice_mass(k);
            if (std::abs(mass - 1.0) > settings.eps_mass)
                rep.warnings.push_back("slice " + std::to_string(k) + " mass " +
                                       std::to_string(mass) + " outside the eps_mass gate");
        }
    }
    return current;
}

}  // namespace runsup
