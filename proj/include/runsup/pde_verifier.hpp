#pragma once

#include <string>
#include <vector>

#include "runsup/dual_semigroup.hpp"
#include "runsup/model.hpp"

namespace runsup {

struct WeakResidualReport {
    std::string phi_id;
    double t = 0.0;
    double lhs = 0.0;             // int Phi p(.; t)
    double initial_term = 0.0;    // int Phi(m, m, x~) f0
    double generator_term = 0.0;  // int_0^t int p L Phi
    double boundary_term = 0.0;   // 1/2 int_0^t int d_m Phi(m,m,x~) p(m,m,x~; s)
    double residual = 0.0;
    double error_estimate = 0.0;
};

// Weak form of the evolution identity for the density of (M, X) against a
// separable compactly supported test function; t must be a stored slice.
WeakResidualReport weak_residual(const JointDensityGrid& p, const ModelSpec& model,
                                 const TestFunction& phi, double t);

// Max |residual| over the canonical battery, with reports.
std::vector<WeakResidualReport> weak_residual_battery(const JointDensityGrid& p,
                                                      const ModelSpec& model, double t);

// d = 1 strong-form boundary identity on the diagonal:
//   B(m) p(m,m;t) - 1/2 (d_1 + d_2) p(m,m;t) - 1/2 d_2 p(m,m;t)
// per diagonal node, one-sided second-order stencils from the interior.
// Nodes too close to the grid edge are skipped (NaN entries).
std::vector<double> strong_boundary_residual(const JointDensityGrid& p, const ModelSpec& model,
                                             double t);

struct XMembershipReport {
    // (a) sup_t int (int |p| dm)^2 dx
    double item_a = 0.0;
    // (b) int_0^T sqrt(int |p(x1,x1,x~;s)|^2 dx) ds
    double item_b = 0.0;
    // (c) int sup_{u>0} p(m, m-u, x~; t) dm dx~ at the last slice,
    //     and the worst deviation of the stored trace from the one-sided limit.
    double item_c_sup_l1 = 0.0;
    double item_c_trace_gap = 0.0;
    // coarse (stride 2) counterparts and divergence flags (fine/coarse growth)
    double coarse_a = 0.0, coarse_b = 0.0, coarse_c = 0.0;
    bool flagged_a = false, flagged_b = false, flagged_c = false;
};

XMembershipReport x_membership(const JointDensityGrid& p, double T);

// Prop.-2-style diagonal identity for q = p1 - p2 (same grid, exact kernel):
//   q(y,y;t) + 1/2 int_0^t d_{x^1} Gamma(y,y;t-s) q(y,y;s) ds   per node.
std::vector<double> diagonal_volterra_residual(const JointDensityGrid& p1,
                                               const JointDensityGrid& p2,
                                               const KernelEval& kernel, double t);

struct ContractionReplay {
    std::vector<double> lhs;    // int_0^T int_{[-M,M]} |q_n| dy dt
    std::vector<double> bound;  // b_n * int_0^T sqrt(int |q_0|^2 dy) ds
    double fitted_CT = 0.0;
};

// Iterates |q_{n+1}|(t) = 1/2 int_0^t |d_x Gamma(tau)| |q_n|(s) ds on the unit
// diagonal profile and compares against the Gamma-function bound sequence
// with the fitted kernel constant.
ContractionReplay replay_diagonal_contraction(const KernelEval& kernel, double alpha, double M_box,
                                              double T, int n_iters, int n_time_steps = 512);

// Weak evolution residual of q_H(x;t) = int_{m >= x^1} H(m) q(m,x;t) dm for
// q = p1 - p2, against the canonical spatial test battery; returns the max
// absolute residual.
double qh_evolution_residual(const JointDensityGrid& p1, const JointDensityGrid& p2,
                             const ModelSpec& model, const Profile1D& H, double t);

// Same quadrature reordering used by the Fubini invariant: the m-integral of
// H(m) p(m, x; t) dm per column with the triangular weight matrix.
std::vector<double> q_h_from_density(const JointDensityGrid& p, const Profile1D& H, int slice);

}  // namespace runsup
