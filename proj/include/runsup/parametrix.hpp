#pragma once

#include <memory>
#include <string>
#include <vector>

#include "runsup/model.hpp"

namespace runsup {

struct SolverSettings {
    int max_iter = 12;
    double tol = 1e-6;            // L1 norm of the Picard increment
    double alpha = 0.5;           // Hoelder exponent for the reported bound sequence
    double kernel_cutoff = 1e-12; // spatial truncation of the Gaussian kernels
    double eps_mass = 0.02;       // mass gate on the converged output
    bool check_output = true;
};

struct VolterraIterate {
    JointDensityGrid density;
    int index = 0;
    double increment_l1 = 0.0;
    double increment_sup = 0.0;
};

struct ConvergenceReport {
    std::vector<double> increment_l1;
    std::vector<double> increment_sup;
    std::vector<double> bound_sequence;  // b_n scaled to the first observed increment
    double fitted_CT = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<std::string> warnings;
};

// One alpha / beta correction term for derivative slot k (0 = the m slot,
// 1..d = spatial slots); the drift weight is B^1 for k in {0, 1} and B^k
// otherwise. Time integration runs over the iterate's stored slices, with
// the initial [0, t_1) panel closed against the Brownian seed.
JointDensityGrid apply_alpha_term(const JointDensityGrid& iterate, const ModelSpec& model, int k);
JointDensityGrid apply_beta_term(const JointDensityGrid& iterate, const ModelSpec& model, int k);

// Full drift correction  sum_k (alpha_k + beta_k) applied to the iterate.
JointDensityGrid apply_correction(const JointDensityGrid& iterate, const ModelSpec& model);

// Picard iteration p_{n+1} = p_0 - correction(p_n) from p_0 = Brownian seed.
// Throws on divergence (three consecutive non-decreasing increments); the
// report is filled in either case when provided.
JointDensityGrid parametrix_solve(const ModelSpec& model,
                                  std::shared_ptr<const TriangularGrid> grid,
                                  const SolverSettings& settings,
                                  ConvergenceReport* report = nullptr);

}  // namespace runsup
