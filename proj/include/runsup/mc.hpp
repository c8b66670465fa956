#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "runsup/model.hpp"

namespace runsup {

struct PathBatch {
    std::uint64_t seed = 0;
    int dim = 1;
    double horizon = 1.0;
    int n_steps = 1;
    bool bridge = true;
    std::size_t n_paths = 0;
    std::vector<double> sup;      // M_T per path
    std::vector<double> terminal; // X_T, n_paths * dim
    std::vector<double> weight;   // exp(-int div B); all 1 when div B == 0
    std::size_t n_excluded = 0;
};

// Euler scheme with per-path Philox streams. With bridge_correction each
// step's supremum contribution is the exact Brownian-bridge maximum sample
//   M_step = ((a + b) + sqrt((b - a)^2 - 2 dt ln U)) / 2.
// Paths hitting non-finite state are excluded; an exclusion rate above 0.1%
// aborts the run.
PathBatch simulate(const ModelSpec& model, double T, int n_steps, std::size_t n_paths,
                   bool bridge_correction, std::uint64_t seed);

// One bridge-maximum sample for endpoints a, b over a step of length dt.
double bridge_max_sample(double a, double b, double dt, double u);

enum class DensityEstimator { histogram, kernel_smoothed };

struct EstimateInfo {
    double escaped_mass = 0.0;     // fraction of paths outside the grid box
    double smoothing_leakage = 0.0;
};

// Histogram (cells centered on grid nodes, diagonal cells clipped to T) or
// Gaussian-kernel estimate of the joint density at the slice matching the
// batch horizon. d = 1.
JointDensityGrid estimate_density(const PathBatch& batch,
                                  std::shared_ptr<const TriangularGrid> grid,
                                  DensityEstimator method, EstimateInfo* info = nullptr);

// Cell-count histogram over explicit edges (for oracle comparisons).
struct CellHistogram {
    std::vector<double> m_edges, x_edges;
    std::vector<std::uint64_t> counts;  // (n_m_cells) x (n_x_cells), row-major in m
    std::size_t total = 0;
    std::uint64_t& at(std::size_t im, std::size_t jx) {
        return counts[im * (x_edges.size() - 1) + jx];
    }
};
CellHistogram histogram2d(const PathBatch& batch, std::span<const double> m_edges,
                          std::span<const double> x_edges);

struct McValue {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

// Q_t(f)(x) = E[f(Y_t^x) exp(-int_0^t div B(Y_u^x) du)] with dY = -B(Y)dt + dW;
// trapezoidal exponent along the Euler path.
McValue feynman_kac(const ModelSpec& model, const std::function<double(std::span<const double>)>& f,
                    std::span<const double> x, double t, std::size_t n_paths, int n_steps,
                    std::uint64_t seed);

// Flat binary persistence (fixed-width records) plus a JSON manifest sidecar.
void save_path_batch(const std::string& path, const PathBatch& batch);
PathBatch load_path_batch(const std::string& path);

}  // namespace runsup
