#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "runsup/kernels.hpp"

namespace runsup {

enum class DriftKind { zero, constant, general };

// Drift descriptor: named field with declared bounds. `partial_kk` returns
// d_{x^k} B^k (the pieces of div B); when absent a central-difference
// fallback with step 1e-5 (1 + |x|) is used and the model is flagged.
struct DriftField {
    std::string name;
    int dim = 1;
    std::function<void(std::span<const double>, std::span<double>)> eval;
    std::function<double(std::span<const double>, int)> partial_kk;  // may be empty
    double sup_norm = 0.0;
    double div_sup_norm = 0.0;
};

DriftField drift_zero(int d);
DriftField drift_constant(std::vector<double> mu);
DriftField drift_tanh(int d);  // B(x) = (tanh(x^1), 0, ..., 0)

// Isotropic Gaussian initial law N(mean, width^2 I).
struct InitialDensity {
    int dim = 1;
    std::vector<double> mean;
    double width = 1e-3;
    double l1_norm = 1.0;
    double l2_norm = 0.0;
    double operator()(std::span<const double> x) const;
};

InitialDensity gaussian_initial_density(std::vector<double> mean, double width);

struct ModelSpec {
    std::string name;
    int dim = 1;
    DriftField drift;
    DriftKind drift_kind = DriftKind::zero;
    double drift_bound = 0.0;
    double divergence_bound = 0.0;
    InitialDensity f0;
    bool numeric_derivatives = false;
    std::vector<double> constant_mu;  // populated when drift_kind == constant

    void drift_at(std::span<const double> x, std::span<double> out) const;
    double div_drift(std::span<const double> x) const;
    double partial_kk(std::span<const double> x, int k) const;
};

// Validates bounds on a dense sample grid, detects the drift kind, computes
// f0 norms. Throws on non-normalizable f0 or a drift sample above the
// declared bound (the message names the sample point).
ModelSpec build_model(const DriftField& drift, const InitialDensity& f0, int d);

struct TriangularGrid {
    int dim = 1;
    double m_box = 6.0;
    int n_cells = 64;               // cells per axis; nodes = n_cells + 1
    std::vector<double> axis;       // shared m / x^1 nodes (uniform, diagonal on-grid)
    std::vector<double> x2_axis;    // second spatial axis, d = 2 only
    std::vector<double> times;      // 0 < t_1 < ... < t_K = horizon
    double horizon = 1.0;

    int n_axis() const { return static_cast<int>(axis.size()); }
    double h() const { return axis[1] - axis[0]; }
    bool active(int i, int j) const { return i >= j; }  // m_i >= x_j
    std::size_t slice_size() const;
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * axis.size() + j; }
    std::size_t idx(int i, int j, int j2) const {
        return (static_cast<std::size_t>(i) * axis.size() + j) * x2_axis.size() + j2;
    }
    int slice_index(double t, double tol = 1e-9) const;  // -1 if t is not a slice
};

std::shared_ptr<TriangularGrid> make_grid(int dim, double m_box, int n_cells, int n_slices,
                                          double horizon);

enum class Provenance { exact, parametrix, monte_carlo };
const char* provenance_name(Provenance p);

struct JointDensityGrid {
    std::shared_ptr<const TriangularGrid> grid;
    Provenance provenance = Provenance::exact;
    // values[k][idx(i,j[,j2])]; inactive nodes hold zero.
    std::vector<std::vector<double>> values;
    // Diagonal trace p(m, m[, x2]; t): diag[k][i (* n_x2 + j2)].
    std::vector<std::vector<double>> diag;

    double slice_mass(int k) const;
    double value(int k, int i, int j) const { return values[k][grid->idx(i, j)]; }
    // L1 distance to another density on the same grid, max over slices.
    double l1_distance(const JointDensityGrid& other) const;
    void validate(double eps_mass) const;
};

JointDensityGrid make_density_shell(std::shared_ptr<const TriangularGrid> grid, Provenance prov);

// Quadrature weights for the triangular slice: row-wise trapezoid over the
// sub-diagonal x-range with half weight at the diagonal node, composed with
// a trapezoid in m. w(i,j) for d = 1.
std::vector<double> triangular_weights(const TriangularGrid& g);

struct TestFunction {
    enum class Kind { bump, polynomial_times_bump };
    Kind kind = Kind::bump;
    Profile1D H;                 // profile in m
    std::vector<Profile1D> F;    // separable profile per spatial coordinate
    std::string id;

    double phi(double m, std::span<const double> x) const;
    double dphi_dm(double m, std::span<const double> x) const;
    double F_value(std::span<const double> x) const;
    double F_partial(std::span<const double> x, int k) const;
    double F_laplacian(std::span<const double> x) const;
    // (L Phi)(m, x) = sum_k B^k(x) d_{x^k} Phi + 1/2 Laplacian_x Phi.
    double l_phi(const ModelSpec& model, double m, std::span<const double> x) const;
};

// center has d + 1 entries (m first), radius applies per coordinate.
TestFunction make_test_function(TestFunction::Kind kind, std::span<const double> center,
                                double radius, int degree = 0);

// The verifier's canonical battery: 3 centers x 2 radii x 2 kinds.
std::vector<TestFunction> canonical_test_battery(int dim);

}  // namespace runsup
