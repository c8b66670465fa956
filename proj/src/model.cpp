#include "runsup/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace runsup {

DriftField drift_zero(int d) {
    DriftField f;
    f.name = "zero";
    f.dim = d;
    f.eval = [](std::span<const double>, std::span<double> out) {
        for (auto& v : out) v = 0.0;
    };
    f.partial_kk = [](std::span<const double>, int) { return 0.0; };
    f.sup_norm = 0.0;
    f.div_sup_norm = 0.0;
    return f;
}

DriftField drift_constant(std::vector<double> mu) {
    DriftField f;
    f.name = "constant";
    f.dim = static_cast<int>(mu.size());
    double norm = 0.0;
    for (double m : mu) norm += m * m;
    f.sup_norm = std::sqrt(norm);
    f.div_sup_norm = 0.0;
    f.eval = [mu](std::span<const double>, std::span<double> out) {
        for (std::size_t k = 0; k < mu.size(); ++k) out[k] = mu[k];
    };
    f.partial_kk = [](std::span<const double>, int) { return 0.0; };
    return f;
}

DriftField drift_tanh(int d) {
    DriftField f;
    f.name = "tanh";
    f.dim = d;
    f.sup_norm = 1.0;
    f.div_sup_norm = 1.0;
    f.eval = [](std::span<const double> x, std::span<double> out) {
        out[0] = std::tanh(x[0]);
        for (std::size_t k = 1; k < out.size(); ++k) out[k] = 0.0;
    };
    f.partial_kk = [](std::span<const double> x, int k) {
        if (k != 0) return 0.0;
        double c = std::cosh(x[0]);
        return 1.0 / (c * c);
    };
    return f;
}

double InitialDensity::operator()(std::span<const double> x) const {
    double q = 0.0;
    for (int k = 0; k < dim; ++k) {
        double d = x[k] - mean[k];
        q += d * d;
    }
    return std::exp(-q / (2.0 * width * width)) *
           std::pow(2.0 * M_PI * width * width, -0.5 * dim);
}

InitialDensity gaussian_initial_density(std::vector<double> mean, double width) {
    if (width <= 0.0) throw std::invalid_argument("f0 width must be positive");
    InitialDensity f0;
    f0.dim = static_cast<int>(mean.size());
    f0.mean = std::move(mean);
    f0.width = width;
    f0.l1_norm = 1.0;
    // ||phi||_2 per coordinate is (4 pi w^2)^(-1/4).
    f0.l2_norm = std::pow(4.0 * M_PI * width * width, -0.25 * f0.dim);
    return f0;
}

void ModelSpec::drift_at(std::span<const double> x, std::span<double> out) const {
    drift.eval(x, out);
}

double ModelSpec::partial_kk(std::span<const double> x, int k) const {
    if (drift.partial_kk) return drift.partial_kk(x, k);
    // Central-difference fallback, step scaled by the coordinate size.
    double h = 1e-5 * (1.0 + std::abs(x[k]));
    std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
    xp[k] += h;
    xm[k] -= h;
    std::vector<double> bp(dim), bm(dim);
    drift.eval(xp, bp);
    drift.eval(xm, bm);
    return (bp[k] - bm[k]) / (2.0 * h);
}

double ModelSpec::div_drift(std::span<const double> x) const {
    double acc = 0.0;
    for (int k = 0; k < dim; ++k) acc += partial_kk(x, k);
    return acc;
}

namespace {

std::string point_to_string(std::span<const double> x) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ")";
    return os.str();
}

}  // namespace

ModelSpec build_model(const DriftField& drift, const InitialDensity& f0, int d) {
    if (d < 1 || d > 3) throw std::invalid_argument("dimension must be in {1, 2, 3}");
    if (drift.dim != d || f0.dim != d)
        throw std::invalid_argument("drift/f0 dimension does not match model dimension");
    if (!drift.eval) throw std::invalid_argument("drift descriptor not evaluable");
    if (f0.width <= 0.0) throw std::invalid_argument("f0 not normalizable: width must be positive");

    ModelSpec m;
    m.dim = d;
    m.drift = drift;
    m.f0 = f0;
    m.numeric_derivatives = !static_cast<bool>(drift.partial_kk);
    m.name = drift.name;

    // Dense sample sweep: validate bounds and classify the drift.
    const int n_samples = 41;
    const double span = 8.0;
    bool all_zero = true, all_constant = true;
    std::vector<double> b0(d), b(d), x(d);
    bool have_b0 = false;
    double max_b = 0.0, max_div = 0.0;
    std::vector<int> ticks(d, 0);
    // Sweep a full tensor grid for d = 1, axis sweeps plus random-ish diagonal for d > 1.
    auto probe = [&](std::span<const double> pt) {
        drift.eval(pt, b);
        double norm = 0.0;
        for (double v : b) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > drift.sup_norm + 1e-9)
            throw std::invalid_argument("drift sample above declared bound at " +
                                        point_to_string(pt));
        max_b = std::max(max_b, norm);
        double div = 0.0;
        for (int k = 0; k < d; ++k) {
            double pk = drift.partial_kk ? drift.partial_kk(pt, k) : 0.0;
            div += pk;
        }
        if (drift.partial_kk && std::abs(div) > drift.div_sup_norm + 1e-9)
            throw std::invalid_argument("divergence sample above declared bound at " +
                                        point_to_string(pt));
        max_div = std::max(max_div, std::abs(div));
        if (norm > 1e-14) all_zero = false;
        if (!have_b0) {
            b0 = b;
            have_b0 = true;
        } else {
            for (int k = 0; k < d; ++k)
                if (std::abs(b[k] - b0[k]) > 1e-12) all_constant = false;
        }
    };
    if (d == 1) {
        for (int i = 0; i < n_samples; ++i) {
            x[0] = -span + 2.0 * span * i / (n_samples - 1);
            probe(x);
        }
    } else {
        for (int axis = 0; axis < d; ++axis)
            for (int i = 0; i < n_samples; ++i) {
                for (int k = 0; k < d; ++k) x[k] = 0.0;
                x[axis] = -span + 2.0 * span * i / (n_samples - 1);
                probe(x);
            }
        for (int i = 0; i < n_samples; ++i) {
            for (int k = 0; k < d; ++k) x[k] = (-span + 2.0 * span * i / (n_samples - 1)) * (k % 2 ? -0.7 : 1.0);
            probe(x);
        }
    }

    m.drift_bound = drift.sup_norm;
    m.divergence_bound = drift.div_sup_norm;
    if (all_zero) {
        m.drift_kind = DriftKind::zero;
    } else if (all_constant) {
        m.drift_kind = DriftKind::constant;
        m.constant_mu = b0;
    } else {
        m.drift_kind = DriftKind::general;
    }
    return m;
}

std::size_t TriangularGrid::slice_size() const {
    std::size_t n = axis.size() * axis.size();
    if (dim == 2) n *= x2_axis.size();
    return n;
}

int TriangularGrid::slice_index(double t, double tol) const {
    for (std::size_t k = 0; k < times.size(); ++k)
        if (std::abs(times[k] - t) <= tol * std::max(1.0, horizon)) return static_cast<int>(k);
    return -1;
}

std::shared_ptr<TriangularGrid> make_grid(int dim, double m_box, int n_cells, int n_slices,
                                          double horizon) {
    if (dim < 1 || dim > 2) throw std::invalid_argument("grid supports d in {1, 2}");
    if (m_box <= 0.0 || n_cells < 2 || n_slices < 1 || horizon <= 0.0)
        throw std::invalid_argument("invalid grid parameters");
    auto g = std::make_shared<TriangularGrid>();
    g->dim = dim;
    g->m_box = m_box;
    g->n_cells = n_cells;
    g->horizon = horizon;
    g->axis.resize(n_cells + 1);
    double h = 2.0 * m_box / n_cells;
    for (int i = 0; i <= n_cells; ++i) g->axis[i] = -m_box + h * i;
    if (dim == 2) g->x2_axis = g->axis;
    g->times.resize(n_slices);
    for (int k = 0; k < n_slices; ++k) g->times[k] = horizon * (k + 1) / n_slices;
    return g;
}

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::exact: return "exact";
        case Provenance::parametrix: return "parametrix";
        case Provenance::monte_carlo: return "monte_carlo";
    }
    return "unknown";
}

JointDensityGrid make_density_shell(std::shared_ptr<const TriangularGrid> grid, Provenance prov) {
    JointDensityGrid d;
    d.grid = std::move(grid);
    d.provenance = prov;
    d.values.assign(d.grid->times.size(), std::vector<double>(d.grid->slice_size(), 0.0));
    std::size_t diag_size = d.grid->axis.size();
    if (d.grid->dim == 2) diag_size *= d.grid->x2_axis.size();
    d.diag.assign(d.grid->times.size(), std::vector<double>(diag_size, 0.0));
    return d;
}

std::vector<double> triangular_weights(const TriangularGrid& g) {
    const int n = g.n_axis();
    const double h = g.h();
    std::vector<double> w(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        double wm = h * ((i == 0 || i == n - 1) ? 0.5 : 1.0);
        if (i == 0) {
            // Degenerate row: single diagonal node, zero x-measure.
            continue;
        }
        for (int j = 0; j <= i; ++j) {
            double wx = h * ((j == 0 || j == i) ? 0.5 : 1.0);
            w[g.idx(i, j)] = wm * wx;
        }
    }
    return w;
}

double JointDensityGrid::slice_mass(int k) const {
    const TriangularGrid& g = *grid;
    if (g.dim == 1) {
        std::vector<double> weights = triangular_weights(g);
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * values[k][i];
        return acc;
    }
    // d = 2: triangular weights in (m, x1), trapezoid in x2.
    std::vector<double> w12 = triangular_weights(g);
    const int n = g.n_axis();
    const int n2 = static_cast<int>(g.x2_axis.size());
    const double h2 = g.x2_axis[1] - g.x2_axis[0];
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            double wij = w12[g.idx(i, j)];
            if (wij == 0.0) continue;
            double inner = 0.0;
            for (int j2 = 0; j2 < n2; ++j2) {
                double w2 = h2 * ((j2 == 0 || j2 == n2 - 1) ? 0.5 : 1.0);
                inner += w2 * values[k][g.idx(i, j, j2)];
            }
            acc += wij * inner;
        }
    return acc;
}

double JointDensityGrid::l1_distance(const JointDensityGrid& other) const {
    if (grid.get() != other.grid.get()) throw std::invalid_argument("densities on different grids");
    std::vector<double> w = triangular_weights(*grid);
    double worst = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        double acc = 0.0;
        if (grid->dim == 1) {
            for (std::size_t i = 0; i < w.size(); ++i)
                acc += w[i] * std::abs(values[k][i] - other.values[k][i]);
        } else {
            const int n = grid->n_axis();
            const int n2 = static_cast<int>(grid->x2_axis.size());
            const double h2 = grid->x2_axis[1] - grid->x2_axis[0];
            for (int i = 0; i < n; ++i)
                for (int j = 0; j <= i; ++j)
                    for (int j2 = 0; j2 < n2; ++j2) {
                        double w2 = h2 * ((j2 == 0 || j2 == n2 - 1) ? 0.5 : 1.0);
                        acc += w[grid->idx(i, j)] * w2 *
                               std::abs(values[k][grid->idx(i, j, j2)] -
                                        other.values[k][grid->idx(i, j, j2)]);
                    }
        }
        worst = std::max(worst, acc);
    }
    return worst;
}

void JointDensityGrid::validate(double eps_mass) const {
    for (std::size_t k = 0; k < values.size(); ++k) {
        for (double v : values[k])
            if (!std::isfinite(v)) throw std::runtime_error("density contains non-finite values");
        if (provenance != Provenance::parametrix) {
            for (double v : values[k])
                if (v < 0.0) throw std::runtime_error("negative density value");
        }
        double mass = slice_mass(k);
        if (std::abs(mass - 1.0) > eps_mass)
            throw std::runtime_error("slice mass " + std::to_string(mass) + " outside [1-eps, 1+eps] at slice " +
                                     std::to_string(k));
    }
}

double TestFunction::phi(double m, std::span<const double> x) const {
    return H.f(m) * F_value(x);
}

double TestFunction::dphi_dm(double m, std::span<const double> x) const {
    return H.df(m) * F_value(x);
}

double TestFunction::F_value(std::span<const double> x) const {
    double v = 1.0;
    for (std::size_t k = 0; k < F.size(); ++k) v *= F[k].f(x[k]);
    return v;
}

double TestFunction::F_partial(std::span<const double> x, int k) const {
    double v = 1.0;
    for (std::size_t j = 0; j < F.size(); ++j)
        v *= (static_cast<int>(j) == k) ? F[j].df(x[j]) : F[j].f(x[j]);
    return v;
}

double TestFunction::F_laplacian(std::span<const double> x) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < F.size(); ++k) {
        double v = 1.0;
        for (std::size_t j = 0; j < F.size(); ++j)
            v *= (j == k) ? F[j].ddf(x[j]) : F[j].f(x[j]);
        acc += v;
    }
    return acc;
}

double TestFunction::l_phi(const ModelSpec& model, double m, std::span<const double> x) const {
    std::vector<double> b(model.dim);
    model.drift_at(x, b);
    double adv = 0.0;
    for (int k = 0; k < model.dim; ++k) adv += b[k] * F_partial(x, k);
    return H.f(m) * (adv + 0.5 * F_laplacian(x));
}

TestFunction make_test_function(TestFunction::Kind kind, std::span<const double> center,
                                double radius, int degree) {
    if (radius <= 0.0) throw std::invalid_argument("test function radius must be positive");
    if (center.size() < 2) throw std::invalid_argument("center must have d + 1 entries");
    TestFunction tf;
    tf.kind = kind;
    auto make = [&](double c) {
        return kind == TestFunction::Kind::bump ? bump_profile(c, radius)
                                                : poly_bump_profile(c, radius, degree == 0 ? 2 : degree);
    };
    tf.H = make(center[0]);
    for (std::size_t k = 1; k < center.size(); ++k) tf.F.push_back(make(center[k]));
    std::ostringstream id;
    id << (kind == TestFunction::Kind::bump ? "bump" : "polybump") << "_r" << radius << "_c";
    for (std::size_t k = 0; k < center.size(); ++k) id << (k ? "_" : "") << center[k];
    tf.id = id.str();
    return tf;
}

std::vector<TestFunction> canonical_test_battery(int dim) {
    std::vector<TestFunction> battery;
    const double centers[3][2] = {{0.5, 0.0}, {1.0, 0.5}, {0.0, -0.5}};
    const double radii[2] = {1.0, 2.0};
    for (const auto& c : centers)
        for (double r : radii)
            for (int kind = 0; kind < 2; ++kind) {
                std::vector<double> center(dim + 1, 0.0);
                center[0] = c[0];
                for (int k = 1; k <= dim; ++k) center[k] = c[1];
                battery.push_back(make_test_function(
                    kind == 0 ? TestFunction::Kind::bump : TestFunction::Kind::polynomial_times_bump,
                    center, r, 2));
            }
    return battery;
}

}  // namespace runsup
