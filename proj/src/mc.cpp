#include "runsup/mc.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "runsup/io.hpp"
#include "runsup/parallel.hpp"
#include "runsup/rng.hpp"

#include "json.hpp"

namespace runsup {

double bridge_max_sample(double a, double b, double dt, double u) {
    double d = b - a;
    return 0.5 * (a + b + std::sqrt(d * d - 2.0 * dt * std::log(u)));
}

PathBatch simulate(const ModelSpec& model, double T, int n_steps, std::size_t n_paths,
                   bool bridge_correction, std::uint64_t seed) {
    if (T <= 0.0) throw std::invalid_argument("simulate: T must be positive");
    if (n_steps < 1 || n_paths < 1) throw std::invalid_argument("simulate: need n_steps, n_paths >= 1");
    const int d = model.dim;
    const double dt = T / n_steps;
    const double sqrt_dt = std::sqrt(dt);

    PathBatch batch;
    batch.seed = seed;
    batch.dim = d;
    batch.horizon = T;
    batch.n_steps = n_steps;
    batch.bridge = bridge_correction;
    batch.n_paths = n_paths;
    batch.sup.assign(n_paths, 0.0);
    batch.terminal.assign(n_paths * d, 0.0);
    batch.weight.assign(n_paths, 1.0);

    std::vector<std::uint8_t> bad(n_paths, 0);

    parallel_chunks(n_paths, 4096, [&](std::size_t p0, std::size_t p1, std::size_t) {
        std::vector<double> x(d), b(d);
        for (std::size_t p = p0; p < p1; ++p) {
            PathStream rng(seed, p);
            for (int k = 0; k < d; ++k)
                x[k] = model.f0.mean[k] + model.f0.width * rng.next_normal();
            double sup = x[0];
            double div_acc = 0.5 * model.div_drift(x);  // trapezoid ends get half weight
            for (int step = 0; step < n_steps; ++step) {
                model.drift_at(x, b);
                double x1_old = x[0];
                for (int k = 0; k < d; ++k) x[k] += b[k] * dt + sqrt_dt * rng.next_normal();
                if (bridge_correction) {
                    double u = rng.next_uniform();
                    sup = std::max(sup, bridge_max_sample(x1_old, x[0], dt, u));
                } else {
                    sup = std::max(sup, x[0]);
                }
                div_acc += (step + 1 < n_steps ? 1.0 : 0.5) * model.div_drift(x);
                if (!std::isfinite(x[0]) || !std::isfinite(sup)) {
                    bad[p] = 1;
                    break;
                }
            }
            if (bad[p]) continue;
            batch.sup[p] = sup;
            for (int k = 0; k < d; ++k) batch.terminal[p * d + k] = x[k];
            batch.weight[p] = std::exp(-div_acc * dt);
        }
    });

    // Drop excluded paths, preserving path order.
    std::size_t keep = 0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        if (bad[p]) continue;
        if (keep != p) {
            batch.sup[keep] = batch.sup[p];
            for (int k = 0; k < d; ++k) batch.terminal[keep * d + k] = batch.terminal[p * d + k];
            batch.weight[keep] = batch.weight[p];
        }
        ++keep;
    }
    batch.n_excluded = n_paths - keep;
    batch.n_paths = keep;
    batch.sup.resize(keep);
    batch.terminal.resize(keep * d);
    batch.weight.resize(keep);
    if (batch.n_excluded > n_paths / 1000)
        throw std::runtime_error("simulate: exclusion rate above 0.1% (" +
                                 std::to_string(batch.n_excluded) + " of " +
                                 std::to_string(n_paths) + " paths)");
    return batch;
}

JointDensityGrid estimate_density(const PathBatch& batch,
                                  std::shared_ptr<const TriangularGrid> grid,
                                  DensityEstimator method, EstimateInfo* info) {
    if (batch.n_paths == 0) throw std::invalid_argument("estimate_density: empty batch");
    if (grid->dim != 1 || batch.dim != 1)
        throw std::invalid_argument("estimate_density: d = 1 only");
    int slice = grid->slice_index(batch.horizon);
    if (slice < 0) throw std::invalid_argument("estimate_density: batch horizon is not a grid slice");

    JointDensityGrid out = make_density_shell(grid, Provenance::monte_carlo);
    const TriangularGrid& g = *grid;
    const int n = g.n_axis();
    const double h = g.h();
    const double lo = g.axis.front() - 0.5 * h;

    if (method == DensityEstimator::histogram) {
        std::vector<std::uint64_t> counts(static_cast<std::size_t>(n) * n, 0);
        std::size_t escaped = 0;
        for (std::size_t p = 0; p < batch.n_paths; ++p) {
            double m = batch.sup[p], x = batch.terminal[p];
            int i = static_cast<int>(std::floor((m - lo) / h));
            int j = static_cast<int>(std::floor((x - lo) / h));
            if (i < 0 || i >= n || j < 0 || j >= n) {
                ++escaped;
                continue;
            }
            counts[g.idx(i, j)]++;
        }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) {
                // Node-centered cells; cells straddling the diagonal keep half volume.
                double vol = h * h * (j == i ? 0.5 : 1.0);
                out.values[slice][g.idx(i, j)] =
                    static_cast<double>(counts[g.idx(i, j)]) / (batch.n_paths * vol);
            }
        for (int i = 0; i < n; ++i) out.diag[slice][i] = out.values[slice][g.idx(i, i)];
        if (info) info->escaped_mass = static_cast<double>(escaped) / batch.n_paths;
    } else {
        // Product-Gaussian kernel estimate; Silverman-style bandwidth.
        double sm = 0.0, sx = 0.0, sm2 = 0.0, sx2 = 0.0;
        for (std::size_t p = 0; p < batch.n_paths; ++p) {
            sm += batch.sup[p];
            sx += batch.terminal[p];
            sm2 += batch.sup[p] * batch.sup[p];
            sx2 += batch.terminal[p] * batch.terminal[p];
        }
        double npaths = static_cast<double>(batch.n_paths);
        double sd_m = std::sqrt(std::max(1e-12, sm2 / npaths - (sm / npaths) * (sm / npaths)));
        double sd_x = std::sqrt(std::max(1e-12, sx2 / npaths - (sx / npaths) * (sx / npaths)));
        double bw_m = 1.06 * sd_m * std::pow(npaths, -1.0 / 6.0);
        double bw_x = 1.06 * sd_x * std::pow(npaths, -1.0 / 6.0);
        const std::size_t chunk = 16384;
        const std::size_t n_chunks = chunk_count(batch.n_paths, chunk);
        std::vector<std::vector<double>> partial(n_chunks);
        parallel_chunks(batch.n_paths, chunk, [&](std::size_t p0, std::size_t p1, std::size_t c) {
            std::vector<double>& acc = partial[c];
            acc.assign(static_cast<std::size_t>(n) * n, 0.0);
            for (std::size_t p = p0; p < p1; ++p) {
                double m = batch.sup[p], x = batch.terminal[p];
                int i_lo = std::max(0, static_cast<int>((m - 5 * bw_m - g.axis[0]) / h));
                int i_hi = std::min(n - 1, static_cast<int>((m + 5 * bw_m - g.axis[0]) / h) + 1);
                int j_lo = std::max(0, static_cast<int>((x - 5 * bw_x - g.axis[0]) / h));
                int j_hi = std::min(n - 1, static_cast<int>((x + 5 * bw_x - g.axis[0]) / h) + 1);
                for (int i = i_lo; i <= i_hi; ++i)
                    for (int j = j_lo; j <= std::min(i, j_hi); ++j)
                        acc[g.idx(i, j)] += phi1(g.axis[i] - m, bw_m * bw_m) *
                                            phi1(g.axis[j] - x, bw_x * bw_x);
            }
        });
        for (std::size_t c = 0; c < n_chunks; ++c)
            if (!partial[c].empty())
                for (std::size_t q = 0; q < partial[c].size(); ++q)
                    out.values[slice][q] += partial[c][q] / npaths;
        for (int i = 0; i < n; ++i) out.diag[slice][i] = out.values[slice][g.idx(i, i)];
        if (info) info->smoothing_leakage = std::abs(out.slice_mass(slice) - 1.0);
    }
    return out;
}

CellHistogram histogram2d(const PathBatch& batch, std::span<const double> m_edges,
                          std::span<const double> x_edges) {
    if (m_edges.size() < 2 || x_edges.size() < 2)
        throw std::invalid_argument("histogram2d: need at least one cell per axis");
    CellHistogram hist;
    hist.m_edges.assign(m_edges.begin(), m_edges.end());
    hist.x_edges.assign(x_edges.begin(), x_edges.end());
    std::size_t nm = m_edges.size() - 1, nx = x_edges.size() - 1;
    hist.counts.assign(nm * nx, 0);
    hist.total = batch.n_paths;
    double hm = (m_edges.back() - m_edges.front()) / nm;
    double hx = (x_edges.back() - x_edges.front()) / nx;
    for (std::size_t p = 0; p < batch.n_paths; ++p) {
        double m = batch.sup[p], x = batch.terminal[p * batch.dim];
        int i = static_cast<int>(std::floor((m - m_edges.front()) / hm));
        int j = static_cast<int>(std::floor((x - x_edges.front()) / hx));
        if (i < 0 || i >= static_cast<int>(nm) || j < 0 || j >= static_cast<int>(nx)) continue;
        hist.counts[i * nx + j]++;
    }
    return hist;
}

McValue feynman_kac(const ModelSpec& model, const std::function<double(std::span<const double>)>& f,
                    std::span<const double> x, double t, std::size_t n_paths, int n_steps,
                    std::uint64_t seed) {
    if (t <= 0.0) throw std::invalid_argument("feynman_kac: t must be positive");
    const int d = model.dim;
    const double dt = t / n_steps;
    const double sqrt_dt = std::sqrt(dt);
    const std::size_t chunk = 4096;
    const std::size_t n_chunks = chunk_count(n_paths, chunk);
    std::vector<double> sum(n_chunks, 0.0), sum2(n_chunks, 0.0);

    parallel_chunks(n_paths, chunk, [&](std::size_t p0, std::size_t p1, std::size_t c) {
        std::vector<double> y(x.begin(), x.end()), b(d);
        double acc = 0.0, acc2 = 0.0;
        for (std::size_t p = p0; p < p1; ++p) {
            PathStream rng(seed, p);
            for (int k = 0; k < d; ++k) y[k] = x[k];
            double div_acc = 0.5 * model.div_drift(y);
            for (int step = 0; step < n_steps; ++step) {
                model.drift_at(y, b);
                for (int k = 0; k < d; ++k) y[k] += -b[k] * dt + sqrt_dt * rng.next_normal();
                div_acc += (step + 1 < n_steps ? 1.0 : 0.5) * model.div_drift(y);
            }
            double v = f(y) * std::exp(-div_acc * dt);
            acc += v;
            acc2 += v * v;
        }
        sum[c] = acc;
        sum2[c] = acc2;
    });

    double s = 0.0, s2 = 0.0;
    for (std::size_t c = 0; c < n_chunks; ++c) {
        s += sum[c];
        s2 += sum2[c];
    }
    McValue out;
    out.n = n_paths;
    out.value = s / n_paths;
    double var = std::max(0.0, s2 / n_paths - out.value * out.value);
    out.std_error = std::sqrt(var / n_paths);
    return out;
}

namespace {
constexpr char kBatchMagic[4] = {'R', 'S', 'P', 'B'};
}

void save_path_batch(const std::string& path, const PathBatch& batch) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(kBatchMagic, 4);
    std::uint32_t version = 1, dim = batch.dim, n_steps = batch.n_steps,
                  bridge = batch.bridge ? 1 : 0;
    std::uint64_t n = batch.n_paths;
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&batch.seed), 8);
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&dim), 4);
    out.write(reinterpret_cast<const char*>(&n_steps), 4);
    out.write(reinterpret_cast<const char*>(&bridge), 4);
    out.write(reinterpret_cast<const char*>(&batch.horizon), 8);
    for (std::size_t p = 0; p < batch.n_paths; ++p) {
        out.write(reinterpret_cast<const char*>(&batch.sup[p]), 8);
        out.write(reinterpret_cast<const char*>(&batch.terminal[p * batch.dim]), 8 * batch.dim);
        out.write(reinterpret_cast<const char*>(&batch.weight[p]), 8);
    }
    nlohmann::json manifest{{"format", "runsup-pathbatch"},
                            {"version", 1},
                            {"seed", batch.seed},
                            {"n_paths", batch.n_paths},
                            {"dim", batch.dim},
                            {"n_steps", batch.n_steps},
                            {"bridge", batch.bridge},
                            {"horizon", batch.horizon},
                            {"n_excluded", batch.n_excluded}};
    write_text_file(path + ".json", manifest.dump(2) + "\n");
}

PathBatch load_path_batch(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, kBatchMagic, 4) != 0)
        throw std::runtime_error("not a path batch file: " + path);
    std::uint32_t version, dim, n_steps, bridge;
    std::uint64_t n;
    PathBatch batch;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&batch.seed), 8);
    in.read(reinterpret_cast<char*>(&n), 8);
    in.read(reinterpret_cast<char*>(&dim), 4);
    in.read(reinterpret_cast<char*>(&n_steps), 4);
    in.read(reinterpret_cast<char*>(&bridge), 4);
    in.read(reinterpret_cast<char*>(&batch.horizon), 8);
    if (version != 1) throw std::runtime_error("unsupported path batch version");
    batch.dim = dim;
    batch.n_steps = n_steps;
    batch.bridge = bridge != 0;
    batch.n_paths = n;
    batch.sup.resize(n);
    batch.terminal.resize(n * dim);
    batch.weight.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        in.read(reinterpret_cast<char*>(&batch.sup[p]), 8);
        in.read(reinterpret_cast<char*>(&batch.terminal[p * dim]), 8 * dim);
        in.read(reinterpret_cast<char*>(&batch.weight[p]), 8);
    }
    if (!in) throw std::runtime_error("truncated path batch file: " + path);
    return batch;
}

}  // namespace runsup
