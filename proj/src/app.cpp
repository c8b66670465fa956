#include "runsup/app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "runsup/brownian.hpp"
#include "runsup/io.hpp"
#include "runsup/kernels.hpp"
#include "runsup/mc.hpp"
#include "runsup/parallel.hpp"
#include "runsup/parametrix.hpp"
#include "runsup/pde_verifier.hpp"
#include "runsup/pricing.hpp"
#include "runsup/quadrature.hpp"
#include "runsup/rng.hpp"

#include "json.hpp"

namespace runsup {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string out_path(const CommonOptions& opt, const std::string& name) {
    fs::create_directories(opt.out_dir);
    return (fs::path(opt.out_dir) / name).string();
}

std::uint64_t effective_seed(const CommonOptions& opt, const Config& cfg) {
    if (opt.seed_set) return opt.seed;
    return static_cast<std::uint64_t>(cfg.get_int("run.seed", 12345));
}

json base_manifest(const CommonOptions& opt, const Config& cfg, std::uint64_t seed) {
    return json{{"tool", "runsup"},
                {"version", "0.1.0"},
                {"config_hash", hex_u64(fnv1a64(cfg.raw_text()))},
                {"seed", seed},
                {"threads", thread_count()},
                {"gate_scale", opt.gate_scale},
                {"modules",
                 json{{"model_core", "0.1.0"},
                      {"kernels", "0.1.0"},
                      {"brownian_reference", "0.1.0"},
                      {"mc_engine", "0.1.0"},
                      {"dual_semigroup", "0.1.0"},
                      {"parametrix_solver", "0.1.0"},
                      {"pde_verifier", "0.1.0"},
                      {"pricing", "0.1.0"}}}};
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    }
};

}  // namespace

ModelSpec model_from_config(const Config& cfg) {
    int d = static_cast<int>(cfg.get_int("model.d", 1));
    std::string kind = cfg.get_string("model.drift");
    DriftField drift;
    if (kind == "zero") {
        drift = drift_zero(d);
    } else if (kind == "constant") {
        std::vector<double> mu = cfg.has("model.mu") ? cfg.get_doubles("model.mu")
                                                     : std::vector<double>{0.0};
        mu.resize(d, 0.0);
        drift = drift_constant(mu);
    } else if (kind == "tanh") {
        drift = drift_tanh(d);
    } else {
        throw std::runtime_error("unknown drift kind in config: " + kind);
    }
    std::vector<double> mean = cfg.has("model.f0_mean") ? cfg.get_doubles("model.f0_mean")
                                                        : std::vector<double>{0.0};
    mean.resize(d, 0.0);
    double width = cfg.get_double("model.f0_width", 1e-3);
    ModelSpec m = build_model(drift, gaussian_initial_density(mean, width), d);
    m.name = cfg.get_string("model.name", kind);
    return m;
}

std::shared_ptr<TriangularGrid> grid_from_config(const Config& cfg) {
    return make_grid(static_cast<int>(cfg.get_int("model.d", 1)),
                     cfg.get_double("grid.m_box", 6.0),
                     static_cast<int>(cfg.get_int("grid.n_cells", 64)),
                     static_cast<int>(cfg.get_int("grid.n_slices", 16)),
                     cfg.get_double("grid.horizon", 1.0));
}

void write_density_csv(const std::string& path, const JointDensityGrid& density) {
    const TriangularGrid& g = *density.grid;
    if (g.dim != 1) throw std::invalid_argument("density csv: d = 1");
    CsvWriter csv(path, {"t", "m", "x1", "p", "provenance"});
    const std::string prov = provenance_name(density.provenance);
    for (std::size_t k = 0; k < g.times.size(); ++k)
        for (int i = 0; i < g.n_axis(); ++i)
            for (int j = 0; j <= i; ++j)
                csv.row({format_g17(g.times[k]), format_g17(g.axis[i]), format_g17(g.axis[j]),
                         format_g17(density.values[k][g.idx(i, j)]), prov});
}

JointDensityGrid load_density_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open density file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ":1: empty density file");
    if (line.rfind("t,m,x1,p,provenance", 0) != 0)
        throw std::runtime_error(path + ":1: unexpected density header '" + line + "'");

    struct Row {
        double t, m, x, p;
    };
    std::vector<Row> rows;
    std::string prov_name;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        Row r{};
        try {
            for (int c = 0; c < 4; ++c) {
                if (!std::getline(ls, cell, ','))
                    throw std::runtime_error("missing column " + std::to_string(c));
                double v = std::stod(cell);
                if (c == 0) r.t = v;
                if (c == 1) r.m = v;
                if (c == 2) r.x = v;
                if (c == 3) r.p = v;
            }
            if (!std::getline(ls, cell, ',')) throw std::runtime_error("missing provenance");
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": parse error: " +
                                     e.what());
        }
        if (prov_name.empty()) prov_name = cell;
        rows.push_back(r);
    }
    if (rows.empty()) throw std::runtime_error(path + ": no data rows");

    std::vector<double> ts, xs;
    for (const Row& r : rows) {
        ts.push_back(r.t);
        xs.push_back(r.m);
        xs.push_back(r.x);
    }
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end(),
                         [](double a, double b) { return std::abs(a - b) < 1e-12; }),
             ts.end());
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end(),
                         [](double a, double b) { return std::abs(a - b) < 1e-12; }),
             xs.end());
    if (xs.size() < 3) throw std::runtime_error(path + ": too few grid nodes");
    double h = xs[1] - xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (std::abs(xs[i] - xs[i - 1] - h) > 1e-9)
            throw std::runtime_error(path + ": non-uniform spatial grid");

    auto grid = make_grid(1, std::max(std::abs(xs.front()), xs.back()),
                          static_cast<int>(xs.size()) - 1, static_cast<int>(ts.size()),
                          ts.back());
    // make_grid produces a symmetric axis; require it to match the file.
    if (std::abs(grid->axis.front() - xs.front()) > 1e-9 || std::abs(grid->h() - h) > 1e-9)
        throw std::runtime_error(path + ": grid axis is not a symmetric uniform box");
    for (std::size_t k = 0; k < ts.size(); ++k)
        if (std::abs(grid->times[k] - ts[k]) > 1e-9)
            throw std::runtime_error(path + ": non-uniform time slices");

    Provenance prov = Provenance::exact;
    if (prov_name == "parametrix") prov = Provenance::parametrix;
    else if (prov_name == "monte_carlo") prov = Provenance::monte_carlo;
    else if (prov_name != "exact") throw std::runtime_error(path + ": unknown provenance " + prov_name);

    JointDensityGrid density = make_density_shell(grid, prov);
    const TriangularGrid& g = *grid;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        int k = g.slice_index(rows[r].t);
        long i = std::lround((rows[r].m - g.axis[0]) / h);
        long j = std::lround((rows[r].x - g.axis[0]) / h);
        if (k < 0 || i < 0 || i >= g.n_axis() || j < 0 || j > i)
            throw std::runtime_error(path + ": row " + std::to_string(r + 2) +
                                     " does not map to a grid node");
        density.values[k][g.idx(static_cast<int>(i), static_cast<int>(j))] = rows[r].p;
    }
    for (std::size_t k = 0; k < ts.size(); ++k)
        for (int i = 0; i < g.n_axis(); ++i)
            density.diag[k][i] = density.values[k][g.idx(i, i)];
    return density;
}

namespace {

struct Property {
    std::string name;
    bool pass;
    std::string detail;
};

void report(std::ostream& out, std::vector<Property>& props, const std::string& name, bool pass,
            const std::string& detail) {
    props.push_back({name, pass, detail});
    out << (pass ? "PASS " : "FAIL ") << name << " (" << detail << ")\n";
}

}  // namespace

int cmd_selftest(std::ostream& out, const std::string& inject_fault) {
    std::vector<Property> props;
    PathStream rng(20250810, 0);

    {
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            int k = 1 + static_cast<int>(rng.next_u64() % 3);
            std::vector<double> a(k), b(k);
            for (int q = 0; q < k; ++q) {
                a[q] = 5.0 * (rng.next_uniform() - 0.5);
                b[q] = a[q] + 2.0 * (rng.next_uniform() - 0.5) * 5.0 / std::sqrt(double(k));
            }
            double s = 0.1 + 4.9 * rng.next_uniform();
            double r = 0.1 + 4.9 * rng.next_uniform();
            ConvolveCheck c = gaussian_convolve_check(a, b, s, r);
            worst = std::max(worst, std::abs(c.analytic - c.quadrature));
        }
        report(out, props, "gaussian_convolution_identity", worst <= 1e-7,
               "max |analytic - quadrature| = " + format_g17(worst));
    }
    {
        // Chapman-Kolmogorov for phi in t via quadrature.
        double x = 0.3, ypt = -0.7, s = 0.4, r = 0.8;
        double quad = adaptive_simpson(
            [&](double z) { return phi1(x - z, s) * phi1(z - ypt, r); }, -12.0, 12.0, 1e-12);
        double diff = std::abs(quad - phi1(x - ypt, s + r));
        report(out, props, "kernel_chapman_kolmogorov", diff <= 1e-7,
               "|int phi phi - phi| = " + format_g17(diff));
    }
    {
        // g_alpha closed form vs numerical convolution (n = 2).
        bool ok = true;
        double worst = 0.0;
        for (double alpha : {0.3, 0.5, 0.8, 1.0}) {
            double t = 1.0;
            double closed = g_alpha_power(2, alpha, t);
            if (inject_fault == "gamma_sign")
                closed = std::exp((2 * alpha / 2.0 - 1.0) * std::log(t) +
                                  2 * std::lgamma(alpha / 2.0) + std::lgamma(2 * alpha / 2.0));
            double numeric = tanh_sinh_split(
                [&](double s) {
                    return std::pow(t - s, alpha / 2.0 - 1.0) * std::pow(s, alpha / 2.0 - 1.0);
                },
                [&](double u) {
                    return std::pow(u, alpha / 2.0 - 1.0) * std::pow(t - u, alpha / 2.0 - 1.0);
                },
                t, 10);
            double rel = std::abs(closed - numeric) / std::abs(numeric);
            worst = std::max(worst, rel);
            ok = ok && rel <= 1e-4;
        }
        report(out, props, "g_alpha_closed_form", ok, "max rel err = " + format_g17(worst));
    }
    {
        // Recursion g^{*(n+1)} = g^{*n} * g for n <= 5.
        double worst = 0.0;
        for (double alpha : {0.3, 0.5, 0.8})
            for (int n = 1; n <= 5; ++n) {
                double t = 0.7;
                double closed = g_alpha_power(n + 1, alpha, t);
                double numeric = tanh_sinh_split(
                    [&](double s) {
                        return g_alpha_power(n, alpha, t - s) * std::pow(s, alpha / 2.0 - 1.0);
                    },
                    [&](double u) {
                        return g_alpha_power(n, alpha, u) * std::pow(t - u, alpha / 2.0 - 1.0);
                    },
                    t, 10);
                worst = std::max(worst, std::abs(closed - numeric) / std::abs(closed));
            }
        report(out, props, "g_alpha_recursion", worst <= 1e-4,
               "max rel err = " + format_g17(worst));
    }
    {
        double direct = (2.0 / 2.0) * std::sqrt(2.0 * 0.5) * std::pow(1.0, 0.5 * 0.5 + 1.0);
        double b1 = contraction_bound(1, 0.5, 2.0, 0.5, 1.0, 1);
        report(out, props, "contraction_bound_n1_cancellation",
               std::abs(b1 - direct) <= 1e-12 * direct,
               "b_1 = " + format_g17(b1) + " vs " + format_g17(direct));
    }
    {
        double worst = 0.0;
        for (int n : {1, 2, 5, 10, 20}) {
            double lg = log_contraction_bound(n, 0.5, 2.0, 0.5, 1.0, 1);
            double direct = std::pow(2.0 / 2.0, n) * std::sqrt(2.0 * 0.5) *
                            std::pow(1.0, n * 0.25 + 1.0) *
                            std::pow(std::tgamma(0.25), n) / std::tgamma(n * 0.25);
            worst = std::max(worst, std::abs(std::exp(lg) - direct) / direct);
        }
        report(out, props, "contraction_bound_log_vs_direct", worst <= 1e-10,
               "max rel diff = " + format_g17(worst));
    }
    {
        double a1 = 1.0 - 1e-12;
        bool decreasing_tail = true;
        double prev = contraction_bound(100, a1, 2.0, 0.5, 1.0, 1);
        for (int n = 101; n <= 500; ++n) {
            double b = contraction_bound(n, a1, 2.0, 0.5, 1.0, 1);
            if (b > prev) decreasing_tail = false;
            prev = b;
        }
        report(out, props, "contraction_bound_to_zero",
               decreasing_tail && prev < 1e-50,
               "b_500 = " + format_g17(prev));
    }
    {
        double worst = 0.0;
        for (double eps : {1.0, 0.1, 0.01}) {
            Profile1D chi = mollifier(eps, 0.3);
            double mass = tanh_sinh([&](double u) { return chi.f(u); }, 0.3 - eps, 0.3 + eps, 10);
            worst = std::max(worst, std::abs(mass - 1.0));
        }
        report(out, props, "mollifier_mass", worst <= 1e-6, "max |mass - 1| = " + format_g17(worst));
    }
    {
        Profile1D chi = mollifier(0.5, 1.0);
        bool ok = chi.f(0.5) == 0.0 && chi.f(1.5) == 0.0 && chi.f(0.4999999) == 0.0;
        report(out, props, "mollifier_support", ok, "chi vanishes at center +- eps");
    }
    {
        // int u^2 chi_eps(u - c) du -> c^2 with O(eps^2) error.
        double c = 0.7;
        double prev_err = 0.0;
        bool order_ok = true;
        for (double eps : {0.4, 0.2, 0.1}) {
            Profile1D chi = mollifier(eps, c);
            double v = tanh_sinh([&](double u) { return u * u * chi.f(u); }, c - eps, c + eps, 10);
            double err = std::abs(v - c * c);
            if (prev_err > 0.0 && err > 0.32 * prev_err) order_ok = false;  // expect ~0.25
            prev_err = err;
        }
        report(out, props, "mollifier_moment_order2", order_ok, "error contracts ~4x per eps halving");
    }
    {
        double mass = adaptive_simpson([](double u) { return phi1(u, 2.0); }, -30.0, 30.0, 1e-12);
        report(out, props, "phi_normalization", std::abs(mass - 1.0) <= 1e-9,
               "|int phi1(.;2) - 1| = " + format_g17(std::abs(mass - 1.0)));
    }

    int failures = 0;
    for (const Property& p : props)
        if (!p.pass) ++failures;
    out << props.size() << " properties, " << failures << " failure(s)\n";
    if (failures > 0) {
        for (const Property& p : props)
            if (!p.pass) {
                out << "first failing property: " << p.name << "\n";
                break;
            }
        return 1;
    }
    return 0;
}

int cmd_density(const CommonOptions& opt, std::ostream& out) {
    Timer timer;
    Config cfg = Config::load(opt.config_path);
    if (opt.threads > 0) set_thread_count(opt.threads);
    std::uint64_t seed = effective_seed(opt, cfg);
    ModelSpec model = model_from_config(cfg);
    auto grid = grid_from_config(cfg);
    std::string source = cfg.get_string("solver.source", "exact");

    json manifest = base_manifest(opt, cfg, seed);
    manifest["command"] = "density";
    manifest["model"] = model.name;
    manifest["source"] = source;
    manifest["grid"] = json{{"d", grid->dim},
                            {"m_box", grid->m_box},
                            {"n_cells", grid->n_cells},
                            {"n_slices", grid->times.size()},
                            {"horizon", grid->horizon}};
    manifest["numeric_derivatives"] = model.numeric_derivatives;
    manifest["f0_width"] = model.f0.width;
    manifest["f0_point_mass_substitution_error"] = model.f0.width * model.f0.width;
    manifest["envelope_outside_mass"] = envelope_outside_mass(model, *grid);

    std::string csv_path = out_path(opt, "density.csv");
    std::string manifest_path = out_path(opt, "density_manifest.json");
    int status = 0;
    try {
        JointDensityGrid density = [&]() {
            if (source == "exact") return exact_density(model, grid);
            if (source == "mc") {
                std::size_t n_paths = static_cast<std::size_t>(cfg.get_int("mc.n_paths", 100000));
                int n_steps = static_cast<int>(cfg.get_int("mc.n_steps", 200));
                bool bridge = cfg.get_bool("mc.bridge", true);
                JointDensityGrid d = make_density_shell(grid, Provenance::monte_carlo);
                for (std::size_t k = 0; k < grid->times.size(); ++k) {
                    int steps_k = std::max(
                        1, static_cast<int>(std::lround(n_steps * grid->times[k] / grid->horizon)));
                    PathBatch b = simulate(model, grid->times[k], steps_k, n_paths, bridge,
                                           mix_seed(seed, k));
                    JointDensityGrid dk = estimate_density(b, grid, DensityEstimator::histogram);
                    int slice = grid->slice_index(grid->times[k]);
                    d.values[slice] = dk.values[slice];
                    d.diag[slice] = dk.diag[slice];
                }
                return d;
            }
            if (source != "parametrix") throw std::runtime_error("unknown solver.source " + source);
            SolverSettings st;
            st.max_iter = static_cast<int>(cfg.get_int("solver.max_iter", 12));
            st.tol = cfg.get_double("solver.tol", 1e-6);
            st.alpha = cfg.get_double("solver.alpha", 0.5);
            st.eps_mass = cfg.get_double("solver.eps_mass", 0.02);
            ConvergenceReport rep;
            JointDensityGrid d = parametrix_solve(model, grid, st, &rep);
            manifest["convergence"] = json{{"iterations", rep.iterations},
                                           {"converged", rep.converged},
                                           {"increment_l1", rep.increment_l1},
                                           {"increment_sup", rep.increment_sup},
                                           {"bound_sequence", rep.bound_sequence},
                                           {"fitted_CT", rep.fitted_CT},
                                           {"warnings", rep.warnings}};
            double disc = rep.increment_l1.empty() ? st.tol : rep.increment_l1.back();
            manifest["discretization_estimate"] =
                std::max(disc, 2.0 * grid->h() * grid->h() / (grid->m_box * grid->m_box));
            return d;
        }();
        write_density_csv(csv_path, density);
        manifest["status"] = "ok";
        manifest["outputs"] = json::array({csv_path});
    } catch (const std::exception& e) {
        manifest["status"] = "failed";
        manifest["error"] = e.what();
        status = 1;
        out << "density generation failed: " << e.what() << "\n";
    }
    manifest["wall_ms"] = timer.ms();
    write_text_file(manifest_path, manifest.dump(2) + "\n");
    if (status == 0) out << "wrote " << csv_path << "\n";
    return status;
}

int cmd_verify(const CommonOptions& opt, const std::vector<std::string>& density_files,
               std::ostream& out) {
    Timer timer;
    Config cfg = Config::load(opt.config_path);
    if (opt.threads > 0) set_thread_count(opt.threads);
    std::uint64_t seed = effective_seed(opt, cfg);
    ModelSpec model = model_from_config(cfg);
    if (density_files.empty()) throw std::runtime_error("verify: no density files given");

    json manifest = base_manifest(opt, cfg, seed);
    manifest["command"] = "verify";
    manifest["inputs"] = density_files;

    std::vector<JointDensityGrid> densities;
    for (const std::string& f : density_files) densities.push_back(load_density_csv(f));

    const JointDensityGrid& p = densities[0];
    double T = p.grid->horizon;
    double gate_weak = cfg.get_double("verify.gate_weak_scale", 1.0) * opt.gate_scale;
    double gate_weak_abs = cfg.get_double("verify.gate_weak_abs", 0.0) * opt.gate_scale;
    double gate_strong = cfg.get_double("verify.gate_strong", 10.0 * p.grid->h()) * opt.gate_scale;
    double gate_qh = cfg.get_double("verify.gate_qh", 1e-3) * opt.gate_scale;

    bool all_pass = true;
    std::string first_breach;

    // Weak residual battery at the final slice, JSON-lines report + summary CSV.
    std::string jsonl_path = out_path(opt, "verify_reports.jsonl");
    std::ofstream jsonl(jsonl_path, std::ios::binary);
    CsvWriter summary(out_path(opt, "verify_summary.csv"),
                      {"phi_id", "t", "residual", "error_estimate", "pass"});
    for (const WeakResidualReport& rep : weak_residual_battery(p, model, T)) {
        double gate = std::max(gate_weak * rep.error_estimate, gate_weak_abs);
        bool pass = std::abs(rep.residual) <= gate;
        if (!pass && first_breach.empty()) first_breach = "weak residual " + rep.phi_id;
        all_pass = all_pass && pass;
        jsonl << json{{"phi_id", rep.phi_id},
                      {"t", rep.t},
                      {"lhs", rep.lhs},
                      {"initial_term", rep.initial_term},
                      {"generator_term", rep.generator_term},
                      {"boundary_term", rep.boundary_term},
                      {"residual", rep.residual},
                      {"error_estimate", rep.error_estimate},
                      {"pass", pass}}
                     .dump()
              << "\n";
        summary.row({rep.phi_id, format_g17(rep.t), format_g17(rep.residual),
                     format_g17(rep.error_estimate), pass ? "1" : "0"});
    }

    // Strong boundary residual (d = 1).
    {
        std::vector<double> res = strong_boundary_residual(p, model, T);
        double worst = 0.0;
        for (double r : res)
            if (std::isfinite(r)) worst = std::max(worst, std::abs(r));
        bool pass = worst <= gate_strong;
        if (!pass && first_breach.empty()) first_breach = "strong boundary residual";
        all_pass = all_pass && pass;
        manifest["strong_boundary_max"] = worst;
        manifest["strong_boundary_gate"] = gate_strong;
    }

    // Membership diagnostics: divergence flags are gate breaches.
    {
        XMembershipReport xr = x_membership(p, T);
        bool pass = !(xr.flagged_a || xr.flagged_b || xr.flagged_c);
        if (!pass && first_breach.empty()) first_breach = "x-membership divergence flag";
        all_pass = all_pass && pass;
        manifest["x_membership"] = json{{"item_a", xr.item_a},
                                        {"item_b", xr.item_b},
                                        {"item_c_sup_l1", xr.item_c_sup_l1},
                                        {"item_c_trace_gap", xr.item_c_trace_gap},
                                        {"flagged_a", xr.flagged_a},
                                        {"flagged_b", xr.flagged_b},
                                        {"flagged_c", xr.flagged_c}};
    }

    // With two densities: uniqueness diagnostics on the difference.
    if (densities.size() >= 2) {
        const JointDensityGrid& p2 = densities[1];
        if (p2.grid->n_cells != p.grid->n_cells ||
            std::abs(p2.grid->m_box - p.grid->m_box) > 1e-12 ||
            p2.grid->times.size() != p.grid->times.size())
            throw std::runtime_error("verify: density files use different grids");
        // Rebind to a shared grid object for the difference diagnostics.
        JointDensityGrid q2 = p2;
        q2.grid = p.grid;
        double qh = qh_evolution_residual(p, q2, model, bump_profile(0.0, 2.0), T);
        bool pass_qh = qh <= gate_qh;
        manifest["qh_evolution_residual"] = qh;
        if (!pass_qh && first_breach.empty()) first_breach = "q_H evolution residual";
        all_pass = all_pass && pass_qh;

        if (model.drift_kind != DriftKind::general) {
            KernelEval kernel(model, model.drift_kind == DriftKind::zero
                                         ? KernelMode::exact_zero_drift
                                         : KernelMode::exact_constant_drift);
            std::vector<double> dv = diagonal_volterra_residual(p, q2, kernel, T);
            double worst = 0.0;
            for (double r : dv) worst = std::max(worst, std::abs(r));
            double gate_dv = cfg.get_double("verify.gate_diag_volterra", 1e-3) * opt.gate_scale;
            bool pass_dv = worst <= gate_dv;
            manifest["diagonal_volterra_max"] = worst;
            if (!pass_dv && first_breach.empty()) first_breach = "diagonal Volterra residual";
            all_pass = all_pass && pass_dv;
        } else {
            manifest["diagonal_volterra_max"] = "skipped (kernel has no exact mode)";
        }
    }

    manifest["status"] = all_pass ? "pass" : "breach";
    if (!all_pass) manifest["first_breach"] = first_breach;
    manifest["wall_ms"] = timer.ms();
    write_text_file(out_path(opt, "verify_manifest.json"), manifest.dump(2) + "\n");
    out << (all_pass ? "verify: all gates pass\n" : "verify: gate breach: " + first_breach + "\n");
    return all_pass ? 0 : 1;
}

int cmd_price(const CommonOptions& opt, std::ostream& out) {
    Timer timer;
    Config cfg = Config::load(opt.config_path);
    if (opt.threads > 0) set_thread_count(opt.threads);
    std::uint64_t seed = effective_seed(opt, cfg);
    ModelSpec model = model_from_config(cfg);
    auto grid = grid_from_config(cfg);
    double T = grid->horizon;

    std::string source = cfg.get_string("solver.source", "exact");
    JointDensityGrid density = [&]() {
        if (source == "exact") return exact_density(model, grid);
        SolverSettings st;
        st.max_iter = static_cast<int>(cfg.get_int("solver.max_iter", 12));
        st.tol = cfg.get_double("solver.tol", 1e-6);
        return parametrix_solve(model, grid, st, nullptr);
    }();

    std::size_t n_paths = static_cast<std::size_t>(cfg.get_int("mc.n_paths", 200000));
    int n_steps = static_cast<int>(cfg.get_int("mc.n_steps", 400));
    PathBatch batch = simulate(model, T, n_steps, n_paths, cfg.get_bool("mc.bridge", true), seed);

    json manifest = base_manifest(opt, cfg, seed);
    manifest["command"] = "price";
    manifest["model"] = model.name;

    CsvWriter csv(out_path(opt, "prices.csv"),
                  {"model_id", "T", "quantity", "value", "error", "source"});
    bool all_pass = true;
    json verdicts = json::array();

    {
        PriceResult pd = lookback_put_from_density(density, T);
        PriceResult pm = lookback_put_from_batch(batch);
        CrossCheck c = cross_validate(pd, pm);
        all_pass = all_pass && c.pass;
        csv.row({model.name, format_g17(T), "lookback_put", format_g17(pd.value),
                 format_g17(pd.error), "density"});
        csv.row({model.name, format_g17(T), "lookback_put", format_g17(pm.value),
                 format_g17(pm.error), "monte_carlo"});
        verdicts.push_back(json{{"quantity", "lookback_put"},
                                {"sigma_distance", c.sigma_distance},
                                {"pass", c.pass}});
    }
    {
        double L = cfg.get_double("pricing.barrier_level", 1.0);
        PriceResult pd = barrier_touch_prob_from_density(density, T, L);
        PriceResult pm = barrier_touch_prob_from_batch(batch, L);
        CrossCheck c = cross_validate(pd, pm);
        all_pass = all_pass && c.pass;
        csv.row({model.name, format_g17(T), "barrier_touch_prob", format_g17(pd.value),
                 format_g17(pd.error), "density"});
        csv.row({model.name, format_g17(T), "barrier_touch_prob", format_g17(pm.value),
                 format_g17(pm.error), "monte_carlo"});
        verdicts.push_back(json{{"quantity", "barrier_touch_prob"},
                                {"sigma_distance", c.sigma_distance},
                                {"pass", c.pass}});
    }

    manifest["verdicts"] = verdicts;
    manifest["status"] = all_pass ? "pass" : "cross_validation_failure";
    manifest["wall_ms"] = timer.ms();
    write_text_file(out_path(opt, "price_manifest.json"), manifest.dump(2) + "\n");
    out << (all_pass ? "price: cross-validation passed\n" : "price: cross-validation FAILED\n");
    return all_pass ? 0 : 1;
}

}  // namespace runsup
