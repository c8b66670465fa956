#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "runsup/config.hpp"
#include "runsup/model.hpp"

namespace runsup {

struct CommonOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;    // 0 = take from config (default 12345)
    bool seed_set = false;
    int threads = 0;           // 0 = leave as-is
    double gate_scale = 1.0;
};

// Model / grid construction from a config file ([model] and [grid] sections).
ModelSpec model_from_config(const Config& cfg);
std::shared_ptr<TriangularGrid> grid_from_config(const Config& cfg);

// Density CSV (t, m, x1, p, provenance), one row per active node per slice.
void write_density_csv(const std::string& path, const JointDensityGrid& density);
JointDensityGrid load_density_csv(const std::string& path);

// Kernel-algebra property suite; prints one PASS/FAIL line per property.
// inject_fault: "" or "gamma_sign" (test fixture for the mutation check).
int cmd_selftest(std::ostream& out, const std::string& inject_fault = "");

int cmd_density(const CommonOptions& opt, std::ostream& out);
int cmd_verify(const CommonOptions& opt, const std::vector<std::string>& density_files,
               std::ostream& out);
int cmd_price(const CommonOptions& opt, std::ostream& out);

}  // namespace runsup
