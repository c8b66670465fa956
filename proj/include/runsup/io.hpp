#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace runsup {

// Decimal formatting used by every numeric export: 17 significant digits,
// shortest round-trip not attempted on purpose (stable byte output matters
// more than prettiness).
std::string format_g17(double v);

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns);
    void row(const std::vector<std::string>& cells);
    void row_numeric(const std::vector<double>& cells);
    void close();

private:
    std::ofstream out_;
    std::size_t n_cols_;
};

std::uint64_t fnv1a64(const std::string& data);
std::string hex_u64(std::uint64_t v);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace runsup
