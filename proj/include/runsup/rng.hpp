#pragma once

#include <array>
#include <cstdint>

namespace runsup {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). One keyed
// stream per Monte Carlo path makes batches reproducible for any worker
// count: the draw sequence is a pure function of (seed, path index).
struct Philox4x32 {
    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key);
};

// splitmix64, used to derive sub-seeds for independent purposes.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t purpose);

class PathStream {
public:
    PathStream(std::uint64_t seed, std::uint64_t path_index);

    std::uint64_t next_u64();
    // Uniform on (0, 1].
    double next_uniform();
    // Standard normal via Box-Muller; draws come in deterministic pairs.
    double next_normal();

private:
    void refill();
    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> ctr_;
    std::array<std::uint32_t, 4> buf_{};
    int buf_pos_ = 2;  // consumed (two u64 per block)
    double cached_normal_ = 0.0;
    bool have_cached_normal_ = false;
};

}  // namespace runsup
