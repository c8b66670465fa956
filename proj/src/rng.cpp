#include "runsup/rng.hpp"

#include <cmath>

namespace runsup {

namespace {

constexpr std::uint32_t kWeylA = 0x9E3779B9u;
constexpr std::uint32_t kWeylB = 0xBB67AE85u;
constexpr std::uint32_t kMulA = 0xD2511F53u;
constexpr std::uint32_t kMulB = 0xCD9E8D57u;

inline void mul_hilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(p);
    hi = static_cast<std::uint32_t>(p >> 32);
}

inline void one_round(std::array<std::uint32_t, 4>& c, std::array<std::uint32_t, 2>& k) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mul_hilo(kMulA, c[0], lo0, hi0);
    mul_hilo(kMulB, c[2], lo1, hi1);
    std::array<std::uint32_t, 4> out{hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    c = out;
    k[0] += kWeylA;
    k[1] += kWeylB;
}

}  // namespace

std::array<std::uint32_t, 4> Philox4x32::block(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    for (int i = 0; i < 10; ++i) one_round(ctr, key);
    return ctr;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t purpose) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (purpose + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

PathStream::PathStream(std::uint64_t seed, std::uint64_t path_index) {
    key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    ctr_ = {static_cast<std::uint32_t>(path_index), static_cast<std::uint32_t>(path_index >> 32),
            0u, 0u};
}

void PathStream::refill() {
    buf_ = Philox4x32::block(ctr_, key_);
    if (++ctr_[2] == 0) ++ctr_[3];
    buf_pos_ = 0;
}

std::uint64_t PathStream::next_u64() {
    if (buf_pos_ >= 2) refill();
    std::uint64_t v = (static_cast<std::uint64_t>(buf_[2 * buf_pos_ + 1]) << 32) | buf_[2 * buf_pos_];
    ++buf_pos_;
    return v;
}

double PathStream::next_uniform() {
    // 53-bit mantissa, shifted into (0, 1].
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double PathStream::next_normal() {
    if (have_cached_normal_) {
        have_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = next_uniform();
    double u2 = next_uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(a);
    have_cached_normal_ = true;
    return r * std::cos(a);
}

}  // namespace runsup
