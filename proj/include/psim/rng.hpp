#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace psim {

// Counter-based generator (Philox4x32-10). A stream is identified by
// (seed, stream_id); draws are a pure function of (seed, stream_id, position),
// so replicas can run in parallel with independent, reproducible streams.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_{static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)} {}

  std::uint32_t next_u32() {
    if (pos_ == 4) {
      block_ = generate_block(block_index_++);
      pos_ = 0;
    }
    return block_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1]; safe as a log() argument.
  double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  // Box-Muller; the second variate is discarded to keep draws stateless.
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  int uniform_int(int n) { return static_cast<int>(uniform_below(static_cast<std::uint64_t>(n))); }

 private:
  std::array<std::uint32_t, 4> generate_block(std::uint64_t index) const {
    std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(index),
                                        static_cast<std::uint32_t>(index >> 32), stream_[0],
                                        stream_[1]};
    std::array<std::uint32_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      ctr = philox_round(ctr, key);
      key[0] += 0x9E3779B9u;  // golden-ratio Weyl constants
      key[1] += 0xBB67AE85u;
    }
    return ctr;
  }

  static std::array<std::uint32_t, 4> philox_round(const std::array<std::uint32_t, 4>& ctr,
                                                   const std::array<std::uint32_t, 2>& key) {
    const std::uint64_t p0 = 0xD2511F53ull * ctr[0];
    const std::uint64_t p1 = 0xCD9E8D57ull * ctr[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
            static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
            static_cast<std::uint32_t>(p0)};
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 2> stream_;
  std::uint64_t block_index_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int pos_ = 4;
};

// Stream-id layout: one purpose slot per replica.
enum class RngPurpose : std::uint64_t {
  initial_condition = 0,
  events = 1,
  sde = 2,
  oracle = 3,
  aux = 4,
};

inline RngStream make_stream(std::uint64_t seed, std::uint64_t replica, RngPurpose purpose) {
  return RngStream(seed, replica * 8 + static_cast<std::uint64_t>(purpose));
}

}  // namespace psim
