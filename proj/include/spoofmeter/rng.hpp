#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace spoofmeter {

/// Philox4x32-10 block function (Salmon et al., SC'11). Pure: the same
/// counter and key always yield the same four words.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Stable 64-bit mixing of stream identifiers (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x);
std::uint64_t stream_id(std::string_view tag);
std::uint64_t stream_id(std::uint64_t a, std::uint64_t b);
std::uint64_t stream_id(std::uint64_t a, std::uint64_t b, std::uint64_t c);

/// Counter-based generator. A (seed, stream) pair selects an independent
/// sequence; position within the sequence is an explicit counter, so any
/// substream can be reconstructed without replaying others.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits. Consumes one u64.
  double uniform();
  /// Standard normal via Box-Muller; consumes two uniforms per call.
  double normal();
  /// True with probability `p`; consumes exactly one uniform.
  bool bernoulli(double p);

  /// Number of uniform() calls made so far (includes those behind
  /// normal() and bernoulli()).
  std::uint64_t uniforms_drawn() const { return uniforms_drawn_; }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  std::uint64_t uniforms_drawn_ = 0;
};

}  // namespace spoofmeter
