#pragma once

#include <cstdint>

namespace rh {

// Counter-based generator: the k-th draw of stream s under seed S is
//   splitmix64_finalize(key(S, s) + (k + 1) * 0x9E3779B97F4A7C15),
// key(S, s) = splitmix64_finalize(S ^ splitmix64_finalize(s + 0x632BE59BD9B4E019)).
// Draws are a pure function of (seed, stream, counter), so results do not
// depend on the order in which streams are consumed.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Stream identifiers. Cell streams hash the integer lattice index; the
// reserved streams sit at the top of the 64-bit range.
std::uint64_t cell_stream(std::int64_t i, std::int64_t j);
inline constexpr std::uint64_t kLatticeShiftStream = 0xFFFF'FFFF'FFFF'FF01ULL;

}  // namespace rh
