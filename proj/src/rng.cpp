#include "rh/rng.hpp"

namespace rh {

std::uint64_t CounterRng::mix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix(seed ^ mix(stream + 0x632BE59BD9B4E019ULL))) {}

std::uint64_t CounterRng::next_u64() {
  ++counter_;
  return mix(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t cell_stream(std::int64_t i, std::int64_t j) {
  const auto ui = static_cast<std::uint64_t>(i);
  const auto uj = static_cast<std::uint64_t>(j);
  return CounterRng::mix(ui * 0xD1B54A32D192ED03ULL ^ CounterRng::mix(uj + 0x8CB92BA72F3D8DD7ULL));
}

}  // namespace rh
