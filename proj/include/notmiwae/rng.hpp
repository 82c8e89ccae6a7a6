#pragma once

#include <cstdint>
#include <random>

namespace notmiwae {

// Deterministic random stream. The engine is mt19937_64 (sequence fixed by
// the standard) and all transforms are done here rather than through the
// implementation-defined std distributions, so identical seeds give identical
// streams on every platform. Substreams derive independent streams from
// (seed, index), e.g. one per imputed row, making results order-independent.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  RngStream substream(std::uint64_t index) const;
  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  double uniform();       // [0, 1)
  double uniform_open();  // (0, 1]
  double normal();        // standard normal, Box-Muller
  double gumbel();        // standard Gumbel via -ln(-ln U), U clamped away from {0,1}

  void fill_normal(double* dst, std::size_t n);
  void fill_gumbel(double* dst, std::size_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// splitmix64 finalizer, used for substream key derivation.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace notmiwae
