#include "notmiwae/rng.hpp"

#include <cmath>

namespace notmiwae {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr double kTwoPi = 6.283185307179586476925;
constexpr double kGumbelEps = 1e-12;

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b + 0x9E3779B97F4A7C15ULL));
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

RngStream RngStream::substream(std::uint64_t index) const {
  return RngStream(mix_seed(seed_, index));
}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
  return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform_open()));
  const double theta = kTwoPi * uniform();
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double RngStream::gumbel() {
  double u = uniform();
  if (u < kGumbelEps) u = kGumbelEps;
  if (u > 1.0 - kGumbelEps) u = 1.0 - kGumbelEps;
  return -std::log(-std::log(u));
}

void RngStream::fill_normal(double* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = normal();
}

void RngStream::fill_gumbel(double* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = gumbel();
}

}  // namespace notmiwae
