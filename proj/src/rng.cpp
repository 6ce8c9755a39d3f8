#include "gddm/rng.hpp"

#include <boost/random/normal_distribution.hpp>
#include <cmath>

#include "gddm/error.hpp"

namespace gddm {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) noexcept {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& w : state_) w = splitmix64(sm);
}

Rng::result_type Rng::operator()() noexcept {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::uniform_int(std::uint64_t lo, std::uint64_t hi) noexcept {
  const std::uint64_t span = hi - lo + 1;
  if (span == 0) return (*this)();
  // Lemire's multiply-shift with rejection keeps the draw unbiased.
  const std::uint64_t threshold = -span % span;
  for (;;) {
    const unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * span;
    if (static_cast<std::uint64_t>(m) >= threshold) return lo + static_cast<std::uint64_t>(m >> 64);
  }
}

double Rng::normal() {
  boost::random::normal_distribution<double> dist;
  return dist(*this);
}

void Rng::fill_normal(std::span<double> out, double sigma) {
  boost::random::normal_distribution<double> dist;
  for (auto& x : out) x = sigma * dist(*this);
}

Rng Rng::derive(std::uint64_t key) const {
  std::uint64_t sm = seed_ ^ rotl(key * 0xd1b54a32d192ed03ULL, 17);
  return Rng(splitmix64(sm) ^ key);
}

Field sample_gaussian(const Shape& shape, double sigma, Rng& rng) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ParameterError("sample_gaussian: sigma must be positive and finite");
  }
  Field out(shape);
  rng.fill_normal(out.data(), sigma);
  return out;
}

}  // namespace gddm
