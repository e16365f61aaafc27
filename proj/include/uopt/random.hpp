#pragma once

// Counter-based normal variates: every draw is a pure function of
// (seed, path, step, component), so ensembles can be filled in any order.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace uopt {

class Philox4x32 {
public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter c, Key k) {
    for (int r = 0; r < 10; ++r) {
      c = round(c, k);
      k[0] += 0x9E3779B9u;
      k[1] += 0xBB67AE85u;
    }
    return c;
  }

private:
  static Counter round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
    const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

class KeyedNormal {
public:
  explicit KeyedNormal(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  // Two independent N(0,1) draws for block `block` of (path, step).
  std::array<double, 2> pair(std::uint64_t path, std::uint32_t step, std::uint32_t block) const {
    const auto r = Philox4x32::generate(
        {block, step, static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)}, key_);
    const double u1 = to_unit((std::uint64_t{r[0]} << 32) | r[1]);
    const double u2 = to_unit((std::uint64_t{r[2]} << 32) | r[3]);
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    return {rad * std::cos(ang), rad * std::sin(ang)};
  }

  double operator()(std::uint64_t path, std::uint32_t step, std::uint32_t component) const {
    return pair(path, step, component / 2)[component % 2];
  }

private:
  // Open interval (0, 1).
  static double to_unit(std::uint64_t x) { return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53; }

  Philox4x32::Key key_;
};

}  // namespace uopt
