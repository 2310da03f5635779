#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace sar {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A draw is a
// pure function of (key, counter), so any path/step can be regenerated
// independently of evaluation order.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  constexpr explicit Philox4x32(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}
  constexpr explicit Philox4x32(Key key) : key_(key) {}

  constexpr Counter operator()(Counter ctr) const {
    Key k = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k[1], static_cast<std::uint32_t>(p0)};
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    return ctr;
  }

  constexpr Key key() const { return key_; }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  Key key_;
};

// 52-bit uniform in the open interval (0, 1); the half-ulp offset keeps both ends exact.
inline double uniform_open(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 12;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

// Two independent standard normals from one Philox block (Box-Muller).
inline std::array<double, 2> normal_pair(const Philox4x32::Counter& block) {
  const double u1 = uniform_open(block[0], block[1]);
  const double u2 = uniform_open(block[2], block[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

// Indexed stream of standard normals: draw(i) depends only on (seed, stream, i).
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) : gen_(seed), stream_(stream) {}

  double operator()(std::uint64_t i) const {
    const std::uint64_t block = i >> 1;
    const auto pair = normal_pair(gen_({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                                        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)}));
    return pair[i & 1u];
  }

 private:
  Philox4x32 gen_;
  std::uint64_t stream_;
};

// Indexed stream of uniforms in (0, 1); same addressing as NormalStream but a
// disjoint counter lane so the two never share blocks.
class UniformStream {
 public:
  UniformStream(std::uint64_t seed, std::uint64_t stream) : gen_(seed), stream_(stream) {}

  double operator()(std::uint64_t i) const {
    const std::uint64_t block = i >> 1;
    const auto out = gen_({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                           static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32) ^ kLane});
    return (i & 1u) ? uniform_open(out[2], out[3]) : uniform_open(out[0], out[1]);
  }

 private:
  static constexpr std::uint32_t kLane = 0x80000000u;
  Philox4x32 gen_;
  std::uint64_t stream_;
};

}  // namespace sar
