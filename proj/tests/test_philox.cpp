#include <doctest.h>

#include <cmath>

#include "sar/philox.hpp"

using sar::Philox4x32;

TEST_CASE("philox known-answer vectors") {
  // Reference values from the Random123 distribution.
  const Philox4x32 zero(0);
  const auto r = zero({0, 0, 0, 0});
  CHECK(r[0] == 0x6627e8d5u);
  CHECK(r[1] == 0xe169c58du);
  CHECK(r[2] == 0xbc57ac4cu);
  CHECK(r[3] == 0x9b00dbd8u);
}

TEST_CASE("uniforms stay in the open unit interval") {
  CHECK(sar::uniform_open(0, 0) > 0.0);
  CHECK(sar::uniform_open(0xffffffffu, 0xffffffffu) < 1.0);
}

TEST_CASE("normal stream moments and addressing") {
  const sar::NormalStream s(42, 3);
  constexpr int kN = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < kN; ++i) {
    const double z = s(static_cast<std::uint64_t>(i));
    sum += z;
    sq += z * z;
  }
  const double mean = sum / kN;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(double(kN)));
  CHECK(std::abs(sq / kN - mean * mean - 1.0) < 0.02);

  // Random access is pure.
  CHECK(s(12345) == sar::NormalStream(42, 3)(12345));
  CHECK(s(7) != sar::NormalStream(42, 4)(7));
  CHECK(s(7) != sar::NormalStream(43, 3)(7));
}
