#include "filterlab/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace filterlab;

// Known-answer vectors from the Random123 distribution (kat_vectors).
TEST_CASE("philox4x32-10 known answers") {
  using C = std::array<std::uint32_t, 4>;
  using K = std::array<std::uint32_t, 2>;
  CHECK(philox4x32(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, K{0xffffffffu, 0xffffffffu}) ==
        C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, K{0xa4093822u, 0x299f31d0u}) ==
        C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("counter streams are addressable") {
  const CounterStream s(42, 7, Channel::state_noise);
  std::vector<double> forward, backward(100);
  for (std::uint64_t i = 0; i < 100; ++i) forward.push_back(s.normal(i));
  for (std::uint64_t i = 100; i-- > 0;) backward[i] = s.normal(i);
  CHECK(forward == backward);

  // channels, trajectories and seeds all separate the streams
  CHECK(s.bits(0) != CounterStream(42, 7, Channel::observation_noise).bits(0));
  CHECK(s.bits(0) != CounterStream(42, 8, Channel::state_noise).bits(0));
  CHECK(s.bits(0) != CounterStream(43, 7, Channel::state_noise).bits(0));
}

TEST_CASE("uniform range and normal moments") {
  StreamCursor c(CounterStream(1, 0, Channel::bootstrap));
  const int n = 200000;
  double m = 0.0, m2 = 0.0, m4 = 0.0, umin = 1.0, umax = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = c.normal();
    m += z;
    m2 += z * z;
    m4 += z * z * z * z;
    const double u = c.uniform();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
  }
  m /= n;
  m2 /= n;
  m4 /= n;
  CHECK(std::abs(m) < 5.0 / std::sqrt(n));
  CHECK(std::abs(m2 - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(m4 - 3.0) < 5.0 * std::sqrt(96.0 / n));
  CHECK(umin > 0.0);
  CHECK(umax <= 1.0);
}
