#include "filterlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace filterlab {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  // 53 random bits, shifted into (0, 1].
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
  return (static_cast<double>(bits & ((1ull << 53) - 1)) + 1.0) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

CounterStream::CounterStream(std::uint64_t seed, std::uint64_t trajectory,
                             Channel channel) noexcept
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      trajectory_lo_(static_cast<std::uint32_t>(trajectory)),
      tag_((static_cast<std::uint32_t>(channel) << 24) ^
           static_cast<std::uint32_t>(trajectory >> 32)) {}

std::array<std::uint32_t, 4> CounterStream::block(std::uint64_t index) const noexcept {
  return philox4x32({static_cast<std::uint32_t>(index),
                     static_cast<std::uint32_t>(index >> 32), trajectory_lo_, tag_},
                    key_);
}

double CounterStream::uniform(std::uint64_t index) const noexcept {
  const auto b = block(index);
  return to_unit(b[0], b[1]);
}

double CounterStream::normal(std::uint64_t index) const noexcept {
  const auto b = block(index);
  const double u1 = to_unit(b[0], b[1]);
  const double u2 = to_unit(b[2], b[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t CounterStream::bits(std::uint64_t index) const noexcept {
  const auto b = block(index);
  return (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
}

}  // namespace filterlab
