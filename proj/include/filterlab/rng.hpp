#pragma once

#include <array>
#include <cstdint>

namespace filterlab {

// Philox4x32-10 block function. Pure: the output depends only on
// (counter, key), which makes every draw addressable.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

enum class Channel : std::uint32_t {
  initial_state = 1,
  state_noise = 2,
  observation_noise = 3,
  bootstrap = 4,
};

// Random stream for one (master seed, trajectory, channel) triple. Draw k
// is a function of k alone, so trajectories can be advanced in any order
// or on any thread without changing a single bit.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t trajectory, Channel channel) noexcept;

  // 53-bit uniform in (0, 1].
  double uniform(std::uint64_t index) const noexcept;
  // Standard normal (Box-Muller on one Philox block).
  double normal(std::uint64_t index) const noexcept;
  std::uint64_t bits(std::uint64_t index) const noexcept;

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t index) const noexcept;

  std::array<std::uint32_t, 2> key_;
  std::uint32_t trajectory_lo_;
  std::uint32_t tag_;
};

// Sequential view over a CounterStream.
class StreamCursor {
 public:
  explicit StreamCursor(CounterStream stream, std::uint64_t start = 0) noexcept
      : stream_(stream), next_(start) {}
  double normal() noexcept { return stream_.normal(next_++); }
  double uniform() noexcept { return stream_.uniform(next_++); }
  std::uint64_t bits() noexcept { return stream_.bits(next_++); }
  std::uint64_t position() const noexcept { return next_; }

 private:
  CounterStream stream_;
  std::uint64_t next_;
};

}  // namespace filterlab
