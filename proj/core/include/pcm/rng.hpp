#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace pcm {

/// Deterministic seedable random generator backed by the ChaCha20 stream
/// cipher (via libsodium). All protocol randomness flows through instances of
/// this class so that runs are reproducible under a fixed seed.
///
/// Instances are NOT thread safe; use fork() to derive independent
/// per-task streams instead of sharing one handle across threads.
class SeededRng {
 public:
  using Seed = std::array<uint8_t, 32>;

  explicit SeededRng(const Seed& seed);
  explicit SeededRng(uint64_t seed);
  explicit SeededRng(std::string_view seed_phrase);

  uint64_t next_u64();

  /// Uniform in [0, bound) by rejection sampling. bound must be > 0.
  uint64_t uniform_below(uint64_t bound);

  void fill(uint8_t* out, size_t len);

  /// Derives an independent child stream. Children with distinct labels are
  /// computationally independent of each other and of the parent's future
  /// output, which keeps multi-threaded protocol runs deterministic: each
  /// task gets fork(task_index) regardless of scheduling order.
  SeededRng fork(uint64_t label) const;

 private:
  void refill();

  Seed key_{};
  uint64_t counter_ = 0;
  std::array<uint8_t, 512> block_{};
  size_t pos_ = 0;
};

}  // namespace pcm
