#include "pcm/rng.hpp"

#include <sodium.h>

#include <cstring>
#include <mutex>
#include <stdexcept>

namespace pcm {

namespace {

void ensure_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
  });
}

}  // namespace

SeededRng::SeededRng(const Seed& seed) : key_(seed) {
  ensure_sodium();
  refill();
}

SeededRng::SeededRng(uint64_t seed) {
  ensure_sodium();
  uint8_t bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<uint8_t>(seed >> (8 * i));
  crypto_generichash(key_.data(), key_.size(), bytes, sizeof(bytes), nullptr, 0);
  refill();
}

SeededRng::SeededRng(std::string_view seed_phrase) {
  ensure_sodium();
  crypto_generichash(key_.data(), key_.size(),
                     reinterpret_cast<const uint8_t*>(seed_phrase.data()),
                     seed_phrase.size(), nullptr, 0);
  refill();
}

void SeededRng::refill() {
  uint8_t nonce[8];
  for (int i = 0; i < 8; ++i) nonce[i] = static_cast<uint8_t>(counter_ >> (8 * i));
  ++counter_;
  std::memset(block_.data(), 0, block_.size());
  crypto_stream_chacha20(block_.data(), block_.size(), nonce, key_.data());
  pos_ = 0;
}

void SeededRng::fill(uint8_t* out, size_t len) {
  while (len > 0) {
    if (pos_ == block_.size()) refill();
    size_t take = std::min(len, block_.size() - pos_);
    std::memcpy(out, block_.data() + pos_, take);
    pos_ += take;
    out += take;
    len -= take;
  }
}

uint64_t SeededRng::next_u64() {
  uint8_t bytes[8];
  fill(bytes, sizeof(bytes));
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes[i]) << (8 * i);
  return v;
}

uint64_t SeededRng::uniform_below(uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_below: bound must be > 0");
  if ((bound & (bound - 1)) == 0) return next_u64() & (bound - 1);
  // Rejection sampling over the largest multiple of bound below 2^64.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % bound;
}

SeededRng SeededRng::fork(uint64_t label) const {
  Seed child{};
  uint8_t msg[40];
  std::memcpy(msg, key_.data(), 32);
  for (int i = 0; i < 8; ++i) msg[32 + i] = static_cast<uint8_t>(label >> (8 * i));
  crypto_generichash(child.data(), child.size(), msg, sizeof(msg), nullptr, 0);
  return SeededRng(child);
}

}  // namespace pcm
