#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcm/errors.hpp"
#include "pcm/ring.hpp"
#include "pcm/rng.hpp"

namespace pcm {

/// Sentinel budget for backends with unbounded multiplicative depth.
constexpr uint32_t kUnboundedDepth = UINT32_MAX;

/// Parameter set for homomorphic evaluation over Z_q slots. slot_count models
/// the RLWE polynomial degree, depth_budget the multiplicative depth the
/// ciphertext modulus of the real scheme would support.
struct HEParams {
  uint32_t slot_count = 1;
  PrimeModulus plaintext_modulus;
  uint32_t depth_budget = 0;
  std::string profile_name = "custom";
  bool batching = false;

  /// Named 128-bit-security profiles: P8k = (8192, 4079617, depth 2),
  /// P16k = (16384, 163841, depth 7), P32k = (32768, 786433, depth 16).
  static HEParams profile(std::string_view name);
  static HEParams custom(uint32_t slot_count, uint64_t plaintext_modulus,
                         uint32_t depth_budget, bool batching = false,
                         std::string name = "custom");

  /// Batching needs an NTT-friendly modulus: 2 * slot_count | q - 1.
  void validate() const;

  uint64_t q() const { return plaintext_modulus.value(); }
  uint8_t profile_id() const;

  bool operator==(const HEParams&) const = default;
};

enum class BackendKind : uint8_t { ClearRing = 1, DepthTracked = 2, RlweAdapter = 3 };

const char* to_string(BackendKind kind);

/// 128-bit random identifier; "wrong key" in the model backends is an
/// identifier mismatch.
struct KeyToken {
  std::array<uint8_t, 16> id{};
  bool operator==(const KeyToken&) const = default;
};

struct PublicKey {
  KeyToken token;
  bool relinearization_keys = true;
  bool rotation_keys = true;
};

struct SecretKey {
  KeyToken token;
};

struct KeyPair {
  PublicKey pk;
  SecretKey sk;
  HEParams params;
};

enum class Freshness : uint8_t { Fresh = 0, Evaluated = 1 };

/// Immutable encrypted vector of slot_count Z_q values with a depth budget.
/// The model backends keep the true slot values in memory; they enforce the
/// availability contract of a leveled scheme, they are not secure.
struct Ciphertext {
  BackendKind backend_id;
  KeyToken key;
  uint32_t depth_used = 0;
  Freshness freshness = Freshness::Fresh;
  std::vector<uint64_t> slots;
};

/// Monotone per-backend operation counters. Following the accounting used in
/// the cost analysis, ct_add and ct_mul count every homomorphic addition /
/// multiplication that involves a ciphertext, whether the second operand is a
/// ciphertext or a plaintext scalar; pt_mul separately tracks the
/// ciphertext-plaintext subset. exponentiations counts zero-detection calls as
/// single units; their internal multiplication chains are not itemized.
struct CostSnapshot {
  uint64_t ct_add = 0;
  uint64_t ct_mul = 0;
  uint64_t pt_mul = 0;
  uint64_t rotations = 0;
  uint64_t exponentiations = 0;

  CostSnapshot operator-(const CostSnapshot& o) const;
};

enum class ReduceOp { Sum, Product };

/// Backend contract for homomorphic evaluation. This interface is also the
/// adapter surface for a real RLWE scheme: a lattice-backed implementation
/// plugs in with identical signatures and an opaque payload.
class HeBackend {
 public:
  virtual ~HeBackend() = default;

  virtual BackendKind kind() const = 0;
  virtual const HEParams& params() const = 0;

  virtual KeyPair keygen(SeededRng& rng) = 0;

  /// Encrypts up to slot_count values (zero padded). Values must be < q.
  virtual Ciphertext encrypt(const PublicKey& pk, std::span<const uint64_t> values) = 0;
  Ciphertext encrypt_scalar(const PublicKey& pk, uint64_t value);

  /// Returns the exact slot values, or nullopt when the noise budget is
  /// exhausted (depth_used > depth_budget). Failure is a value, not a fault:
  /// callers must handle it.
  virtual std::optional<std::vector<uint64_t>> decrypt(const SecretKey& sk,
                                                       const Ciphertext& ct) = 0;

  virtual Ciphertext add(const Ciphertext& a, const Ciphertext& b) = 0;
  virtual Ciphertext sub(const Ciphertext& a, const Ciphertext& b) = 0;
  virtual Ciphertext add_plain(const Ciphertext& a, std::span<const uint64_t> b) = 0;
  virtual Ciphertext sub_plain(const Ciphertext& a, std::span<const uint64_t> b) = 0;
  /// Slot-wise b - a for plaintext b.
  virtual Ciphertext sub_from_plain(std::span<const uint64_t> b, const Ciphertext& a) = 0;
  virtual Ciphertext mul(const Ciphertext& a, const Ciphertext& b) = 0;
  virtual Ciphertext mul_plain(const Ciphertext& a, std::span<const uint64_t> b) = 0;

  Ciphertext add_scalar(const Ciphertext& a, uint64_t b);
  Ciphertext sub_scalar(const Ciphertext& a, uint64_t b);
  Ciphertext mul_scalar(const Ciphertext& a, uint64_t b);

  /// Cyclic left rotation by k slots (k may be negative).
  virtual Ciphertext rotate(const Ciphertext& ct, int64_t k, const PublicKey& pk) = 0;

  /// Folds each aligned block of `width` slots (width a power of two) with op;
  /// slot i*width of the result holds the fold of block i. A product fold
  /// consumes log2(width) depth.
  virtual Ciphertext slot_reduce(const Ciphertext& ct, ReduceOp op, uint32_t width,
                                 const PublicKey& pk) = 0;

  CostSnapshot cost_snapshot() const;
  void reset_costs();

  /// Records one zero-detection unit. Used by the core functions.
  void count_exponentiation();

 protected:
  struct Counters {
    std::atomic<uint64_t> ct_add{0};
    std::atomic<uint64_t> ct_mul{0};
    std::atomic<uint64_t> pt_mul{0};
    std::atomic<uint64_t> rotations{0};
    std::atomic<uint64_t> exponentiations{0};
  };
  mutable Counters counters_;
};

/// Pauses ct_add/ct_mul/pt_mul/rotation accounting on the current thread for
/// the lifetime of the guard. Zero-detection wraps its internal
/// exponentiation chain in one of these so the chain is billed as a single
/// exponentiation unit.
class CounterPause {
 public:
  CounterPause();
  ~CounterPause();
  CounterPause(const CounterPause&) = delete;
  CounterPause& operator=(const CounterPause&) = delete;

  static bool active();
};

/// Creates a ClearRing (unbounded depth, correctness oracle) or DepthTracked
/// (budget-enforcing) backend. BackendKind::RlweAdapter names the surface a
/// lattice library would implement; no such implementation is linked here and
/// requesting it fails with InvalidParams.
std::unique_ptr<HeBackend> make_backend(BackendKind kind, const HEParams& params);

/// Model wire format: version byte, backend_id, params profile id, depth_used
/// (varint), slot payload as packed little-endian 32-bit words. Requires
/// q < 2^32. Key token and freshness are session context and are restored by
/// the deserializer's arguments.
std::vector<uint8_t> serialize_ciphertext(const Ciphertext& ct, const HEParams& params);
Ciphertext deserialize_ciphertext(std::span<const uint8_t> bytes, const HEParams& params,
                                  const KeyToken& key, Freshness freshness);

}  // namespace pcm
