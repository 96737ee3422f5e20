#pragma once

#include <span>
#include <vector>

#include "pcm/backend.hpp"

namespace pcm {

/// Output of an inclusion test: decrypts to 0 in a slot iff the tested value
/// equals some set element, otherwise uniform over Z_q^*.
struct InclusionResult {
  Ciphertext ct;
};

inline uint32_t ceil_log2(uint64_t x) {
  return x <= 1 ? 0 : static_cast<uint32_t>(std::bit_width(x - 1));
}

/// Multiplicative depth of raising a ciphertext to the given exponent with a
/// balanced square-and-multiply ladder.
inline uint32_t exponent_depth(uint64_t exp) { return ceil_log2(exp); }

/// x^exp with multiplication-DAG depth ceil(log2 exp). exp >= 1.
Ciphertext ct_pow(HeBackend& backend, const Ciphertext& x, uint64_t exp);

/// Balanced product tree over factors; depth ceil(log2 n), n-1 multiplications.
Ciphertext balanced_product(HeBackend& backend, std::span<const Ciphertext> factors);

/// Slot-wise b = 1 - x^(q-1): 1 where the slot is 0, else 0. Consumes
/// ceil(log2(q-1)) depth; throws DepthUnavailable when the tracked budget
/// cannot absorb that. Billed as one exponentiation unit.
Ciphertext is_zero(HeBackend& backend, const PublicKey& pk, const Ciphertext& x);

/// One-unit test for x == value (zero detection at a plaintext offset).
Ciphertext is_equal_to(HeBackend& backend, const PublicKey& pk, const Ciphertext& x,
                       uint64_t value);

/// r * prod_i (x - y_i) over an encrypted set. Depth ceil(log2 |Y|) above the
/// inputs; the r mask is a plaintext multiplication.
InclusionResult is_in_encrypted(HeBackend& backend, const PublicKey& pk, const Ciphertext& x,
                                std::span<const Ciphertext> ys, SeededRng& rng);

/// Same test against a plaintext set, product form.
InclusionResult is_in_set(HeBackend& backend, const PublicKey& pk, const Ciphertext& x,
                          std::span<const uint64_t> ys, SeededRng& rng);

/// Plaintext element against an encrypted set: r * prod_i (x - [y_i]).
InclusionResult is_in_encrypted_set_of(HeBackend& backend, const PublicKey& pk, uint64_t x,
                                       std::span<const Ciphertext> ys, SeededRng& rng);

enum class PowerCompletion {
  /// Missing powers are assembled from supplied ones by pairwise products
  /// (x^i = x^a * x^b), adding ceil(log2 ceil(|Y|/p)) depth.
  Auto,
  /// Require all |Y| powers up front; otherwise InsufficientPowers.
  None,
};

/// Coefficient form of the inclusion test: r * sum_i a_i [x^i] with
/// [a_0..a_n] the monic coefficients of prod (X - y_i). powers holds
/// [x^1, x^2, ..., x^p]. With p >= |Y| this consumes no ct-ct depth beyond
/// the supplied powers.
InclusionResult is_in_plain(HeBackend& backend, const PublicKey& pk,
                            std::span<const Ciphertext> powers, std::span<const uint64_t> ys,
                            SeededRng& rng, PowerCompletion completion = PowerCompletion::Auto);

}  // namespace pcm
