#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "pcm/core_fn.hpp"
#include "pcm/psi.hpp"

namespace pcm {

/// Small exact rational for matching parameters (alpha, beta, t).
struct Fraction {
  int64_t num = 0;
  int64_t den = 1;

  Fraction() = default;
  Fraction(int64_t n, int64_t d);
  static Fraction parse(std::string_view text);  // "4/5", "0.8", "1"

  bool operator==(const Fraction&) const = default;
};

/// Integer coefficients (a, b, c) of the similarity inequality
/// a*|X ∩ Y| - b*|X| - c*|Y| >= 0, gcd-reduced, with a > 0 and a-b-c >= 0.
struct TverskyParams {
  Fraction alpha;
  Fraction beta;
  Fraction t;
  uint64_t a = 0;
  uint64_t b = 0;
  uint64_t c = 0;

  /// Bypass the parameter transform; used to exercise scaling invariance.
  static TverskyParams from_coefficients(uint64_t a, uint64_t b, uint64_t c);
};

/// Turns rational (alpha, beta, t) into the reduced integer coefficients.
/// Throws InvalidThreshold for t outside (0, 1] and InvalidParams for
/// degenerate coefficient sets.
TverskyParams tversky_param_process(const Fraction& alpha, const Fraction& beta,
                                    const Fraction& t);

/// Jaccard is Tversky with alpha = beta = 1.
TverskyParams jaccard_params(const Fraction& t);

/// Encrypted per-set matching value gamma: decrypts to 0 iff the set matches.
struct MatchingStatus {
  Ciphertext ct;
  int set_id = 0;
};

/// Full containment over small-input PSI statuses: gamma = sum_i s_i.
/// An empty status list (empty client set) matches vacuously.
MatchingStatus f_match(HeBackend& backend, const PublicKey& pk,
                       std::span<const InclusionResult> statuses, int set_id);

/// Full containment from small-domain statuses. Each missing indicator
/// z_i * (1 - v_i) gets an independent mask so that gamma follows the same
/// distribution contract as the small-input form.
MatchingStatus f_match_sd(HeBackend& backend, const PublicKey& pk, const Query& query,
                          std::span<const InclusionResult> statuses, int set_id,
                          SeededRng& rng);

/// Threshold match on an encrypted cardinality: gamma = IsIn(ca, [t_min, t_max]).
/// t_min > t_max yields a constant non-match.
MatchingStatus th_match(HeBackend& backend, const PublicKey& pk, const Ciphertext& ca,
                        uint64_t t_min, uint64_t t_max, int set_id, SeededRng& rng);

/// Tversky match, small-input form (|X| known in plaintext). The affine test
/// 0 <= a*ca - b|X| - c|Y| <= (a-b-c)|Y| is folded into the inclusion set, so
/// the cost is exactly one inclusion test over the threshold range.
MatchingStatus tv_match(HeBackend& backend, const PublicKey& pk, const Ciphertext& ca,
                        uint64_t size_x, uint64_t size_y, const TverskyParams& params,
                        int set_id, SeededRng& rng);

/// Tversky match, small-domain form (|X| only available encrypted;
/// size_x_bound is the public upper bound |D| used for the ring-size guard).
MatchingStatus tv_match(HeBackend& backend, const PublicKey& pk, const Ciphertext& ca,
                        const Ciphertext& size_x, uint64_t size_x_bound, uint64_t size_y,
                        const TverskyParams& params, int set_id, SeededRng& rng);

/// lambda = 1 iff gamma decrypts to zero.
bool match_reveal(HeBackend& backend, const SecretKey& sk, const MatchingStatus& status);

}  // namespace pcm
