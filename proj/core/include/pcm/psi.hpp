#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pcm/core_fn.hpp"

namespace pcm {

/// Client set X of at most max_size distinct elements.
struct ClientSet {
  std::vector<Scalar> elements;
  size_t max_size;

  ClientSet(std::vector<Scalar> elements, size_t max_size);
  std::vector<uint64_t> values() const;
};

struct ServerSet {
  std::vector<Scalar> elements;
  int id = 0;

  std::vector<uint64_t> values() const;
};

/// Fixed element ordering d_1..d_|D| shared by both parties.
struct Domain {
  std::vector<Scalar> elements;

  explicit Domain(std::vector<Scalar> elements);
  size_t size() const { return elements.size(); }
  std::optional<size_t> index_of(uint64_t value) const;
};

enum class QueryVariant : uint8_t { SmallInput = 0, SmallDomain = 1 };

struct ReplicationMeta {
  uint32_t powers = 1;
  uint32_t duplicates = 1;
};

/// Encrypted client set. In the conceptual (scalar) form used by this layer
/// there is one ciphertext per element (small input) or per domain position
/// (small domain); the protocol engine packs the same content into slots.
struct Query {
  QueryVariant variant;
  std::vector<Ciphertext> ciphertexts;
  size_t declared_size = 0;
  ReplicationMeta replication;
};

Query encode_query(HeBackend& backend, const PublicKey& pk, const ClientSet& x);
Query encode_sd_query(HeBackend& backend, const PublicKey& pk, const ClientSet& x,
                      const Domain& domain);

/// One inclusion status per client element; s_i decrypts to 0 iff x_i is in y.
std::vector<InclusionResult> psi_process(HeBackend& backend, const PublicKey& pk,
                                         const Query& query, const ServerSet& y,
                                         SeededRng& rng);

/// Encrypted |X ∩ Y| via zero detection over the PSI statuses.
Ciphertext epsica_process(HeBackend& backend, const PublicKey& pk, const Query& query,
                          const ServerSet& y, SeededRng& rng);

/// Small-domain PSI: s_i = z_i * v_i decrypts to 1 iff d_i is in both sets.
/// Note the inverted zero convention relative to psi_process.
std::vector<InclusionResult> psi_sd_process(HeBackend& backend, const PublicKey& pk,
                                            const Query& query, const ServerSet& y,
                                            const Domain& domain);

Ciphertext epsica_sd_process(HeBackend& backend, const PublicKey& pk, const Query& query,
                             const ServerSet& y, const Domain& domain);

/// Sum of weights of server elements present in the client set (weights
/// aligned with y.elements). Needs zero detection.
Ciphertext psi_sum_process(HeBackend& backend, const PublicKey& pk, const Query& query,
                           const ServerSet& y, std::span<const Scalar> weights,
                           SeededRng& rng);

/// Small-domain PSI-SUM; weights aligned with the domain ordering.
Ciphertext psi_sum_sd_process(HeBackend& backend, const PublicKey& pk, const Query& query,
                              const ServerSet& y, const Domain& domain,
                              std::span<const Scalar> weights);

/// Additive protection against duplicate-element queries: R decrypts to 0 for
/// a well-formed query and is uniform over Z_q otherwise. Needs zero
/// detection; use the multiplicative form when depth is unavailable.
Ciphertext mal_check(HeBackend& backend, const PublicKey& pk, const Query& query,
                     SeededRng& rng);

/// Multiplicative protection: returns result * prod_{i<j}(x_i - x_j). An
/// honest client divides the pairwise product back out; a duplicate query
/// zeroes the response.
Ciphertext mal_check_multiplicative(HeBackend& backend, const PublicKey& pk,
                                    const Query& query, const Ciphertext& result);

/// Client-side pairwise product prod_{i<j}(x_i - x_j) over its own set.
Scalar pairwise_difference_product(std::span<const Scalar> elements, const PrimeModulus& m);

/// Client-side undo for the multiplicative check: A = M * T^-1. Throws
/// ZeroInverse iff T == 0, which tells the client its own query had
/// duplicates.
Scalar undo_multiplicative(const Scalar& t, const Scalar& m);

/// Small-domain malicious check: R = sum_i IsIn(z_i, {0,1}); 0 iff every slot
/// is binary.
Ciphertext sd_mal_check(HeBackend& backend, const PublicKey& pk, const Query& query,
                        SeededRng& rng);

/// N randomizers delta_i * R from one base check; each is 0 iff R is 0.
std::vector<Ciphertext> amortized_randomizers(HeBackend& backend, const PublicKey& pk,
                                              const Ciphertext& r, size_t n, SeededRng& rng);

/// Seeded Fisher-Yates permutation of statuses (shuffle-based cardinality
/// reveal mode).
std::vector<Ciphertext> shuffle_statuses(std::vector<Ciphertext> statuses, SeededRng& rng);

/// Decodes inclusion statuses back to set elements. `elements` carries the
/// client set (small input) or the domain ordering (small domain); the zero
/// convention is variant-aware.
std::vector<Scalar> reveal_psi(HeBackend& backend, const SecretKey& sk, QueryVariant variant,
                               std::span<const Ciphertext> statuses,
                               std::span<const Scalar> elements);

/// Single-slot decode (cardinality, sum, aggregate). DecryptFailure surfaces
/// as ProtocolFailure.
Scalar reveal_scalar(HeBackend& backend, const SecretKey& sk, const Ciphertext& ct);

}  // namespace pcm
