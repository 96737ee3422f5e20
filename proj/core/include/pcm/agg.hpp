#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pcm/match.hpp"

namespace pcm {

enum class AggKind : uint8_t {
  Naive = 0,
  Existential = 1,
  ExistentialChunked = 2,
  Cardinality = 3,
  CardinalityShuffled = 4,
  Retrieval = 5,
};

const char* to_string(AggKind kind);

/// Collection-wide encrypted result plus the metadata needed to decode it.
struct AggregateResponse {
  AggKind kind = AggKind::Naive;
  std::vector<Ciphertext> ciphertexts;
  uint32_t chunk_width = 0;  // 2^l, chunked existential only
  uint64_t set_count = 0;
};

/// Per-set associated data for retrieval; 0 is reserved as the "no such
/// match" sentinel, so data values must be non-zero.
struct AssociatedData {
  std::vector<Scalar> values;
  uint64_t kappa = 1;

  AssociatedData(std::vector<Scalar> values, uint64_t kappa);
};

AggregateResponse na_agg(std::span<const MatchingStatus> statuses);

/// Existential search: the full product of statuses is zero iff some set
/// matches. With chunk_level l set, emits ceil(N / 2^l) scalars, one per
/// contiguous chunk of 2^l sets. Each product is re-randomized with a fresh
/// plaintext mask.
AggregateResponse x_agg(HeBackend& backend, const PublicKey& pk,
                        std::span<const MatchingStatus> statuses,
                        std::optional<uint32_t> chunk_level, SeededRng& rng);

enum class CaMode { IsZero, Shuffle };

/// Cardinality search: IsZero mode sums zero indicators into one scalar;
/// Shuffle mode returns the statuses under a seeded permutation, whose
/// zero count is the answer.
AggregateResponse ca_agg(HeBackend& backend, const PublicKey& pk,
                         std::span<const MatchingStatus> statuses, CaMode mode,
                         SeededRng& rng);

/// Retrieval of the kappa'th matching set's datum, by an encrypted prefix
/// counter over zero indicators. Decrypts to 0 when fewer than kappa sets
/// match.
AggregateResponse ret_agg(HeBackend& backend, const PublicKey& pk,
                          std::span<const MatchingStatus> statuses,
                          const AssociatedData& data, SeededRng& rng);

struct RevealedAggregate {
  AggKind kind;
  bool bit = false;                  // Existential / ExistentialChunked (OR of chunks)
  std::vector<bool> bits;            // Naive
  std::vector<bool> chunk_bits;      // ExistentialChunked
  uint64_t count = 0;                // Cardinality / CardinalityShuffled
  uint64_t value = 0;                // Retrieval
};

RevealedAggregate agg_reveal(HeBackend& backend, const SecretKey& sk,
                             const AggregateResponse& resp);

}  // namespace pcm
