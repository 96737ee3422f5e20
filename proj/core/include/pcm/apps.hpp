#pragma once

#include <string>
#include <vector>

#include "pcm/engine.hpp"

namespace pcm {

/// Fixed-width structural fingerprint (166 bits for MACCS keys).
struct Fingerprint {
  std::string id;
  std::vector<uint8_t> bits;

  size_t popcount() const;
};

struct DocumentRecord {
  std::string id;
  std::vector<std::string> keywords;
};

/// Keyed hash family mapping keywords into Z_q; hash_count independent
/// functions, deterministic given the seed.
struct KeywordEncoding {
  uint32_t hash_count = 2;
  uint64_t seed = 7;
  uint64_t modulus = 0;
};

struct LabeledScalar {
  uint32_t word_index;
  uint32_t hash_index;
  uint64_t value;
};

/// Tab-separated records `<id>\t<hex or 0/1 string>`. A hex field (0x prefix)
/// is an integer whose bit j marks domain position j; a 0/1 string must have
/// exactly `width` characters and is read as a binary number the same way.
std::vector<Fingerprint> ingest_fingerprints(const std::string& path, uint32_t width);
void write_fingerprints(const std::string& path, const std::vector<Fingerprint>& fps);

std::vector<Fingerprint> synthetic_fingerprints(size_t count, uint32_t width, double density,
                                                SeededRng& rng);

/// Builds the small-domain collection over domain positions 0..width-1.
/// Empty fingerprints are rejected: an all-zero server set has no defined
/// similarity.
Collection fingerprint_collection(const std::vector<Fingerprint>& fps, uint32_t width,
                                  const PrimeModulus& m);

std::vector<uint64_t> fingerprint_positions(const Fingerprint& fp);

uint64_t hash_keyword(const std::string& word, uint32_t hash_index, const KeywordEncoding& enc);

/// t*n_c labeled scalars, word-major so the label of scalar i is i mod t.
std::vector<LabeledScalar> hash_keywords(const std::vector<std::string>& words,
                                         const KeywordEncoding& enc);

/// JSONL corpus: one {"id": ..., "keywords": [...]} record per line.
std::vector<DocumentRecord> ingest_corpus(const std::string& path);
void write_corpus(const std::string& path, const std::vector<DocumentRecord>& docs);

std::vector<DocumentRecord> synthetic_corpus(size_t count, uint32_t keywords_per_doc,
                                             size_t vocabulary, SeededRng& rng);

/// Hashes every document's keywords under each hash label.
Collection document_collection(const std::vector<DocumentRecord>& docs,
                               const KeywordEncoding& enc, uint32_t max_keywords);

SessionConfig chem_config(AggSelect agg, const std::string& profile, BackendKind backend,
                          uint32_t width = 166);
SessionConfig doc_config(AggSelect agg, const std::string& profile, BackendKind backend,
                         uint32_t hash_count = 2, uint32_t repetitions = 1);

struct SearchResult {
  RevealedAggregate revealed;
  QueryOutcome outcome;
};

/// End-to-end loopback runs: spin up a server on an ephemeral local port,
/// issue one query, and reveal the response.
SearchResult chem_search(const Fingerprint& query, const std::vector<Fingerprint>& collection,
                         const SessionConfig& cfg);
SearchResult doc_search(const std::vector<std::string>& keywords,
                        const std::vector<DocumentRecord>& corpus, const SessionConfig& cfg);

/// Analytic per-document keyword-mapping false-positive rate, in bits:
/// hash_count * log2(q). Inferred from the plaintext modulus.
double doc_mapping_fp_bits(uint64_t q, uint32_t hash_count);

/// Desk-scale cost sweep. Runs the scenario pipeline in scalar mode on the
/// ClearRing backend for each collection size and checks the measured layer
/// deltas against the published per-row operation formulas.
std::string bench_csv(const std::string& scenario, const std::vector<size_t>& sweep,
                      uint64_t seed);

}  // namespace pcm
