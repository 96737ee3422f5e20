#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pcm/agg.hpp"
#include "pcm/config.hpp"
#include "pcm/tcp.hpp"
#include "pcm/wire.hpp"

namespace pcm {

/// Server-side data: the collection of sets, the shared domain for
/// small-domain sessions, and optional per-set associated data for retrieval.
struct Collection {
  std::vector<ServerSet> sets;
  std::optional<Domain> domain;
  std::vector<Scalar> associated;
  /// Labeled small-input subsets: hashed[set][label] is the value list that
  /// query scalar i (label = i mod hash_count) is tested against. Empty means
  /// every scalar is tested against sets[i].elements.
  std::vector<std::vector<std::vector<uint64_t>>> hashed;
};

/// Deterministic lane assignment for small-domain batching: sets are padded
/// to a power-of-two lane and packed lanes_per_group per ciphertext group.
struct EvalPlan {
  uint32_t lane_width = 0;
  uint32_t lanes_per_group = 0;
  std::vector<std::vector<size_t>> groups;  // set indices, in evaluation order

  size_t group_of(size_t position) const { return position / lanes_per_group; }
  uint32_t lane_of(size_t position) const {
    return static_cast<uint32_t>(position % lanes_per_group);
  }
};

EvalPlan pack_server_sets(size_t set_count, uint32_t domain_width, uint32_t slot_count);

uint32_t next_pow2(uint32_t v);

/// Client-side slot layout for a replicated small-input query: `duplicates`
/// contiguous copies, each holding `powers` consecutive power slots
/// x_i^1..x_i^p per element, with the per-copy block count padded to a power
/// of two. Small-domain queries replicate the indicator lane instead.
struct ReplicatedLayout {
  uint32_t element_count = 0;
  uint32_t powers = 1;
  uint32_t duplicates = 1;
  uint32_t block_slots = 0;  // padded element blocks per copy
  uint32_t copy_width = 0;   // slots per copy

  size_t slot(uint32_t copy, uint32_t element, uint32_t power_index) const {
    return static_cast<size_t>(copy) * copy_width +
           static_cast<size_t>(element) * powers + power_index;
  }

  static ReplicatedLayout for_small_input(uint32_t element_count, uint32_t powers,
                                          uint32_t duplicates, uint32_t slot_count);
};

/// Packs powers and duplicates of the raw query values into one ciphertext.
Query encode_replicated_query(HeBackend& backend, const PublicKey& pk,
                              std::span<const uint64_t> values, uint32_t powers,
                              uint32_t duplicates);

/// Small-domain form: the indicator lane of width next_pow2(domain_width),
/// duplicated across `duplicates` lanes.
Query encode_replicated_sd_query(HeBackend& backend, const PublicKey& pk,
                                 const ClientSet& x, const Domain& domain,
                                 uint32_t duplicates);

/// Replication honesty check: the returned ciphertext decrypts to 0 in slot 0
/// for honestly replicated queries, and non-zero (with probability at least
/// 1 - 1/(q-1)) when any duplicate differs or any power chain is broken.
/// Computed once per query.
Ciphertext replication_check(HeBackend& backend, const PublicKey& pk, const Query& query,
                             SeededRng& rng);

/// How response ciphertexts map to revealed values.
enum class ResponseLayout : uint8_t {
  ScalarSlot0 = 0,       // one value per ciphertext at slot 0
  LanePerSet = 1,        // small-domain lanes: one set per lane base
  CopyPerRepetition = 2  // small-input copies: one repetition per copy base
};

struct EngineResult {
  wire::ResponseBody response;
  CostSnapshot cost;
  double wall_ms = 0;
};

/// Server evaluation engine: runs the configured matching pipeline over the
/// whole collection for one query, aggregates, and applies the configured
/// hardening randomizers. Deterministic given the session seed, including
/// across worker thread counts.
class ServerEngine {
 public:
  ServerEngine(SessionConfig cfg, Collection collection);

  void set_client_key(const PublicKey& pk) { client_pk_ = pk; }
  const HEParams& params() const { return params_; }
  HeBackend& backend() { return *backend_; }
  const SessionConfig& config() const { return cfg_; }
  const EvalPlan& plan() const { return plan_; }

  EngineResult evaluate(const wire::QueryBody& query_body);

 private:
  Query decode_query(const wire::QueryBody& body) const;

  std::vector<MatchingStatus> scalar_statuses(const Query& query, SeededRng& rng) const;
  MatchingStatus scalar_status_for(const Query& query, size_t set_index,
                                   SeededRng& rng) const;
  wire::ResponseBody scalar_pipeline(const Query& query, SeededRng& rng) const;
  wire::ResponseBody batched_sd_pipeline(const Query& query, SeededRng& rng) const;
  wire::ResponseBody batched_si_pipeline(const Query& query, SeededRng& rng) const;

  void apply_additive_randomizer(wire::ResponseBody& resp, const Query& query,
                                 SeededRng& rng) const;
  std::vector<uint8_t> pack_ct(const Ciphertext& ct) const;
  Ciphertext unpack_ct(const std::vector<uint8_t>& blob, Freshness freshness) const;
  Ciphertext lane_membership(const Ciphertext& ct,
                             const std::vector<std::vector<uint64_t>>& lane_sets,
                             SeededRng& rng) const;

  SessionConfig cfg_;
  HEParams params_;
  std::unique_ptr<HeBackend> backend_;
  Collection collection_;
  EvalPlan plan_;
  PublicKey client_pk_;
  SeededRng session_rng_;
  uint64_t query_counter_ = 0;
  // Precomputed per-set data: domain membership bitmaps (small domain) and
  // monic subset polynomial coefficients (batched small input).
  std::vector<std::vector<uint8_t>> bitmaps_;
  std::vector<std::vector<std::vector<uint64_t>>> polys_;
};

/// Append-only structured audit log (one JSON record per line).
class AuditLog {
 public:
  explicit AuditLog(std::string path) : path_(std::move(path)) {}
  void append(const std::string& session_id, const SessionConfig& cfg,
              const EngineResult& result, size_t query_bytes, size_t response_bytes);

 private:
  std::string path_;
};

/// Serves sessions accepted from the listener. Each session expects Hello,
/// Setup, then exactly one Query, answers with one Response, and closes.
/// Protocol-ordering violations are answered with an Error frame. Returns
/// after max_sessions sessions (0 = forever).
void serve(TcpListener& listener, const SessionConfig& cfg, const Collection& collection,
           AuditLog* audit, size_t max_sessions = 0);

struct ClientSession {
  SessionConfig cfg;
  HEParams params;
  std::shared_ptr<HeBackend> backend;
  KeyPair keys;
  /// Pairwise difference product of the last query, kept for undoing the
  /// multiplicative mal-check on numeric reveals.
  uint64_t last_pairwise_product = 1;
};

ClientSession make_client_session(const SessionConfig& cfg, uint64_t key_seed);

/// Client-side query construction: scalar mode encrypts per element; batched
/// mode packs replication lanes.
wire::QueryBody build_query(ClientSession& session, std::span<const uint64_t> values);

RevealedAggregate reveal_response(ClientSession& session, const wire::ResponseBody& resp);

struct QueryOutcome {
  RevealedAggregate result;
  std::vector<wire::MsgType> sent;
  std::vector<wire::MsgType> received;
  size_t query_bytes = 0;
  size_t response_bytes = 0;
};

/// One full protocol run: Hello, Setup, Query -> Response, reveal.
QueryOutcome run_client_query(const std::string& host, uint16_t port, ClientSession& session,
                              std::span<const uint64_t> values);

}  // namespace pcm
