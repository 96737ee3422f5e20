#include "pcm/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace pcm {

namespace {

// Stable fork labels for the per-query randomness tree.
constexpr uint64_t kAggLabel = UINT64_MAX;
constexpr uint64_t kMalLabel = UINT64_MAX - 1;
constexpr uint64_t kShuffleLabel = UINT64_MAX - 2;
constexpr uint64_t kBatchLabel = UINT64_MAX - 4;

void parallel_for(size_t n, uint32_t threads, const std::function<void(size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  size_t workers = std::min<size_t>(threads, n);
  std::exception_ptr error;
  std::mutex error_mu;
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<uint64_t> random_vector(SeededRng& rng, size_t n, uint64_t q, bool nonzero) {
  std::vector<uint64_t> v(n);
  for (auto& x : v) x = nonzero ? 1 + rng.uniform_below(q - 1) : rng.uniform_below(q);
  return v;
}

std::string hex(std::span<const uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

}  // namespace

uint32_t next_pow2(uint32_t v) {
  if (v <= 1) return 1;
  return uint32_t{1} << ceil_log2(v);
}

EvalPlan pack_server_sets(size_t set_count, uint32_t domain_width, uint32_t slot_count) {
  if (domain_width == 0) raise(ErrorCode::InvalidParams, "domain width must be positive");
  EvalPlan plan;
  plan.lane_width = next_pow2(domain_width);
  if (plan.lane_width > slot_count) {
    raise(ErrorCode::CapacityExceeded, "domain lane does not fit in one ciphertext");
  }
  plan.lanes_per_group = slot_count / plan.lane_width;
  size_t groups = set_count == 0 ? 0 : (set_count + plan.lanes_per_group - 1) / plan.lanes_per_group;
  plan.groups.resize(groups);
  for (size_t i = 0; i < set_count; ++i) {
    plan.groups[i / plan.lanes_per_group].push_back(i);
  }
  return plan;
}

ReplicatedLayout ReplicatedLayout::for_small_input(uint32_t element_count, uint32_t powers,
                                                   uint32_t duplicates, uint32_t slot_count) {
  if (element_count == 0) raise(ErrorCode::InvalidParams, "empty replicated query");
  if (powers == 0 || duplicates == 0) {
    raise(ErrorCode::InvalidParams, "powers and duplicates must be >= 1");
  }
  ReplicatedLayout layout;
  layout.element_count = element_count;
  layout.powers = powers;
  layout.duplicates = duplicates;
  layout.block_slots = next_pow2(element_count);
  layout.copy_width = layout.block_slots * powers;
  uint64_t needed = static_cast<uint64_t>(layout.copy_width) * duplicates;
  if (needed > slot_count) {
    raise(ErrorCode::SlotOverflow, "replicated layout needs " + std::to_string(needed) +
                                       " slots, have " + std::to_string(slot_count));
  }
  return layout;
}

Query encode_replicated_query(HeBackend& backend, const PublicKey& pk,
                              std::span<const uint64_t> values, uint32_t powers,
                              uint32_t duplicates) {
  const HEParams& params = backend.params();
  ReplicatedLayout layout = ReplicatedLayout::for_small_input(
      static_cast<uint32_t>(values.size()), powers, duplicates, params.slot_count);
  const uint64_t q = params.q();
  std::vector<uint64_t> slots(params.slot_count, 0);
  for (uint32_t i = 0; i < values.size(); ++i) {
    uint64_t pw = 1;
    for (uint32_t j = 0; j < powers; ++j) {
      pw = mul_mod(pw, values[i] % q, q);
      slots[layout.slot(0, i, j)] = pw;
    }
  }
  for (uint32_t c = 1; c < duplicates; ++c) {
    std::copy(slots.begin(), slots.begin() + layout.copy_width,
              slots.begin() + static_cast<size_t>(c) * layout.copy_width);
  }
  Query query;
  query.variant = QueryVariant::SmallInput;
  query.declared_size = values.size();
  query.replication = ReplicationMeta{powers, duplicates};
  query.ciphertexts.push_back(backend.encrypt(pk, slots));
  return query;
}

Query encode_replicated_sd_query(HeBackend& backend, const PublicKey& pk, const ClientSet& x,
                                 const Domain& domain, uint32_t duplicates) {
  const HEParams& params = backend.params();
  const uint32_t lane = next_pow2(static_cast<uint32_t>(domain.size()));
  if (static_cast<uint64_t>(lane) * duplicates > params.slot_count) {
    raise(ErrorCode::SlotOverflow, "indicator lanes exceed slot count");
  }
  std::vector<uint64_t> slots(params.slot_count, 0);
  for (const Scalar& e : x.elements) {
    auto idx = domain.index_of(e.value());
    if (!idx) raise(ErrorCode::OutOfDomain, "client element outside domain");
    slots[*idx] = 1;
  }
  for (uint32_t c = 1; c < duplicates; ++c) {
    std::copy(slots.begin(), slots.begin() + lane,
              slots.begin() + static_cast<size_t>(c) * lane);
  }
  Query query;
  query.variant = QueryVariant::SmallDomain;
  query.declared_size = domain.size();
  query.replication = ReplicationMeta{1, duplicates};
  query.ciphertexts.push_back(backend.encrypt(pk, slots));
  return query;
}

Ciphertext replication_check(HeBackend& backend, const PublicKey& pk, const Query& query,
                             SeededRng& rng) {
  if (query.ciphertexts.size() != 1) {
    raise(ErrorCode::InvalidParams, "replication check expects a packed query");
  }
  const HEParams& params = backend.params();
  const uint64_t q = params.q();
  const Ciphertext& qct = query.ciphertexts.front();
  const uint32_t p = query.replication.powers;
  const uint32_t k = query.replication.duplicates;
  const uint32_t copy_width =
      query.variant == QueryVariant::SmallDomain
          ? next_pow2(static_cast<uint32_t>(query.declared_size))
          : ReplicatedLayout::for_small_input(static_cast<uint32_t>(query.declared_size), p, k,
                                              params.slot_count)
                .copy_width;

  std::vector<Ciphertext> pieces;

  if (k > 1) {
    // (1) all duplicates are equal: copy c must match copy c+1 on the first
    // (k-1) copies.
    Ciphertext diff = backend.sub(qct, backend.rotate(qct, copy_width, pk));
    std::vector<uint64_t> mask(params.slot_count, 0);
    size_t valid = static_cast<size_t>(copy_width) * (k - 1);
    for (size_t s = 0; s < valid; ++s) mask[s] = 1 + rng.uniform_below(q - 1);
    pieces.push_back(backend.mul_plain(diff, mask));
  }

  if (query.variant == QueryVariant::SmallInput && p > 1) {
    // (2) power chains hold: slot j+1 equals x * slot j within each block.
    ReplicatedLayout layout = ReplicatedLayout::for_small_input(
        static_cast<uint32_t>(query.declared_size), p, k, params.slot_count);
    std::vector<uint64_t> first_mask(params.slot_count, 0);
    for (uint32_t c = 0; c < k; ++c) {
      for (uint32_t i = 0; i < layout.element_count; ++i) first_mask[layout.slot(c, i, 0)] = 1;
    }
    Ciphertext first = backend.mul_plain(qct, first_mask);
    Ciphertext spread = first;
    for (uint32_t j = 1; j < p; ++j) {
      spread = backend.add(spread, backend.rotate(first, -static_cast<int64_t>(j), pk));
    }
    // chained slot (c,i,j) = x_i * x_i^(j+1); the honest query has that value
    // one slot to the right.
    Ciphertext chained = backend.mul(qct, spread);
    Ciphertext shifted = backend.rotate(qct, 1, pk);
    Ciphertext diff = backend.sub(shifted, chained);
    std::vector<uint64_t> mask(params.slot_count, 0);
    for (uint32_t c = 0; c < k; ++c) {
      for (uint32_t i = 0; i < layout.element_count; ++i) {
        for (uint32_t j = 0; j + 1 < p; ++j) {
          mask[layout.slot(c, i, j)] = 1 + rng.uniform_below(q - 1);
        }
      }
    }
    pieces.push_back(backend.mul_plain(diff, mask));
  }

  if (pieces.empty()) return backend.encrypt(pk, {});

  Ciphertext acc = pieces.front();
  for (size_t i = 1; i < pieces.size(); ++i) acc = backend.add(acc, pieces[i]);
  acc = backend.slot_reduce(acc, ReduceOp::Sum, params.slot_count, pk);
  // Keep the sentinel in slot 0 only.
  std::vector<uint64_t> keep(params.slot_count, 0);
  keep[0] = 1;
  return backend.mul_plain(acc, keep);
}

ServerEngine::ServerEngine(SessionConfig cfg, Collection collection)
    : cfg_(std::move(cfg)),
      params_(cfg_.he_params()),
      backend_(make_backend(cfg_.backend, params_)),
      collection_(std::move(collection)),
      session_rng_(cfg_.seed) {
  cfg_.validate();
  if (collection_.sets.empty()) raise(ErrorCode::EmptySet, "server collection is empty");
  if (cfg_.psi_variant == QueryVariant::SmallDomain) {
    if (!collection_.domain) raise(ErrorCode::ConfigError, "small-domain session needs a domain");
    if (collection_.domain->size() != cfg_.domain_width) {
      raise(ErrorCode::ConfigError, "domain width mismatch");
    }
    if (cfg_.batched) {
      plan_ = pack_server_sets(collection_.sets.size(), cfg_.domain_width, params_.slot_count);
    }
  }
  if (!collection_.hashed.empty() && collection_.hashed.size() != collection_.sets.size()) {
    raise(ErrorCode::ConfigError, "hashed subsets must cover every set");
  }
  if (cfg_.batched && cfg_.psi_variant == QueryVariant::SmallInput) {
    if (cfg_.match != MatchKind::F) {
      raise(ErrorCode::ConfigError, "batched small-input sessions support full matching only");
    }
    if (cfg_.mal_check != MalCheckMode::Off) {
      raise(ErrorCode::ConfigError,
            "small-input mal-check needs scalar mode; batched sessions use the replication check");
    }
  }
  if (cfg_.agg == AggSelect::Ret) {
    if (collection_.associated.size() != collection_.sets.size()) {
      raise(ErrorCode::ConfigError, "retrieval needs one associated datum per set");
    }
  }

  if (cfg_.psi_variant == QueryVariant::SmallDomain) {
    bitmaps_.resize(collection_.sets.size());
    for (size_t s = 0; s < collection_.sets.size(); ++s) {
      auto& bits = bitmaps_[s];
      bits.assign(cfg_.domain_width, 0);
      for (const Scalar& e : collection_.sets[s].elements) {
        if (auto idx = collection_.domain->index_of(e.value())) bits[*idx] = 1;
      }
    }
  }

  if (cfg_.batched && cfg_.psi_variant == QueryVariant::SmallInput) {
    const PrimeModulus& m = params_.plaintext_modulus;
    polys_.resize(collection_.sets.size());
    for (size_t s = 0; s < collection_.sets.size(); ++s) {
      std::vector<std::vector<uint64_t>> subsets;
      if (collection_.hashed.empty()) {
        subsets.push_back(collection_.sets[s].values());
      } else {
        subsets = collection_.hashed[s];
      }
      for (auto& subset : subsets) {
        std::sort(subset.begin(), subset.end());
        subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
        if (subset.empty()) raise(ErrorCode::EmptySet, "server subset is empty");
        std::vector<Scalar> roots;
        roots.reserve(subset.size());
        for (uint64_t v : subset) roots.emplace_back(v, m);
        CoeffPoly poly = to_coeffs(roots);
        std::vector<uint64_t> coeffs;
        coeffs.reserve(poly.coefficients.size());
        for (const Scalar& c : poly.coefficients) coeffs.push_back(c.value());
        polys_[s].push_back(std::move(coeffs));
      }
    }
  }
}

Query ServerEngine::decode_query(const wire::QueryBody& body) const {
  Query query;
  query.variant = static_cast<QueryVariant>(body.variant);
  if (query.variant != cfg_.psi_variant) {
    raise(ErrorCode::ProtocolFailure, "query variant does not match session config");
  }
  query.declared_size = body.declared_size;
  query.replication = ReplicationMeta{body.powers, body.duplicates};
  query.ciphertexts.reserve(body.ciphertexts.size());
  for (const auto& blob : body.ciphertexts) {
    query.ciphertexts.push_back(unpack_ct(blob, Freshness::Fresh));
  }
  if (cfg_.batched) {
    if (query.ciphertexts.size() != 1) {
      raise(ErrorCode::ProtocolFailure, "batched sessions expect one packed ciphertext");
    }
  } else if (query.variant == QueryVariant::SmallDomain) {
    if (query.ciphertexts.size() != cfg_.domain_width) {
      raise(ErrorCode::LengthMismatch, "small-domain query length != |D|");
    }
  } else if (query.ciphertexts.size() != query.declared_size) {
    raise(ErrorCode::LengthMismatch, "query carries a wrong element count");
  }
  return query;
}

std::vector<uint8_t> ServerEngine::pack_ct(const Ciphertext& ct) const {
  return serialize_ciphertext(ct, params_);
}

Ciphertext ServerEngine::unpack_ct(const std::vector<uint8_t>& blob, Freshness freshness) const {
  return deserialize_ciphertext(blob, params_, client_pk_.token, freshness);
}

MatchingStatus ServerEngine::scalar_status_for(const Query& query, size_t set_index,
                                               SeededRng& rng) const {
  HeBackend& be = *backend_;
  const ServerSet& y = collection_.sets[set_index];
  const int id = static_cast<int>(set_index);

  if (cfg_.match == MatchKind::F) {
    if (cfg_.psi_variant == QueryVariant::SmallInput) {
      std::vector<InclusionResult> statuses;
      if (!collection_.hashed.empty()) {
        // Labeled evaluation: scalar i is tested against the subset for its
        // hash label.
        const auto& subsets = collection_.hashed[set_index];
        statuses.reserve(query.ciphertexts.size());
        for (size_t i = 0; i < query.ciphertexts.size(); ++i) {
          const auto& subset = subsets[i % subsets.size()];
          statuses.push_back(is_in_set(be, client_pk_, query.ciphertexts[i], subset, rng));
        }
      } else {
        statuses = psi_process(be, client_pk_, query, y, rng);
      }
      return f_match(be, client_pk_, statuses, id);
    }
    auto statuses = psi_sd_process(be, client_pk_, query, y, *collection_.domain);
    return f_match_sd(be, client_pk_, query, statuses, id, rng);
  }

  Ciphertext ca = cfg_.psi_variant == QueryVariant::SmallInput
                      ? epsica_process(be, client_pk_, query, y, rng)
                      : epsica_sd_process(be, client_pk_, query, y, *collection_.domain);

  if (cfg_.match == MatchKind::Th) {
    uint64_t t_max = std::min<uint64_t>(query.declared_size, y.elements.size());
    return th_match(be, client_pk_, ca, cfg_.th_min, t_max, id, rng);
  }

  TverskyParams tv = tversky_param_process(cfg_.tv_alpha, cfg_.tv_beta, cfg_.tv_t);
  if (cfg_.psi_variant == QueryVariant::SmallInput) {
    return tv_match(be, client_pk_, ca, query.declared_size, y.elements.size(), tv, id, rng);
  }
  Ciphertext size_x = be.encrypt(client_pk_, {});
  for (const Ciphertext& z : query.ciphertexts) size_x = be.add(size_x, z);
  return tv_match(be, client_pk_, ca, size_x, query.declared_size, y.elements.size(), tv, id,
                  rng);
}

std::vector<MatchingStatus> ServerEngine::scalar_statuses(const Query& query,
                                                          SeededRng& rng) const {
  std::vector<MatchingStatus> statuses(collection_.sets.size());
  parallel_for(collection_.sets.size(), cfg_.threads, [&](size_t k) {
    SeededRng set_rng = rng.fork(k);
    statuses[k] = scalar_status_for(query, k, set_rng);
  });
  return statuses;
}

wire::ResponseBody ServerEngine::scalar_pipeline(const Query& query, SeededRng& rng) const {
  HeBackend& be = *backend_;
  std::vector<MatchingStatus> statuses = scalar_statuses(query, rng);
  SeededRng agg_rng = rng.fork(kAggLabel);

  AggregateResponse agg;
  switch (cfg_.agg) {
    case AggSelect::Na:
      agg = na_agg(statuses);
      break;
    case AggSelect::X:
      agg = x_agg(be, client_pk_, statuses, cfg_.chunk_level, agg_rng);
      break;
    case AggSelect::Ca:
      agg = ca_agg(be, client_pk_, statuses, cfg_.ca_mode, agg_rng);
      break;
    case AggSelect::Ret: {
      AssociatedData data(collection_.associated, cfg_.ret_kappa);
      agg = ret_agg(be, client_pk_, statuses, data, agg_rng);
      break;
    }
  }

  wire::ResponseBody body;
  body.agg_kind = static_cast<uint8_t>(agg.kind);
  body.layout = static_cast<uint8_t>(ResponseLayout::ScalarSlot0);
  body.chunk_width = agg.chunk_width;
  body.set_count = agg.set_count;
  body.lane_stride = 0;
  body.repetitions = 1;
  for (const Ciphertext& ct : agg.ciphertexts) body.ciphertexts.push_back(pack_ct(ct));
  return body;
}

void ServerEngine::apply_additive_randomizer(wire::ResponseBody& resp, const Query& query,
                                             SeededRng& rng) const {
  HeBackend& be = *backend_;
  std::vector<Ciphertext> randomizers;

  if (cfg_.mal_check == MalCheckMode::Additive) {
    Ciphertext r;
    if (cfg_.psi_variant == QueryVariant::SmallInput) {
      r = mal_check(be, client_pk_, query, rng);
    } else if (!cfg_.batched) {
      r = sd_mal_check(be, client_pk_, query, rng);
    } else {
      // Packed form of SD-mal-check: z*(z-1) slot-wise under independent
      // masks, folded into slot 0.
      const Ciphertext& qct = query.ciphertexts.front();
      const uint64_t q = params_.q();
      Ciphertext u = be.mul(qct, be.sub_scalar(qct, 1));
      std::vector<uint64_t> mask(params_.slot_count, 0);
      size_t used = static_cast<size_t>(plan_.lanes_per_group) * plan_.lane_width;
      for (size_t s = 0; s < used; ++s) mask[s] = 1 + rng.uniform_below(q - 1);
      Ciphertext masked = be.mul_plain(u, mask);
      Ciphertext folded = be.slot_reduce(masked, ReduceOp::Sum, params_.slot_count, client_pk_);
      std::vector<uint64_t> keep(params_.slot_count, 0);
      keep[0] = 1;
      r = be.mul_plain(folded, keep);
    }
    randomizers.push_back(std::move(r));
  }
  if (cfg_.replication_check) {
    randomizers.push_back(replication_check(be, client_pk_, query, rng));
  }
  if (randomizers.empty()) return;

  Ciphertext base = randomizers.front();
  for (size_t i = 1; i < randomizers.size(); ++i) base = be.add(base, randomizers[i]);

  const auto layout = static_cast<ResponseLayout>(resp.layout);
  std::vector<int64_t> bases;  // slot offsets carrying revealed values
  switch (layout) {
    case ResponseLayout::ScalarSlot0:
      bases.push_back(0);
      break;
    case ResponseLayout::LanePerSet: {
      uint32_t lanes = params_.slot_count / resp.lane_stride;
      for (uint32_t l = 0; l < lanes; ++l) bases.push_back(static_cast<int64_t>(l) * resp.lane_stride);
      break;
    }
    case ResponseLayout::CopyPerRepetition:
      for (uint32_t c = 0; c < resp.repetitions; ++c) {
        bases.push_back(static_cast<int64_t>(c) * resp.lane_stride);
      }
      break;
  }

  const uint64_t q = params_.q();
  for (auto& blob : resp.ciphertexts) {
    Ciphertext ct = unpack_ct(blob, Freshness::Evaluated);
    for (int64_t b : bases) {
      Ciphertext masked = be.mul_scalar(base, 1 + rng.uniform_below(q - 1));
      ct = backend_->add(ct, b == 0 ? masked : be.rotate(masked, -b, client_pk_));
    }
    blob = pack_ct(ct);
  }
}

EngineResult ServerEngine::evaluate(const wire::QueryBody& query_body) {
  auto start = std::chrono::steady_clock::now();
  CostSnapshot before = backend_->cost_snapshot();

  Query query = decode_query(query_body);
  SeededRng query_rng = session_rng_.fork(query_counter_++);

  wire::ResponseBody body;
  if (!cfg_.batched) {
    body = scalar_pipeline(query, query_rng);
  } else if (cfg_.psi_variant == QueryVariant::SmallDomain) {
    body = batched_sd_pipeline(query, query_rng);
  } else {
    body = batched_si_pipeline(query, query_rng);
  }

  SeededRng mal_rng = query_rng.fork(kMalLabel);
  if (cfg_.mal_check == MalCheckMode::Multiplicative) {
    for (auto& blob : body.ciphertexts) {
      Ciphertext ct = unpack_ct(blob, Freshness::Evaluated);
      blob = pack_ct(mal_check_multiplicative(*backend_, client_pk_, query, ct));
    }
  } else {
    apply_additive_randomizer(body, query, mal_rng);
  }

  EngineResult result;
  result.response = std::move(body);
  result.cost = backend_->cost_snapshot() - before;
  result.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                             start)
                       .count();
  return result;
}

Ciphertext ServerEngine::lane_membership(const Ciphertext& ct,
                                         const std::vector<std::vector<uint64_t>>& lane_sets,
                                         SeededRng& rng) const {
  HeBackend& be = *backend_;
  const uint64_t q = params_.q();
  const uint32_t lw = plan_.lane_width;
  size_t max_n = 0;
  for (const auto& s : lane_sets) max_n = std::max(max_n, s.size());
  if (max_n == 0) {
    // Every lane has an empty range (statically false): constant non-match.
    return be.encrypt(client_pk_, random_vector(rng, params_.slot_count, q, true));
  }

  // Per-lane sets can differ in size; factors beyond a lane's set are pinned
  // to the neutral value 1 so the product stays meaningful lane-wise.
  std::vector<Ciphertext> factors;
  factors.reserve(max_n);
  for (size_t t = 0; t < max_n; ++t) {
    std::vector<uint64_t> m(params_.slot_count, 0);
    std::vector<uint64_t> o(params_.slot_count, q - 1);
    for (size_t l = 0; l < lane_sets.size(); ++l) {
      if (t < lane_sets[l].size()) {
        m[l * lw] = 1;
        o[l * lw] = lane_sets[l][t];
      }
    }
    factors.push_back(be.sub_plain(be.mul_plain(ct, m), o));
  }
  Ciphertext prod = balanced_product(be, factors);
  return be.mul_plain(prod, random_vector(rng, params_.slot_count, q, true));
}

wire::ResponseBody ServerEngine::batched_sd_pipeline(const Query& query, SeededRng& rng) const {
  HeBackend& be = *backend_;
  const uint64_t q = params_.q();
  const uint32_t lw = plan_.lane_width;
  const uint32_t lanes = plan_.lanes_per_group;
  const uint32_t width = cfg_.domain_width;
  const size_t n_sets = collection_.sets.size();
  const Ciphertext& qct = query.ciphertexts.front();

  if (query.replication.duplicates < lanes) {
    raise(ErrorCode::ProtocolFailure, "query must replicate the indicator across all lanes");
  }

  const bool shuffled = cfg_.agg == AggSelect::Ca && cfg_.ca_mode == CaMode::Shuffle;
  std::vector<size_t> order(n_sets);
  for (size_t i = 0; i < n_sets; ++i) order[i] = i;
  if (shuffled) {
    SeededRng shuffle_rng = rng.fork(kShuffleLabel);
    for (size_t i = n_sets; i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.uniform_below(i)]);
    }
  }

  TverskyParams tv;
  if (cfg_.match == MatchKind::Tv) {
    tv = tversky_param_process(cfg_.tv_alpha, cfg_.tv_beta, cfg_.tv_t);
  }
  std::optional<Ciphertext> size_x;
  if (cfg_.match == MatchKind::Tv) {
    size_x = be.slot_reduce(qct, ReduceOp::Sum, lw, client_pk_);
  }

  SeededRng batch_rng = rng.fork(kBatchLabel);
  const size_t n_groups = plan_.groups.size();
  std::vector<Ciphertext> gammas(n_groups);

  parallel_for(n_groups, cfg_.threads, [&](size_t g) {
    SeededRng group_rng = batch_rng.fork(g);
    const size_t base = g * lanes;
    const size_t count = std::min<size_t>(lanes, n_sets - base);

    std::vector<uint64_t> pack(params_.slot_count, 0);
    for (size_t l = 0; l < count; ++l) {
      const auto& bits = bitmaps_[order[base + l]];
      for (uint32_t d = 0; d < width; ++d) pack[l * lw + d] = bits[d];
    }
    Ciphertext s_vec = be.mul_plain(qct, pack);

    Ciphertext gamma;
    if (cfg_.match == MatchKind::F) {
      Ciphertext missing = be.sub(qct, s_vec);
      Ciphertext masked =
          be.mul_plain(missing, random_vector(group_rng, params_.slot_count, q, true));
      gamma = be.slot_reduce(masked, ReduceOp::Sum, lw, client_pk_);
    } else {
      Ciphertext ca = be.slot_reduce(s_vec, ReduceOp::Sum, lw, client_pk_);
      std::vector<std::vector<uint64_t>> lane_sets(lanes);
      for (size_t l = 0; l < count; ++l) {
        const size_t ns = collection_.sets[order[base + l]].elements.size();
        if (cfg_.match == MatchKind::Th) {
          uint64_t t_max = std::min<uint64_t>(query.declared_size, ns);
          for (uint64_t t = cfg_.th_min; t <= t_max; ++t) lane_sets[l].push_back(t % q);
        } else {
          uint64_t span = (tv.a - tv.b - tv.c) * ns;
          for (uint64_t t = 0; t <= span; ++t) lane_sets[l].push_back(t % q);
        }
      }
      Ciphertext value = ca;
      if (cfg_.match == MatchKind::Tv) {
        for (size_t l = 0; l < count; ++l) {
          const uint64_t ns = collection_.sets[order[base + l]].elements.size();
          if (tv.b * query.declared_size + tv.c * ns + (tv.a - tv.b - tv.c) * ns >= q) {
            raise(ErrorCode::InvalidParams, "plaintext ring too small for an exact similarity test");
          }
        }
        // a*ca - b*|X| - c*|Y_l|, with the per-lane c*|Y_l| as plaintext.
        std::vector<uint64_t> cy(params_.slot_count, 0);
        for (size_t l = 0; l < count; ++l) {
          cy[l * lw] = mul_mod(tv.c % q, collection_.sets[order[base + l]].elements.size() % q, q);
        }
        value = be.sub(be.mul_scalar(ca, tv.a % q), be.mul_scalar(*size_x, tv.b % q));
        value = be.sub_plain(value, cy);
      }
      gamma = lane_membership(value, lane_sets, group_rng);
    }

    // Pin unused lanes to a non-zero value and drop junk outside lane bases.
    std::vector<uint64_t> used(params_.slot_count, 0);
    std::vector<uint64_t> fill(params_.slot_count, 0);
    for (size_t l = 0; l < lanes; ++l) {
      if (l < count) {
        used[l * lw] = 1;
      } else {
        fill[l * lw] = 1 + group_rng.uniform_below(q - 1);
      }
    }
    gammas[g] = be.add_plain(be.mul_plain(gamma, used), fill);
  });

  wire::ResponseBody body;
  body.set_count = n_sets;
  body.repetitions = 1;
  SeededRng agg_rng = rng.fork(kAggLabel);

  switch (cfg_.agg) {
    case AggSelect::Na:
    case AggSelect::Ca: {
      if (cfg_.agg == AggSelect::Ca && cfg_.ca_mode == CaMode::IsZero) {
        Ciphertext total;
        for (size_t g = 0; g < n_groups; ++g) {
          Ciphertext z = is_zero(be, client_pk_, gammas[g]);
          std::vector<uint64_t> used(params_.slot_count, 0);
          size_t count = std::min<size_t>(lanes, n_sets - g * lanes);
          for (size_t l = 0; l < count; ++l) used[l * lw] = 1;
          Ciphertext masked = be.mul_plain(z, used);
          Ciphertext folded = be.slot_reduce(masked, ReduceOp::Sum, params_.slot_count, client_pk_);
          total = g == 0 ? folded : be.add(total, folded);
        }
        body.agg_kind = static_cast<uint8_t>(AggKind::Cardinality);
        body.layout = static_cast<uint8_t>(ResponseLayout::ScalarSlot0);
        body.ciphertexts.push_back(pack_ct(total));
        break;
      }
      body.agg_kind = static_cast<uint8_t>(cfg_.agg == AggSelect::Na
                                               ? AggKind::Naive
                                               : AggKind::CardinalityShuffled);
      body.layout = static_cast<uint8_t>(ResponseLayout::LanePerSet);
      body.lane_stride = lw;
      for (const Ciphertext& g : gammas) body.ciphertexts.push_back(pack_ct(g));
      break;
    }
    case AggSelect::X: {
      uint32_t chunk_lanes = cfg_.chunk_level ? (uint32_t{1} << *cfg_.chunk_level) : lanes;
      if (chunk_lanes > lanes) {
        raise(ErrorCode::CapacityExceeded, "chunk would span multiple ciphertext groups");
      }
      std::vector<Ciphertext> folded(n_groups);
      for (size_t g = 0; g < n_groups; ++g) {
        Ciphertext acc = gammas[g];
        for (uint32_t step = 1; step < chunk_lanes; step <<= 1) {
          acc = be.mul(acc, be.rotate(acc, static_cast<int64_t>(step) * lw, client_pk_));
        }
        folded[g] = be.mul_plain(acc, random_vector(agg_rng, params_.slot_count, q, true));
      }
      if (cfg_.chunk_level) {
        body.agg_kind = static_cast<uint8_t>(AggKind::ExistentialChunked);
        body.layout = static_cast<uint8_t>(ResponseLayout::LanePerSet);
        body.lane_stride = lw;
        body.chunk_width = chunk_lanes;
        for (const Ciphertext& f : folded) body.ciphertexts.push_back(pack_ct(f));
      } else {
        Ciphertext total = folded.front();
        for (size_t g = 1; g < n_groups; ++g) total = be.mul(total, folded[g]);
        body.agg_kind = static_cast<uint8_t>(AggKind::Existential);
        body.layout = static_cast<uint8_t>(ResponseLayout::ScalarSlot0);
        body.ciphertexts.push_back(pack_ct(total));
      }
      break;
    }
    case AggSelect::Ret: {
      std::vector<MatchingStatus> statuses;
      statuses.reserve(n_sets);
      for (size_t pos = 0; pos < n_sets; ++pos) {
        size_t g = pos / lanes;
        int64_t lane_base = static_cast<int64_t>(pos % lanes) * lw;
        Ciphertext ct = lane_base == 0 ? gammas[g] : be.rotate(gammas[g], lane_base, client_pk_);
        statuses.push_back(MatchingStatus{ct, static_cast<int>(pos)});
      }
      AssociatedData data(collection_.associated, cfg_.ret_kappa);
      AggregateResponse agg = ret_agg(be, client_pk_, statuses, data, agg_rng);
      body.agg_kind = static_cast<uint8_t>(AggKind::Retrieval);
      body.layout = static_cast<uint8_t>(ResponseLayout::ScalarSlot0);
      body.ciphertexts.push_back(pack_ct(agg.ciphertexts.front()));
      break;
    }
  }
  return body;
}

wire::ResponseBody ServerEngine::batched_si_pipeline(const Query& query, SeededRng& rng) const {
  HeBackend& be = *backend_;
  const uint64_t q = params_.q();
  const Ciphertext& qct = query.ciphertexts.front();
  const uint32_t p = query.replication.powers;
  const uint32_t dup = query.replication.duplicates;
  const size_t n_sets = collection_.sets.size();
  ReplicatedLayout layout = ReplicatedLayout::for_small_input(
      static_cast<uint32_t>(query.declared_size), p, dup, params_.slot_count);

  size_t max_deg = 0;
  for (const auto& per_set : polys_) {
    for (const auto& coeffs : per_set) max_deg = std::max(max_deg, coeffs.size() - 1);
  }
  if (max_deg > 2ull * p) {
    raise(ErrorCode::InsufficientPowers,
          "supplied powers cover polynomial degrees up to 2p = " + std::to_string(2 * p));
  }
  const bool use_high = max_deg > p;

  Ciphertext high_powers;
  if (use_high) {
    // Pair every power slot with the block's top power x^p: one ct-ct
    // multiplication per query puts x^(j+p) alongside x^j.
    std::vector<uint64_t> top_mask(params_.slot_count, 0);
    for (uint32_t c = 0; c < dup; ++c) {
      for (uint32_t i = 0; i < layout.element_count; ++i) top_mask[layout.slot(c, i, p - 1)] = 1;
    }
    Ciphertext top = be.mul_plain(qct, top_mask);
    Ciphertext spread = top;
    for (uint32_t d = 1; d < p; ++d) {
      spread = be.add(spread, be.rotate(top, static_cast<int64_t>(d), client_pk_));
    }
    high_powers = be.mul(qct, spread);
  }

  SeededRng batch_rng = rng.fork(kBatchLabel);
  std::vector<Ciphertext> gammas(n_sets);

  parallel_for(n_sets, cfg_.threads, [&](size_t k) {
    SeededRng doc_rng = batch_rng.fork(k);
    const auto& per_set = polys_[k];

    std::vector<uint64_t> low(params_.slot_count, 0);
    std::vector<uint64_t> high(params_.slot_count, 0);
    std::vector<uint64_t> constant(params_.slot_count, 0);
    for (uint32_t c = 0; c < dup; ++c) {
      for (uint32_t i = 0; i < layout.element_count; ++i) {
        const auto& coeffs = per_set[i % per_set.size()];
        const size_t degree = coeffs.size() - 1;
        const uint64_t rho = 1 + doc_rng.uniform_below(q - 1);
        for (size_t j = 1; j <= degree && j <= p; ++j) {
          low[layout.slot(c, i, static_cast<uint32_t>(j - 1))] = mul_mod(rho, coeffs[j], q);
        }
        for (size_t j = p + 1; j <= degree; ++j) {
          high[layout.slot(c, i, static_cast<uint32_t>(j - p - 1))] = mul_mod(rho, coeffs[j], q);
        }
        constant[layout.slot(c, i, 0)] = mul_mod(rho, coeffs[0], q);
      }
    }

    Ciphertext terms = be.mul_plain(qct, low);
    if (use_high) terms = be.add(terms, be.mul_plain(high_powers, high));
    Ciphertext statuses = be.slot_reduce(terms, ReduceOp::Sum, p, client_pk_);
    statuses = be.add_plain(statuses, constant);

    // Containment: fold the per-element statuses of each copy into the copy
    // base slot.
    std::vector<uint64_t> base_mask(params_.slot_count, 0);
    for (uint32_t c = 0; c < dup; ++c) {
      for (uint32_t i = 0; i < layout.element_count; ++i) base_mask[layout.slot(c, i, 0)] = 1;
    }
    Ciphertext gamma = be.mul_plain(statuses, base_mask);
    for (uint32_t step = p; step < layout.copy_width; step <<= 1) {
      gamma = be.add(gamma, be.rotate(gamma, static_cast<int64_t>(step), client_pk_));
    }
    gammas[k] = gamma;
  });

  wire::ResponseBody body;
  body.set_count = n_sets;
  body.layout = static_cast<uint8_t>(ResponseLayout::CopyPerRepetition);
  body.lane_stride = layout.copy_width;
  body.repetitions = static_cast<uint16_t>(dup);
  SeededRng agg_rng = rng.fork(kAggLabel);

  auto masked_tree = [&](std::span<const Ciphertext> cts) {
    Ciphertext prod = balanced_product(be, cts);
    return be.mul_plain(prod, random_vector(agg_rng, params_.slot_count, q, true));
  };

  switch (cfg_.agg) {
    case AggSelect::X: {
      if (cfg_.chunk_level) {
        const size_t width = size_t{1} << *cfg_.chunk_level;
        body.agg_kind = static_cast<uint8_t>(AggKind::ExistentialChunked);
        body.chunk_width = static_cast<uint32_t>(width);
        for (size_t start = 0; start < n_sets; start += width) {
          size_t len = std::min(width, n_sets - start);
          body.ciphertexts.push_back(
              pack_ct(masked_tree(std::span<const Ciphertext>(gammas).subspan(start, len))));
        }
      } else {
        body.agg_kind = static_cast<uint8_t>(AggKind::Existential);
        body.ciphertexts.push_back(pack_ct(masked_tree(gammas)));
      }
      break;
    }
    case AggSelect::Ca: {
      body.agg_kind = static_cast<uint8_t>(AggKind::CardinalityShuffled);
      SeededRng shuffle_rng = rng.fork(kShuffleLabel);
      std::vector<Ciphertext> shuffled = shuffle_statuses(std::move(gammas), shuffle_rng);
      for (const Ciphertext& g : shuffled) body.ciphertexts.push_back(pack_ct(g));
      break;
    }
    case AggSelect::Na: {
      body.agg_kind = static_cast<uint8_t>(AggKind::Naive);
      for (const Ciphertext& g : gammas) body.ciphertexts.push_back(pack_ct(g));
      break;
    }
    default:
      raise(ErrorCode::ConfigError, "batched small-input sessions support x/ca/na aggregation");
  }
  return body;
}

void AuditLog::append(const std::string& session_id, const SessionConfig& cfg,
                      const EngineResult& result, size_t query_bytes, size_t response_bytes) {
  nlohmann::json record{
      {"session", session_id},
      {"config_digest", hex(cfg.digest())},
      {"counters",
       {{"ct_add", result.cost.ct_add},
        {"ct_mul", result.cost.ct_mul},
        {"pt_mul", result.cost.pt_mul},
        {"rotations", result.cost.rotations},
        {"exponentiations", result.cost.exponentiations}}},
      {"wall_ms", result.wall_ms},
      {"query_bytes", query_bytes},
      {"response_bytes", response_bytes},
  };
  std::ofstream out(path_, std::ios::app);
  if (!out) raise(ErrorCode::IoError, "cannot open audit log: " + path_);
  out << record.dump() << "\n";
}

namespace {

uint16_t error_wire_code(ErrorCode code) { return static_cast<uint16_t>(code); }

void send_error(TcpStream& stream, ErrorCode code, const std::string& text) {
  wire::ErrorBody body{error_wire_code(code), text};
  try {
    stream.send_message({wire::MsgType::Error, body.encode()});
  } catch (const Error&) {
    // Peer already gone; nothing else to do.
  }
}

void handle_session(TcpStream& stream, ServerEngine& engine, const SessionConfig& cfg,
                    AuditLog* audit, uint64_t session_no) {
  bool have_hello = false;
  bool have_setup = false;
  size_t query_bytes = 0;
  try {
    while (true) {
      wire::WireMessage msg = stream.recv_message();
      switch (msg.type) {
        case wire::MsgType::Hello:
          if (have_hello) {
            send_error(stream, ErrorCode::ProtocolFailure, "unexpected-hello");
            return;
          }
          have_hello = true;
          break;
        case wire::MsgType::Setup: {
          if (!have_hello || have_setup) {
            send_error(stream, ErrorCode::ProtocolFailure, "hello-required");
            return;
          }
          wire::SetupBody setup = wire::SetupBody::decode(msg.body);
          const HEParams& params = engine.params();
          if (setup.profile_id != params.profile_id() ||
              setup.slot_count != params.slot_count ||
              setup.plaintext_modulus != params.q() ||
              setup.backend_kind != static_cast<uint8_t>(engine.config().backend)) {
            send_error(stream, ErrorCode::InvalidParams, "params-mismatch");
            return;
          }
          if (setup.config_digest != cfg.digest()) {
            send_error(stream, ErrorCode::ConfigError, "config-mismatch");
            return;
          }
          PublicKey pk;
          pk.token = setup.public_token;
          pk.relinearization_keys = setup.relin_keys != 0;
          pk.rotation_keys = setup.rotation_keys != 0;
          engine.set_client_key(pk);
          have_setup = true;
          break;
        }
        case wire::MsgType::Query: {
          if (!have_setup) {
            send_error(stream, ErrorCode::ProtocolFailure, "setup-required");
            return;
          }
          query_bytes = msg.body.size() + 9;
          wire::QueryBody body = wire::QueryBody::decode(msg.body);
          EngineResult result = engine.evaluate(body);
          wire::WireMessage reply{wire::MsgType::Response, result.response.encode()};
          stream.send_message(reply);
          if (audit) {
            audit->append("s" + std::to_string(session_no), cfg, result, query_bytes,
                          reply.body.size() + 9);
          }
          return;  // one query per session
        }
        default:
          send_error(stream, ErrorCode::ProtocolFailure, "unexpected-message");
          return;
      }
    }
  } catch (const Error& e) {
    send_error(stream, e.code(), e.what());
  }
}

}  // namespace

void serve(TcpListener& listener, const SessionConfig& cfg, const Collection& collection,
           AuditLog* audit, size_t max_sessions) {
  ServerEngine engine(cfg, collection);
  uint64_t session_no = 0;
  while (max_sessions == 0 || session_no < max_sessions) {
    TcpStream stream = listener.accept();
    handle_session(stream, engine, cfg, audit, session_no);
    ++session_no;
  }
}

ClientSession make_client_session(const SessionConfig& cfg, uint64_t key_seed) {
  cfg.validate();
  ClientSession session{cfg, cfg.he_params(), nullptr, KeyPair{}};
  session.backend = make_backend(cfg.backend, session.params);
  SeededRng rng(key_seed);
  session.keys = session.backend->keygen(rng);
  return session;
}

wire::QueryBody build_query(ClientSession& session, std::span<const uint64_t> values) {
  const SessionConfig& cfg = session.cfg;
  HeBackend& be = *session.backend;
  wire::QueryBody body;
  body.powers = cfg.batched ? static_cast<uint16_t>(cfg.powers) : 1;
  body.duplicates = cfg.batched ? static_cast<uint16_t>(cfg.duplicates) : 1;

  if (cfg.psi_variant == QueryVariant::SmallInput) {
    body.variant = static_cast<uint8_t>(QueryVariant::SmallInput);
    body.declared_size = static_cast<uint32_t>(values.size());
    const uint64_t q = session.params.q();
    uint64_t t = 1;
    for (size_t i = 0; i < values.size(); ++i) {
      for (size_t j = i + 1; j < values.size(); ++j) {
        t = mul_mod(t, sub_mod(values[i] % q, values[j] % q, q), q);
      }
    }
    session.last_pairwise_product = t;
    if (cfg.batched) {
      Query query = encode_replicated_query(be, session.keys.pk, values, cfg.powers,
                                            cfg.duplicates);
      body.ciphertexts.push_back(serialize_ciphertext(query.ciphertexts.front(), session.params));
    } else {
      for (uint64_t v : values) {
        body.ciphertexts.push_back(
            serialize_ciphertext(be.encrypt_scalar(session.keys.pk, v), session.params));
      }
    }
    return body;
  }

  body.variant = static_cast<uint8_t>(QueryVariant::SmallDomain);
  body.declared_size = cfg.domain_width;
  const PrimeModulus& m = session.params.plaintext_modulus;
  if (cfg.batched) {
    std::vector<Scalar> domain_elems;
    domain_elems.reserve(cfg.domain_width);
    for (uint32_t d = 0; d < cfg.domain_width; ++d) domain_elems.emplace_back(d, m);
    Domain domain(std::move(domain_elems));
    std::vector<Scalar> x;
    for (uint64_t v : values) x.emplace_back(v, m);
    Query query = encode_replicated_sd_query(be, session.keys.pk, ClientSet(x, cfg.domain_width),
                                             domain, cfg.duplicates);
    body.ciphertexts.push_back(serialize_ciphertext(query.ciphertexts.front(), session.params));
    return body;
  }
  std::vector<uint8_t> indicator(cfg.domain_width, 0);
  for (uint64_t v : values) {
    if (v >= cfg.domain_width) raise(ErrorCode::OutOfDomain, "value outside the shared domain");
    indicator[v] = 1;
  }
  for (uint32_t d = 0; d < cfg.domain_width; ++d) {
    body.ciphertexts.push_back(
        serialize_ciphertext(be.encrypt_scalar(session.keys.pk, indicator[d]), session.params));
  }
  return body;
}

RevealedAggregate reveal_response(ClientSession& session, const wire::ResponseBody& resp) {
  HeBackend& be = *session.backend;
  const HEParams& params = session.params;
  auto decrypt = [&](const std::vector<uint8_t>& blob) {
    Ciphertext ct = deserialize_ciphertext(blob, params, session.keys.pk.token,
                                           Freshness::Evaluated);
    auto slots = be.decrypt(session.keys.sk, ct);
    if (!slots) raise(ErrorCode::ProtocolFailure, "response decryption failed");
    return *slots;
  };

  // T scales every response slot under the multiplicative check. Zero
  // patterns are unaffected; numeric reveals divide it back out.
  auto undo_mult = [&](uint64_t v) {
    if (session.cfg.mal_check != MalCheckMode::Multiplicative) return v;
    return mul_mod(v, inv_mod(session.last_pairwise_product, params.q()), params.q());
  };

  RevealedAggregate out;
  out.kind = static_cast<AggKind>(resp.agg_kind);
  const auto layout = static_cast<ResponseLayout>(resp.layout);

  auto all_copies_zero = [&](const std::vector<uint64_t>& slots) {
    for (uint16_t c = 0; c < resp.repetitions; ++c) {
      if (slots[static_cast<size_t>(c) * resp.lane_stride] != 0) return false;
    }
    return true;
  };

  switch (layout) {
    case ResponseLayout::ScalarSlot0:
      switch (out.kind) {
        case AggKind::Naive:
          for (const auto& blob : resp.ciphertexts) out.bits.push_back(decrypt(blob)[0] == 0);
          break;
        case AggKind::Existential:
          out.bit = decrypt(resp.ciphertexts.front())[0] == 0;
          break;
        case AggKind::ExistentialChunked:
          for (const auto& blob : resp.ciphertexts) {
            bool chunk = decrypt(blob)[0] == 0;
            out.chunk_bits.push_back(chunk);
            out.bit = out.bit || chunk;
          }
          break;
        case AggKind::Cardinality:
          out.count = undo_mult(decrypt(resp.ciphertexts.front())[0]);
          break;
        case AggKind::CardinalityShuffled:
          for (const auto& blob : resp.ciphertexts) out.count += decrypt(blob)[0] == 0 ? 1 : 0;
          break;
        case AggKind::Retrieval:
          out.value = undo_mult(decrypt(resp.ciphertexts.front())[0]);
          break;
      }
      break;

    case ResponseLayout::LanePerSet: {
      const uint32_t lanes = params.slot_count / resp.lane_stride;
      if (out.kind == AggKind::ExistentialChunked) {
        uint64_t remaining = resp.set_count;
        for (const auto& blob : resp.ciphertexts) {
          std::vector<uint64_t> slots = decrypt(blob);
          uint64_t in_group = std::min<uint64_t>(remaining, lanes);
          for (uint64_t chunk_base = 0; chunk_base < in_group; chunk_base += resp.chunk_width) {
            bool chunk = slots[chunk_base * resp.lane_stride] == 0;
            out.chunk_bits.push_back(chunk);
            out.bit = out.bit || chunk;
          }
          remaining -= in_group;
        }
        break;
      }
      uint64_t position = 0;
      for (const auto& blob : resp.ciphertexts) {
        std::vector<uint64_t> slots = decrypt(blob);
        for (uint32_t l = 0; l < lanes && position < resp.set_count; ++l, ++position) {
          bool match = slots[static_cast<size_t>(l) * resp.lane_stride] == 0;
          if (out.kind == AggKind::Naive) out.bits.push_back(match);
          if (out.kind == AggKind::CardinalityShuffled && match) ++out.count;
        }
      }
      break;
    }

    case ResponseLayout::CopyPerRepetition:
      switch (out.kind) {
        case AggKind::Existential:
          out.bit = all_copies_zero(decrypt(resp.ciphertexts.front()));
          break;
        case AggKind::ExistentialChunked:
          for (const auto& blob : resp.ciphertexts) {
            bool chunk = all_copies_zero(decrypt(blob));
            out.chunk_bits.push_back(chunk);
            out.bit = out.bit || chunk;
          }
          break;
        case AggKind::CardinalityShuffled:
          for (const auto& blob : resp.ciphertexts) {
            if (all_copies_zero(decrypt(blob))) ++out.count;
          }
          break;
        case AggKind::Naive:
          for (const auto& blob : resp.ciphertexts) {
            out.bits.push_back(all_copies_zero(decrypt(blob)));
          }
          break;
        default:
          raise(ErrorCode::ProtocolFailure, "unexpected layout for aggregate kind");
      }
      break;
  }
  return out;
}

QueryOutcome run_client_query(const std::string& host, uint16_t port, ClientSession& session,
                              std::span<const uint64_t> values) {
  TcpStream stream = TcpStream::connect(host, port);
  QueryOutcome outcome;

  auto send = [&](wire::MsgType type, std::vector<uint8_t> body) {
    stream.send_message({type, std::move(body)});
    outcome.sent.push_back(type);
  };

  send(wire::MsgType::Hello, {});

  wire::SetupBody setup;
  setup.profile_id = session.params.profile_id();
  setup.slot_count = session.params.slot_count;
  setup.plaintext_modulus = session.params.q();
  setup.depth_budget = session.params.depth_budget;
  setup.batching = session.params.batching ? 1 : 0;
  setup.backend_kind = static_cast<uint8_t>(session.cfg.backend);
  setup.public_token = session.keys.pk.token;
  setup.relin_keys = session.keys.pk.relinearization_keys ? 1 : 0;
  setup.rotation_keys = session.keys.pk.rotation_keys ? 1 : 0;
  setup.config_digest = session.cfg.digest();
  send(wire::MsgType::Setup, setup.encode());

  wire::QueryBody query = build_query(session, values);
  std::vector<uint8_t> query_body = query.encode();
  outcome.query_bytes = query_body.size() + 9;
  send(wire::MsgType::Query, std::move(query_body));

  wire::WireMessage reply = stream.recv_message();
  outcome.received.push_back(reply.type);
  if (reply.type == wire::MsgType::Error) {
    wire::ErrorBody err = wire::ErrorBody::decode(reply.body);
    raise(ErrorCode::ProtocolFailure, "server error: " + err.text);
  }
  if (reply.type != wire::MsgType::Response) {
    raise(ErrorCode::ProtocolFailure, "unexpected reply type");
  }
  outcome.response_bytes = reply.body.size() + 9;
  outcome.result = reveal_response(session, wire::ResponseBody::decode(reply.body));
  return outcome;
}

}  // namespace pcm
