#include "pcm/agg.hpp"

namespace pcm {

namespace {

uint32_t tracked_budget(const HeBackend& backend) {
  return backend.kind() == BackendKind::ClearRing ? kUnboundedDepth
                                                  : backend.params().depth_budget;
}

uint32_t max_depth(std::span<const MatchingStatus> statuses) {
  uint32_t d = 0;
  for (const auto& s : statuses) d = std::max(d, s.ct.depth_used);
  return d;
}

/// Balanced product over [first, last) re-randomized with a fresh plaintext
/// mask, so a width-w chunk costs exactly w multiplications and
/// ceil(log2 w) depth.
Ciphertext chunk_product(HeBackend& backend, std::span<const MatchingStatus> statuses,
                         SeededRng& rng) {
  std::vector<Ciphertext> cts;
  cts.reserve(statuses.size());
  for (const auto& s : statuses) cts.push_back(s.ct);
  Ciphertext prod = balanced_product(backend, cts);
  const uint64_t q = backend.params().q();
  return backend.mul_scalar(prod, 1 + rng.uniform_below(q - 1));
}

}  // namespace

const char* to_string(AggKind kind) {
  switch (kind) {
    case AggKind::Naive: return "na";
    case AggKind::Existential: return "x";
    case AggKind::ExistentialChunked: return "x_chunked";
    case AggKind::Cardinality: return "ca";
    case AggKind::CardinalityShuffled: return "ca_shuffled";
    case AggKind::Retrieval: return "ret";
  }
  return "unknown";
}

AssociatedData::AssociatedData(std::vector<Scalar> vals, uint64_t k)
    : values(std::move(vals)), kappa(k) {
  if (values.empty()) raise(ErrorCode::InvalidParams, "associated data is empty");
  if (kappa < 1 || kappa > values.size()) {
    raise(ErrorCode::InvalidParams, "kappa out of range [1, N]");
  }
  for (const Scalar& v : values) {
    if (v.is_zero()) raise(ErrorCode::InvalidParams, "associated data must be non-zero");
  }
}

AggregateResponse na_agg(std::span<const MatchingStatus> statuses) {
  if (statuses.empty()) raise(ErrorCode::EmptySet, "no statuses to aggregate");
  AggregateResponse resp;
  resp.kind = AggKind::Naive;
  resp.set_count = statuses.size();
  for (const auto& s : statuses) resp.ciphertexts.push_back(s.ct);
  return resp;
}

AggregateResponse x_agg(HeBackend& backend, const PublicKey& pk,
                        std::span<const MatchingStatus> statuses,
                        std::optional<uint32_t> chunk_level, SeededRng& rng) {
  (void)pk;
  if (statuses.empty()) raise(ErrorCode::EmptySet, "no statuses to aggregate");
  const uint32_t budget = tracked_budget(backend);
  const size_t n = statuses.size();

  AggregateResponse resp;
  resp.set_count = n;
  if (!chunk_level) {
    if (budget != kUnboundedDepth && max_depth(statuses) + ceil_log2(n) > budget) {
      raise(ErrorCode::DepthUnavailable, "full existential reduction exceeds depth budget");
    }
    resp.kind = AggKind::Existential;
    resp.ciphertexts.push_back(chunk_product(backend, statuses, rng));
    return resp;
  }

  const uint64_t width = uint64_t{1} << *chunk_level;
  if (budget != kUnboundedDepth &&
      max_depth(statuses) + ceil_log2(std::min<uint64_t>(width, n)) > budget) {
    raise(ErrorCode::DepthUnavailable, "chunked existential reduction exceeds depth budget");
  }
  resp.kind = AggKind::ExistentialChunked;
  resp.chunk_width = static_cast<uint32_t>(width);
  for (size_t start = 0; start < n; start += width) {
    size_t len = std::min<size_t>(width, n - start);
    resp.ciphertexts.push_back(chunk_product(backend, statuses.subspan(start, len), rng));
  }
  return resp;
}

AggregateResponse ca_agg(HeBackend& backend, const PublicKey& pk,
                         std::span<const MatchingStatus> statuses, CaMode mode,
                         SeededRng& rng) {
  if (statuses.empty()) raise(ErrorCode::EmptySet, "no statuses to aggregate");
  AggregateResponse resp;
  resp.set_count = statuses.size();
  if (mode == CaMode::Shuffle) {
    resp.kind = AggKind::CardinalityShuffled;
    std::vector<Ciphertext> cts;
    cts.reserve(statuses.size());
    for (const auto& s : statuses) cts.push_back(s.ct);
    resp.ciphertexts = shuffle_statuses(std::move(cts), rng);
    return resp;
  }
  if (statuses.size() >= backend.params().q()) {
    raise(ErrorCode::InvalidParams, "encrypted match count would wrap the plaintext ring");
  }
  resp.kind = AggKind::Cardinality;
  Ciphertext acc = backend.encrypt(pk, {});
  for (const auto& s : statuses) acc = backend.add(acc, is_zero(backend, pk, s.ct));
  resp.ciphertexts.push_back(acc);
  return resp;
}

AggregateResponse ret_agg(HeBackend& backend, const PublicKey& pk,
                          std::span<const MatchingStatus> statuses,
                          const AssociatedData& data, SeededRng& rng) {
  (void)rng;
  if (statuses.empty()) raise(ErrorCode::EmptySet, "no statuses to aggregate");
  if (data.values.size() != statuses.size()) {
    raise(ErrorCode::LengthMismatch, "one datum per server set required");
  }
  if (statuses.size() >= backend.params().q()) {
    raise(ErrorCode::InvalidParams, "encrypted match counter would wrap the plaintext ring");
  }
  Ciphertext counter = backend.encrypt(pk, {});
  Ciphertext acc = backend.encrypt(pk, {});
  for (size_t j = 0; j < statuses.size(); ++j) {
    Ciphertext hit = is_zero(backend, pk, statuses[j].ct);
    counter = backend.add(counter, hit);
    // hit * counter equals kappa exactly at the kappa'th matching set.
    Ciphertext indexed = backend.mul(counter, hit);
    Ciphertext selector = is_equal_to(backend, pk, indexed, data.kappa);
    acc = backend.add(acc, backend.mul_scalar(selector, data.values[j].value()));
  }
  AggregateResponse resp;
  resp.kind = AggKind::Retrieval;
  resp.set_count = statuses.size();
  resp.ciphertexts.push_back(acc);
  return resp;
}

RevealedAggregate agg_reveal(HeBackend& backend, const SecretKey& sk,
                             const AggregateResponse& resp) {
  auto slot0 = [&](const Ciphertext& ct) -> uint64_t {
    auto slots = backend.decrypt(sk, ct);
    if (!slots) raise(ErrorCode::ProtocolFailure, "decryption failed");
    return (*slots)[0];
  };

  RevealedAggregate out;
  out.kind = resp.kind;
  switch (resp.kind) {
    case AggKind::Naive:
      for (const Ciphertext& ct : resp.ciphertexts) out.bits.push_back(slot0(ct) == 0);
      break;
    case AggKind::Existential:
      out.bit = slot0(resp.ciphertexts.front()) == 0;
      break;
    case AggKind::ExistentialChunked:
      for (const Ciphertext& ct : resp.ciphertexts) {
        bool chunk = slot0(ct) == 0;
        out.chunk_bits.push_back(chunk);
        out.bit = out.bit || chunk;
      }
      break;
    case AggKind::Cardinality:
      out.count = slot0(resp.ciphertexts.front());
      break;
    case AggKind::CardinalityShuffled:
      for (const Ciphertext& ct : resp.ciphertexts) {
        if (slot0(ct) == 0) ++out.count;
      }
      break;
    case AggKind::Retrieval:
      out.value = slot0(resp.ciphertexts.front());
      break;
  }
  return out;
}

}  // namespace pcm
