#include "pcm/psi.hpp"

#include <algorithm>
#include <unordered_set>

namespace pcm {

namespace {

void check_variant(const Query& q, QueryVariant expected) {
  if (q.variant != expected) raise(ErrorCode::InvalidParams, "wrong query variant");
}

Ciphertext encrypted_zero(HeBackend& backend, const PublicKey& pk) {
  return backend.encrypt(pk, {});
}

std::vector<Ciphertext> pairwise_difference_cts(HeBackend& backend, const Query& query) {
  std::vector<Ciphertext> diffs;
  const auto& cts = query.ciphertexts;
  diffs.reserve(cts.size() * (cts.size() - 1) / 2);
  for (size_t i = 0; i < cts.size(); ++i) {
    for (size_t j = i + 1; j < cts.size(); ++j) {
      diffs.push_back(backend.sub(cts[i], cts[j]));
    }
  }
  return diffs;
}

}  // namespace

ClientSet::ClientSet(std::vector<Scalar> elems, size_t max) : elements(std::move(elems)), max_size(max) {
  if (elements.size() > max_size) raise(ErrorCode::Oversize, "client set exceeds declared capacity");
  std::unordered_set<uint64_t> seen;
  for (const Scalar& e : elements) {
    if (!seen.insert(e.value()).second) {
      raise(ErrorCode::InvalidParams, "client set elements must be distinct");
    }
  }
}

std::vector<uint64_t> ClientSet::values() const {
  std::vector<uint64_t> v;
  v.reserve(elements.size());
  for (const Scalar& e : elements) v.push_back(e.value());
  return v;
}

std::vector<uint64_t> ServerSet::values() const {
  std::vector<uint64_t> v;
  v.reserve(elements.size());
  for (const Scalar& e : elements) v.push_back(e.value());
  return v;
}

Domain::Domain(std::vector<Scalar> elems) : elements(std::move(elems)) {
  std::unordered_set<uint64_t> seen;
  for (const Scalar& e : elements) {
    if (!seen.insert(e.value()).second) {
      raise(ErrorCode::InvalidParams, "domain elements must be distinct");
    }
  }
}

std::optional<size_t> Domain::index_of(uint64_t value) const {
  for (size_t i = 0; i < elements.size(); ++i) {
    if (elements[i].value() == value) return i;
  }
  return std::nullopt;
}

Query encode_query(HeBackend& backend, const PublicKey& pk, const ClientSet& x) {
  if (x.elements.size() > x.max_size) raise(ErrorCode::Oversize, "client set too large");
  Query q;
  q.variant = QueryVariant::SmallInput;
  q.declared_size = x.elements.size();
  q.ciphertexts.reserve(x.elements.size());
  for (const Scalar& e : x.elements) q.ciphertexts.push_back(backend.encrypt_scalar(pk, e.value()));
  return q;
}

Query encode_sd_query(HeBackend& backend, const PublicKey& pk, const ClientSet& x,
                      const Domain& domain) {
  for (const Scalar& e : x.elements) {
    if (!domain.index_of(e.value())) raise(ErrorCode::OutOfDomain, "client element outside domain");
  }
  Query q;
  q.variant = QueryVariant::SmallDomain;
  q.declared_size = domain.size();
  q.ciphertexts.reserve(domain.size());
  for (const Scalar& d : domain.elements) {
    bool member = std::any_of(x.elements.begin(), x.elements.end(),
                              [&](const Scalar& e) { return e.value() == d.value(); });
    q.ciphertexts.push_back(backend.encrypt_scalar(pk, member ? 1 : 0));
  }
  return q;
}

std::vector<InclusionResult> psi_process(HeBackend& backend, const PublicKey& pk,
                                         const Query& query, const ServerSet& y,
                                         SeededRng& rng) {
  check_variant(query, QueryVariant::SmallInput);
  if (y.elements.empty()) raise(ErrorCode::EmptySet, "server set is empty");
  std::vector<uint64_t> yv = y.values();
  std::vector<InclusionResult> statuses;
  statuses.reserve(query.ciphertexts.size());
  for (const Ciphertext& x : query.ciphertexts) {
    statuses.push_back(is_in_set(backend, pk, x, yv, rng));
  }
  return statuses;
}

Ciphertext epsica_process(HeBackend& backend, const PublicKey& pk, const Query& query,
                          const ServerSet& y, SeededRng& rng) {
  std::vector<InclusionResult> statuses = psi_process(backend, pk, query, y, rng);
  Ciphertext ca = encrypted_zero(backend, pk);
  for (const InclusionResult& s : statuses) {
    ca = backend.add(ca, is_zero(backend, pk, s.ct));
  }
  return ca;
}

std::vector<InclusionResult> psi_sd_process(HeBackend& backend, const PublicKey& pk,
                                            const Query& query, const ServerSet& y,
                                            const Domain& domain) {
  (void)pk;
  check_variant(query, QueryVariant::SmallDomain);
  if (query.ciphertexts.size() != domain.size()) {
    raise(ErrorCode::LengthMismatch, "small-domain query length != |D|");
  }
  std::vector<InclusionResult> statuses;
  statuses.reserve(domain.size());
  for (size_t i = 0; i < domain.size(); ++i) {
    bool present = std::any_of(y.elements.begin(), y.elements.end(), [&](const Scalar& e) {
      return e.value() == domain.elements[i].value();
    });
    statuses.push_back(
        InclusionResult{backend.mul_scalar(query.ciphertexts[i], present ? 1 : 0)});
  }
  return statuses;
}

Ciphertext epsica_sd_process(HeBackend& backend, const PublicKey& pk, const Query& query,
                             const ServerSet& y, const Domain& domain) {
  std::vector<InclusionResult> statuses = psi_sd_process(backend, pk, query, y, domain);
  Ciphertext ca = encrypted_zero(backend, pk);
  for (const InclusionResult& s : statuses) ca = backend.add(ca, s.ct);
  return ca;
}

Ciphertext psi_sum_process(HeBackend& backend, const PublicKey& pk, const Query& query,
                           const ServerSet& y, std::span<const Scalar> weights,
                           SeededRng& rng) {
  check_variant(query, QueryVariant::SmallInput);
  if (weights.size() != y.elements.size()) {
    raise(ErrorCode::WeightLengthMismatch, "one weight per server element required");
  }
  if (query.ciphertexts.empty()) return encrypted_zero(backend, pk);
  Ciphertext acc = encrypted_zero(backend, pk);
  for (size_t i = 0; i < y.elements.size(); ++i) {
    InclusionResult inc =
        is_in_encrypted_set_of(backend, pk, y.elements[i].value(), query.ciphertexts, rng);
    Ciphertext hit = is_zero(backend, pk, inc.ct);
    acc = backend.add(acc, backend.mul_scalar(hit, weights[i].value()));
  }
  return acc;
}

Ciphertext psi_sum_sd_process(HeBackend& backend, const PublicKey& pk, const Query& query,
                              const ServerSet& y, const Domain& domain,
                              std::span<const Scalar> weights) {
  if (weights.size() != domain.size()) {
    raise(ErrorCode::LengthMismatch, "one weight per domain element required");
  }
  std::vector<InclusionResult> statuses = psi_sd_process(backend, pk, query, y, domain);
  Ciphertext acc = encrypted_zero(backend, pk);
  for (size_t i = 0; i < statuses.size(); ++i) {
    acc = backend.add(acc, backend.mul_scalar(statuses[i].ct, weights[i].value()));
  }
  return acc;
}

Ciphertext mal_check(HeBackend& backend, const PublicKey& pk, const Query& query,
                     SeededRng& rng) {
  check_variant(query, QueryVariant::SmallInput);
  if (query.ciphertexts.size() < 2) return encrypted_zero(backend, pk);  // no pairs
  std::vector<Ciphertext> diffs = pairwise_difference_cts(backend, query);
  Ciphertext t = balanced_product(backend, diffs);
  Ciphertext flag = is_zero(backend, pk, t);
  // r is drawn from all of Z_q: a misbehaving client's view is then uniform
  // over the full ring.
  return backend.mul_scalar(flag, rng.uniform_below(backend.params().q()));
}

Ciphertext mal_check_multiplicative(HeBackend& backend, const PublicKey& pk,
                                    const Query& query, const Ciphertext& result) {
  (void)pk;
  check_variant(query, QueryVariant::SmallInput);
  if (query.ciphertexts.size() < 2) return result;  // empty pairwise product is 1
  std::vector<Ciphertext> diffs = pairwise_difference_cts(backend, query);
  Ciphertext t = balanced_product(backend, diffs);
  return backend.mul(result, t);
}

Scalar pairwise_difference_product(std::span<const Scalar> elements, const PrimeModulus& m) {
  Scalar t(1 % m.value(), m);
  for (size_t i = 0; i < elements.size(); ++i) {
    for (size_t j = i + 1; j < elements.size(); ++j) {
      t = t * (elements[i] - elements[j]);
    }
  }
  return t;
}

Scalar undo_multiplicative(const Scalar& t, const Scalar& m) { return m * mod_inv(t); }

Ciphertext sd_mal_check(HeBackend& backend, const PublicKey& pk, const Query& query,
                        SeededRng& rng) {
  check_variant(query, QueryVariant::SmallDomain);
  static constexpr uint64_t kBinary[] = {0, 1};
  Ciphertext r = encrypted_zero(backend, pk);
  for (const Ciphertext& z : query.ciphertexts) {
    InclusionResult t = is_in_set(backend, pk, z, kBinary, rng);
    r = backend.add(r, t.ct);
  }
  return r;
}

std::vector<Ciphertext> amortized_randomizers(HeBackend& backend, const PublicKey& pk,
                                              const Ciphertext& r, size_t n, SeededRng& rng) {
  (void)pk;
  std::vector<Ciphertext> out;
  out.reserve(n);
  const uint64_t q = backend.params().q();
  for (size_t i = 0; i < n; ++i) {
    out.push_back(backend.mul_scalar(r, 1 + rng.uniform_below(q - 1)));
  }
  return out;
}

std::vector<Ciphertext> shuffle_statuses(std::vector<Ciphertext> statuses, SeededRng& rng) {
  for (size_t i = statuses.size(); i > 1; --i) {
    size_t j = rng.uniform_below(i);
    std::swap(statuses[i - 1], statuses[j]);
  }
  return statuses;
}

std::vector<Scalar> reveal_psi(HeBackend& backend, const SecretKey& sk, QueryVariant variant,
                               std::span<const Ciphertext> statuses,
                               std::span<const Scalar> elements) {
  if (statuses.size() != elements.size()) {
    raise(ErrorCode::LengthMismatch, "one status per element expected");
  }
  std::vector<Scalar> members;
  for (size_t i = 0; i < statuses.size(); ++i) {
    auto slots = backend.decrypt(sk, statuses[i]);
    if (!slots) raise(ErrorCode::ProtocolFailure, "decryption failed");
    const uint64_t v = (*slots)[0];
    const bool member = variant == QueryVariant::SmallInput ? v == 0 : v == 1;
    if (member) members.push_back(elements[i]);
  }
  return members;
}

Scalar reveal_scalar(HeBackend& backend, const SecretKey& sk, const Ciphertext& ct) {
  auto slots = backend.decrypt(sk, ct);
  if (!slots) raise(ErrorCode::ProtocolFailure, "decryption failed");
  return Scalar((*slots)[0], backend.params().plaintext_modulus);
}

}  // namespace pcm
