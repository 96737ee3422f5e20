#include "pcm/match.hpp"

#include <charconv>
#include <numeric>

namespace pcm {

namespace {

Ciphertext encrypted_zero(HeBackend& backend, const PublicKey& pk) {
  return backend.encrypt(pk, {});
}

/// gamma = IsIn(ca, S) for a plaintext residue set S.
MatchingStatus membership_status(HeBackend& backend, const PublicKey& pk, const Ciphertext& ca,
                                 std::span<const uint64_t> s, int set_id, SeededRng& rng) {
  InclusionResult inc = is_in_set(backend, pk, ca, s, rng);
  return MatchingStatus{inc.ct, set_id};
}

MatchingStatus constant_non_match(HeBackend& backend, const PublicKey& pk, int set_id,
                                  SeededRng& rng) {
  const uint64_t q = backend.params().q();
  std::vector<uint64_t> v(backend.params().slot_count, 1 + rng.uniform_below(q - 1));
  return MatchingStatus{backend.encrypt(pk, v), set_id};
}

uint64_t checked_range_size(uint64_t lo, uint64_t hi, uint64_t q) {
  if (hi - lo + 1 >= q) {
    raise(ErrorCode::InvalidParams, "threshold range does not fit the plaintext ring");
  }
  return hi - lo + 1;
}

}  // namespace

Fraction::Fraction(int64_t n, int64_t d) : num(n), den(d) {
  if (den == 0) raise(ErrorCode::InvalidParams, "fraction with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
}

Fraction Fraction::parse(std::string_view text) {
  auto to_i64 = [](std::string_view s) -> int64_t {
    int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      raise(ErrorCode::ParseError, "bad rational: " + std::string(s));
    }
    return v;
  };
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    return Fraction(to_i64(text.substr(0, slash)), to_i64(text.substr(slash + 1)));
  }
  if (auto dot = text.find('.'); dot != std::string_view::npos) {
    std::string_view frac = text.substr(dot + 1);
    int64_t scale = 1;
    for (size_t i = 0; i < frac.size(); ++i) scale *= 10;
    int64_t whole = dot == 0 ? 0 : to_i64(text.substr(0, dot));
    int64_t part = frac.empty() ? 0 : to_i64(frac);
    bool neg = !text.empty() && text.front() == '-';
    int64_t mag = (whole < 0 ? -whole : whole) * scale + part;
    return Fraction(neg ? -mag : mag, scale);
  }
  return Fraction(to_i64(text), 1);
}

TverskyParams TverskyParams::from_coefficients(uint64_t a, uint64_t b, uint64_t c) {
  if (a == 0) raise(ErrorCode::InvalidParams, "tversky coefficient a must be positive");
  if (a < b + c) raise(ErrorCode::InvalidParams, "tversky coefficients need a - b - c >= 0");
  TverskyParams p;
  p.a = a;
  p.b = b;
  p.c = c;
  return p;
}

TverskyParams tversky_param_process(const Fraction& alpha, const Fraction& beta,
                                    const Fraction& t) {
  if (t.num <= 0 || t.num > t.den) {
    raise(ErrorCode::InvalidThreshold, "t must lie in (0, 1]");
  }
  if (alpha.num < 0 || beta.num < 0) {
    raise(ErrorCode::InvalidParams, "alpha and beta must be non-negative");
  }
  const int64_t l = std::lcm(std::lcm(t.num, alpha.den), beta.den);
  // a = l * (1/t - 1 + alpha + beta), exact by construction of l.
  const int64_t a = l / t.num * t.den - l + l / alpha.den * alpha.num + l / beta.den * beta.num;
  const int64_t b = l / alpha.den * alpha.num;
  const int64_t c = l / beta.den * beta.num;
  if (a <= 0) raise(ErrorCode::InvalidParams, "degenerate tversky parameters (a = 0)");
  int64_t g = std::gcd(a, std::gcd(b, c));
  if (g == 0) g = 1;
  TverskyParams p = TverskyParams::from_coefficients(static_cast<uint64_t>(a / g),
                                                     static_cast<uint64_t>(b / g),
                                                     static_cast<uint64_t>(c / g));
  p.alpha = alpha;
  p.beta = beta;
  p.t = t;
  return p;
}

TverskyParams jaccard_params(const Fraction& t) {
  return tversky_param_process(Fraction(1, 1), Fraction(1, 1), t);
}

MatchingStatus f_match(HeBackend& backend, const PublicKey& pk,
                       std::span<const InclusionResult> statuses, int set_id) {
  Ciphertext gamma = encrypted_zero(backend, pk);
  for (const InclusionResult& s : statuses) gamma = backend.add(gamma, s.ct);
  return MatchingStatus{gamma, set_id};
}

MatchingStatus f_match_sd(HeBackend& backend, const PublicKey& pk, const Query& query,
                          std::span<const InclusionResult> statuses, int set_id,
                          SeededRng& rng) {
  if (query.variant != QueryVariant::SmallDomain ||
      query.ciphertexts.size() != statuses.size()) {
    raise(ErrorCode::LengthMismatch, "small-domain query/status mismatch");
  }
  const uint64_t q = backend.params().q();
  Ciphertext gamma = encrypted_zero(backend, pk);
  for (size_t i = 0; i < statuses.size(); ++i) {
    // z_i - z_i*v_i is 1 exactly when the client wants d_i and the server
    // lacks it; a fresh mask makes a missing element contribute uniformly.
    Ciphertext missing = backend.sub(query.ciphertexts[i], statuses[i].ct);
    gamma = backend.add(gamma, backend.mul_scalar(missing, 1 + rng.uniform_below(q - 1)));
  }
  return MatchingStatus{gamma, set_id};
}

MatchingStatus th_match(HeBackend& backend, const PublicKey& pk, const Ciphertext& ca,
                        uint64_t t_min, uint64_t t_max, int set_id, SeededRng& rng) {
  if (t_min > t_max) return constant_non_match(backend, pk, set_id, rng);
  const uint64_t q = backend.params().q();
  if (t_max >= q) {
    raise(ErrorCode::InvalidParams, "cardinalities are ring elements; threshold exceeds q");
  }
  checked_range_size(t_min, t_max, q);
  std::vector<uint64_t> range;
  range.reserve(t_max - t_min + 1);
  for (uint64_t t = t_min; t <= t_max; ++t) range.push_back(t % q);
  return membership_status(backend, pk, ca, range, set_id, rng);
}

namespace {

/// The two-sided test reads affine values as ring residues; it is exact only
/// when the reachable integer range (-b|X|-c|Y| .. (a-b-c)|Y|) does not wrap.
void check_tversky_ring(uint64_t q, const TverskyParams& p, uint64_t size_x, uint64_t size_y) {
  const uint64_t span = (p.a - p.b - p.c) * size_y;
  if (p.b * size_x + p.c * size_y + span >= q) {
    raise(ErrorCode::InvalidParams, "plaintext ring too small for an exact similarity test");
  }
}

}  // namespace

MatchingStatus tv_match(HeBackend& backend, const PublicKey& pk, const Ciphertext& ca,
                        uint64_t size_x, uint64_t size_y, const TverskyParams& params,
                        int set_id, SeededRng& rng) {
  const uint64_t q = backend.params().q();
  const uint64_t span = (params.a - params.b - params.c) * size_y;
  check_tversky_ring(q, params, size_x, size_y);
  checked_range_size(0, span, q);
  // ca determines the affine form bijectively, so the two-sided test
  // 0 <= a*ca - b|X| - c|Y| <= (a-b-c)|Y| becomes membership of ca itself in
  // the preimage of the range.
  const uint64_t offset = add_mod(mul_mod(params.b % q, size_x % q, q),
                                  mul_mod(params.c % q, size_y % q, q), q);
  const uint64_t a_inv = inv_mod(params.a % q, q);
  std::vector<uint64_t> preimage;
  preimage.reserve(span + 1);
  for (uint64_t t = 0; t <= span; ++t) {
    preimage.push_back(mul_mod(add_mod(t % q, offset, q), a_inv, q));
  }
  return membership_status(backend, pk, ca, preimage, set_id, rng);
}

MatchingStatus tv_match(HeBackend& backend, const PublicKey& pk, const Ciphertext& ca,
                        const Ciphertext& size_x, uint64_t size_x_bound, uint64_t size_y,
                        const TverskyParams& params, int set_id, SeededRng& rng) {
  const uint64_t q = backend.params().q();
  const uint64_t span = (params.a - params.b - params.c) * size_y;
  check_tversky_ring(q, params, size_x_bound, size_y);
  checked_range_size(0, span, q);
  Ciphertext tv = backend.sub(backend.mul_scalar(ca, params.a % q),
                              backend.mul_scalar(size_x, params.b % q));
  tv = backend.sub_scalar(tv, mul_mod(params.c % q, size_y % q, q));
  std::vector<uint64_t> range;
  range.reserve(span + 1);
  for (uint64_t t = 0; t <= span; ++t) range.push_back(t % q);
  return membership_status(backend, pk, tv, range, set_id, rng);
}

bool match_reveal(HeBackend& backend, const SecretKey& sk, const MatchingStatus& status) {
  auto slots = backend.decrypt(sk, status.ct);
  if (!slots) raise(ErrorCode::ProtocolFailure, "decryption failed");
  return (*slots)[0] == 0;
}

}  // namespace pcm
