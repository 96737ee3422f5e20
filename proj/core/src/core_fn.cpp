#include "pcm/core_fn.hpp"

#include <map>

namespace pcm {

namespace {

Ciphertext pow_memo(HeBackend& backend, const Ciphertext& x, uint64_t exp,
                    std::map<uint64_t, Ciphertext>& memo) {
  if (exp == 1) return x;
  auto it = memo.find(exp);
  if (it != memo.end()) return it->second;
  Ciphertext a = pow_memo(backend, x, (exp + 1) / 2, memo);
  Ciphertext b = pow_memo(backend, x, exp / 2, memo);
  Ciphertext r = backend.mul(a, b);
  memo.emplace(exp, r);
  return r;
}

Ciphertext product_range(HeBackend& backend, std::span<const Ciphertext> factors) {
  if (factors.size() == 1) return factors[0];
  size_t half = factors.size() / 2;
  Ciphertext left = product_range(backend, factors.subspan(0, half));
  Ciphertext right = product_range(backend, factors.subspan(half));
  return backend.mul(left, right);
}

/// Zero-detection chain without the exponentiation bookkeeping; shared by
/// is_zero and is_equal_to.
Ciphertext is_zero_chain(HeBackend& backend, const Ciphertext& x) {
  const uint64_t q = backend.params().q();
  const uint32_t need = exponent_depth(q - 1);
  const uint32_t budget = backend.kind() == BackendKind::ClearRing
                              ? kUnboundedDepth
                              : backend.params().depth_budget;
  if (budget != kUnboundedDepth && x.depth_used + need > budget) {
    raise(ErrorCode::DepthUnavailable,
          "zero detection needs depth " + std::to_string(need));
  }
  CounterPause pause;
  std::map<uint64_t, Ciphertext> memo;
  Ciphertext p = pow_memo(backend, x, q - 1, memo);
  std::vector<uint64_t> ones(backend.params().slot_count, 1);
  return backend.sub_from_plain(ones, p);
}

uint64_t mask_value(HeBackend& backend, SeededRng& rng) {
  return 1 + rng.uniform_below(backend.params().q() - 1);
}

InclusionResult masked_product(HeBackend& backend, std::vector<Ciphertext>&& factors,
                               SeededRng& rng) {
  Ciphertext prod = balanced_product(backend, factors);
  return InclusionResult{backend.mul_scalar(prod, mask_value(backend, rng))};
}

}  // namespace

Ciphertext ct_pow(HeBackend& backend, const Ciphertext& x, uint64_t exp) {
  if (exp == 0) raise(ErrorCode::InvalidParams, "ct_pow requires exp >= 1");
  std::map<uint64_t, Ciphertext> memo;
  return pow_memo(backend, x, exp, memo);
}

Ciphertext balanced_product(HeBackend& backend, std::span<const Ciphertext> factors) {
  if (factors.empty()) raise(ErrorCode::EmptySet, "balanced_product of nothing");
  return product_range(backend, factors);
}

Ciphertext is_zero(HeBackend& backend, const PublicKey&, const Ciphertext& x) {
  backend.count_exponentiation();
  return is_zero_chain(backend, x);
}

Ciphertext is_equal_to(HeBackend& backend, const PublicKey&, const Ciphertext& x,
                       uint64_t value) {
  backend.count_exponentiation();
  Ciphertext shifted = [&] {
    CounterPause pause;
    return backend.sub_scalar(x, value);
  }();
  return is_zero_chain(backend, shifted);
}

InclusionResult is_in_encrypted(HeBackend& backend, const PublicKey&, const Ciphertext& x,
                                std::span<const Ciphertext> ys, SeededRng& rng) {
  if (ys.empty()) raise(ErrorCode::EmptySet, "inclusion test against empty set");
  std::vector<Ciphertext> factors;
  factors.reserve(ys.size());
  for (const Ciphertext& y : ys) factors.push_back(backend.sub(x, y));
  return masked_product(backend, std::move(factors), rng);
}

InclusionResult is_in_set(HeBackend& backend, const PublicKey&, const Ciphertext& x,
                          std::span<const uint64_t> ys, SeededRng& rng) {
  if (ys.empty()) raise(ErrorCode::EmptySet, "inclusion test against empty set");
  std::vector<Ciphertext> factors;
  factors.reserve(ys.size());
  for (uint64_t y : ys) factors.push_back(backend.sub_scalar(x, y));
  return masked_product(backend, std::move(factors), rng);
}

InclusionResult is_in_encrypted_set_of(HeBackend& backend, const PublicKey&, uint64_t x,
                                       std::span<const Ciphertext> ys, SeededRng& rng) {
  if (ys.empty()) raise(ErrorCode::EmptySet, "inclusion test against empty set");
  std::vector<uint64_t> xv(backend.params().slot_count, x);
  std::vector<Ciphertext> factors;
  factors.reserve(ys.size());
  for (const Ciphertext& y : ys) factors.push_back(backend.sub_from_plain(xv, y));
  return masked_product(backend, std::move(factors), rng);
}

InclusionResult is_in_plain(HeBackend& backend, const PublicKey&,
                            std::span<const Ciphertext> powers, std::span<const uint64_t> ys,
                            SeededRng& rng, PowerCompletion completion) {
  if (ys.empty()) raise(ErrorCode::EmptySet, "inclusion test against empty set");
  if (powers.empty()) raise(ErrorCode::InsufficientPowers, "no powers supplied");
  const size_t n = ys.size();
  const size_t supplied = powers.size();
  if (completion == PowerCompletion::None && supplied < n) {
    raise(ErrorCode::InsufficientPowers,
          "need " + std::to_string(n) + " powers, got " + std::to_string(supplied));
  }

  const uint64_t q = backend.params().q();
  PrimeModulus m(q);
  std::vector<Scalar> roots;
  roots.reserve(n);
  for (uint64_t y : ys) roots.emplace_back(y, m);
  CoeffPoly poly = to_coeffs(roots);

  // Assemble any missing powers from supplied ones; the balanced split
  // x^i = x^ceil(i/2) * x^floor(i/2) keeps the extra depth at
  // ceil(log2 ceil(|Y|/p)) with one multiplication per missing power.
  std::vector<Ciphertext> pw(powers.begin(), powers.end());
  pw.reserve(n);
  for (size_t i = supplied + 1; i <= n; ++i) {
    size_t a = i - i / 2;
    pw.push_back(backend.mul(pw[a - 1], pw[i - a - 1]));
  }

  const uint64_t r = mask_value(backend, rng);
  // r is folded into the coefficients in plaintext, so the mask costs nothing.
  Ciphertext acc = backend.mul_scalar(pw[0], mul_mod(r, poly.coefficients[1].value(), q));
  for (size_t i = 2; i <= n; ++i) {
    Ciphertext term = backend.mul_scalar(pw[i - 1], mul_mod(r, poly.coefficients[i].value(), q));
    acc = backend.add(acc, term);
  }
  acc = backend.add_scalar(acc, mul_mod(r, poly.coefficients[0].value(), q));
  return InclusionResult{acc};
}

}  // namespace pcm
