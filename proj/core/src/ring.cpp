#include "pcm/ring.hpp"

namespace pcm {

namespace {

constexpr uint64_t kMaxModulus = uint64_t{1} << 62;

uint64_t mulmod_u128(uint64_t a, uint64_t b, uint64_t q) {
  return static_cast<uint64_t>((static_cast<unsigned __int128>(a) * b) % q);
}

}  // namespace

bool is_prime_u64(uint64_t n) {
  if (n < 2) return false;
  for (uint64_t p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    if (n == p) return true;
    if (n % p == 0) return false;
  }
  uint64_t d = n - 1;
  int r = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++r;
  }
  // These witnesses decide primality for every n < 3.3 * 10^24.
  for (uint64_t a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    uint64_t x = pow_mod(a % n, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 0; i < r - 1; ++i) {
      x = mulmod_u128(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

PrimeModulus::PrimeModulus(uint64_t q) : q_(q) {
  if (q < 3) raise(ErrorCode::InvalidParams, "modulus must be >= 3");
  if (q >= kMaxModulus) raise(ErrorCode::InvalidParams, "modulus must be < 2^62");
  if (!is_prime_u64(q)) raise(ErrorCode::InvalidParams, "modulus must be prime");
}

uint64_t add_mod(uint64_t a, uint64_t b, uint64_t q) {
  uint64_t s = a + b;  // no overflow: both < 2^62
  return s >= q ? s - q : s;
}

uint64_t sub_mod(uint64_t a, uint64_t b, uint64_t q) {
  return a >= b ? a - b : a + q - b;
}

uint64_t mul_mod(uint64_t a, uint64_t b, uint64_t q) { return mulmod_u128(a, b, q); }

uint64_t pow_mod(uint64_t base, uint64_t exp, uint64_t q) {
  uint64_t result = 1 % q;
  uint64_t acc = base % q;
  while (exp > 0) {
    if (exp & 1) result = mulmod_u128(result, acc, q);
    acc = mulmod_u128(acc, acc, q);
    exp >>= 1;
  }
  return result;
}

uint64_t inv_mod(uint64_t x, uint64_t q) {
  if (x % q == 0) raise(ErrorCode::ZeroInverse, "0 has no multiplicative inverse");
  return pow_mod(x % q, q - 2, q);
}

Scalar::Scalar(uint64_t value, const PrimeModulus& m) : v_(value), q_(m.value()) {
  if (v_ >= q_) raise(ErrorCode::InvalidParams, "scalar value out of range [0, q)");
}

void Scalar::check_same(const Scalar& o) const {
  if (q_ != o.q_) raise(ErrorCode::BackendMismatch, "scalar moduli differ");
}

Scalar Scalar::operator+(const Scalar& o) const {
  check_same(o);
  Scalar r = *this;
  r.v_ = add_mod(v_, o.v_, q_);
  return r;
}

Scalar Scalar::operator-(const Scalar& o) const {
  check_same(o);
  Scalar r = *this;
  r.v_ = sub_mod(v_, o.v_, q_);
  return r;
}

Scalar Scalar::operator*(const Scalar& o) const {
  check_same(o);
  Scalar r = *this;
  r.v_ = mul_mod(v_, o.v_, q_);
  return r;
}

Scalar Scalar::operator-() const {
  Scalar r = *this;
  r.v_ = sub_mod(0, v_, q_);
  return r;
}

Scalar mod_pow(const Scalar& base, uint64_t exp) {
  PrimeModulus m(base.modulus());
  return Scalar(pow_mod(base.value(), exp, base.modulus()), m);
}

Scalar mod_inv(const Scalar& x) {
  PrimeModulus m(x.modulus());
  return Scalar(inv_mod(x.value(), x.modulus()), m);
}

CoeffPoly to_coeffs(const std::vector<Scalar>& roots) {
  if (roots.empty()) raise(ErrorCode::EmptyRoots, "to_coeffs needs at least one root");
  const uint64_t q = roots.front().modulus();
  for (const Scalar& r : roots) {
    if (r.modulus() != q) raise(ErrorCode::BackendMismatch, "root moduli differ");
  }
  // Multiply out prod (X - y_i) incrementally; coeffs[i] holds a_i.
  std::vector<uint64_t> coeffs{1};
  for (const Scalar& root : roots) {
    const uint64_t y = root.value();
    coeffs.push_back(0);
    for (size_t i = coeffs.size() - 1; i > 0; --i) {
      coeffs[i] = sub_mod(coeffs[i - 1], mul_mod(y, coeffs[i], q), q);
    }
    coeffs[0] = mul_mod(sub_mod(0, y, q), coeffs[0], q);
  }
  PrimeModulus m(q);
  CoeffPoly poly;
  poly.coefficients.reserve(coeffs.size());
  for (uint64_t c : coeffs) poly.coefficients.emplace_back(c, m);
  return poly;
}

Scalar eval_poly(const CoeffPoly& poly, const Scalar& x) {
  const uint64_t q = x.modulus();
  uint64_t acc = 0;
  for (auto it = poly.coefficients.rbegin(); it != poly.coefficients.rend(); ++it) {
    acc = add_mod(mul_mod(acc, x.value(), q), it->value(), q);
  }
  return Scalar(acc, PrimeModulus(q));
}

Scalar sample_uniform(SampleDomain domain, const PrimeModulus& m, SeededRng& rng) {
  const uint64_t q = m.value();
  if (domain == SampleDomain::Zq) return Scalar(rng.uniform_below(q), m);
  return Scalar(1 + rng.uniform_below(q - 1), m);
}

SumDistribution sum_distribution(uint64_t k, const PrimeModulus& m) {
  if (k < 1) raise(ErrorCode::InvalidParams, "sum_distribution requires k >= 1");
  const Rational qm1(m.value() - 1);
  Rational z = 0;
  Rational p = Rational(1) / qm1;
  for (uint64_t i = 2; i <= k; ++i) {
    Rational next_z = p;
    Rational next_p = p + (z - p) / qm1;
    z = next_z;
    p = next_p;
  }
  return SumDistribution{z, p};
}

}  // namespace pcm
