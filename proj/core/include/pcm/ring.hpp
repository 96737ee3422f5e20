#pragma once

#include <cstdint>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "pcm/errors.hpp"
#include "pcm/rng.hpp"

namespace pcm {

using Rational = boost::multiprecision::cpp_rational;

/// Deterministic Miller-Rabin, exact for all 64-bit inputs.
bool is_prime_u64(uint64_t n);

/// The prime plaintext modulus q of the ring Z_q. Restricted to q < 2^62 so
/// that products fit in 128-bit intermediates; every parameter set used by
/// the protocols is far below that bound.
class PrimeModulus {
 public:
  PrimeModulus() : q_(3) {}
  explicit PrimeModulus(uint64_t q);

  uint64_t value() const { return q_; }
  bool operator==(const PrimeModulus&) const = default;

 private:
  uint64_t q_;
};

// Modular primitives on raw residues. Callers guarantee operands < q.
uint64_t add_mod(uint64_t a, uint64_t b, uint64_t q);
uint64_t sub_mod(uint64_t a, uint64_t b, uint64_t q);
uint64_t mul_mod(uint64_t a, uint64_t b, uint64_t q);
uint64_t pow_mod(uint64_t base, uint64_t exp, uint64_t q);  // 0^0 == 1
uint64_t inv_mod(uint64_t x, uint64_t q);                   // throws ZeroInverse

/// An element of Z_q. Binary operations require equal moduli.
class Scalar {
 public:
  Scalar(uint64_t value, const PrimeModulus& m);

  uint64_t value() const { return v_; }
  uint64_t modulus() const { return q_; }

  Scalar operator+(const Scalar& o) const;
  Scalar operator-(const Scalar& o) const;
  Scalar operator*(const Scalar& o) const;
  Scalar operator-() const;
  bool operator==(const Scalar&) const = default;

  bool is_zero() const { return v_ == 0; }

 private:
  void check_same(const Scalar& o) const;

  uint64_t v_;
  uint64_t q_;
};

Scalar mod_pow(const Scalar& base, uint64_t exp);
Scalar mod_inv(const Scalar& x);

/// Monic coefficients a_0..a_n of prod_i (X - y_i); a_n == 1.
struct CoeffPoly {
  std::vector<Scalar> coefficients;

  size_t degree() const { return coefficients.size() - 1; }
};

CoeffPoly to_coeffs(const std::vector<Scalar>& roots);

/// Horner evaluation of an arbitrary coefficient list (a_0 first).
Scalar eval_poly(const CoeffPoly& poly, const Scalar& x);

enum class SampleDomain { Zq, ZqStar };

/// Uniform draw from Z_q or Z_q^* = Z_q \ {0}. ZqStar requires q >= 3 by the
/// callers' convention (q >= 3 is already enforced by PrimeModulus).
Scalar sample_uniform(SampleDomain domain, const PrimeModulus& m, SeededRng& rng);

/// Exact distribution of the sum of k independent uniform Z_q^* elements:
/// zero_prob is the probability the sum is 0, nonzero_prob the probability it
/// equals any fixed non-zero value. zero_prob + (q-1)*nonzero_prob == 1.
struct SumDistribution {
  Rational zero_prob;
  Rational nonzero_prob;
};

SumDistribution sum_distribution(uint64_t k, const PrimeModulus& m);

}  // namespace pcm
