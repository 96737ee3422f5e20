#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "pcm/agg.hpp"
#include "pcm/core_fn.hpp"
#include "pcm/match.hpp"
#include "pcm/psi.hpp"

namespace pcm_test {

using namespace pcm;

/// Single-slot backend over Z_q: the "scalar mode" used for all oracle work.
struct ScalarRig {
  HEParams params;
  std::unique_ptr<HeBackend> backend;
  SeededRng rng;
  KeyPair keys;

  explicit ScalarRig(uint64_t q, BackendKind kind = BackendKind::ClearRing,
                     uint32_t depth_budget = 0, uint64_t seed = 1234)
      : params(HEParams::custom(1, q, depth_budget, false)),
        backend(make_backend(kind, params)),
        rng(seed) {
    keys = backend->keygen(rng);
  }

  uint64_t q() const { return params.q(); }
  Ciphertext enc(uint64_t v) { return backend->encrypt_scalar(keys.pk, v); }
  uint64_t dec(const Ciphertext& ct) {
    auto slots = backend->decrypt(keys.sk, ct);
    REQUIRE(slots.has_value());
    return (*slots)[0];
  }
  Scalar scalar(uint64_t v) const { return Scalar(v, params.plaintext_modulus); }
  std::vector<Scalar> scalars(const std::vector<uint64_t>& vs) const {
    std::vector<Scalar> out;
    for (uint64_t v : vs) out.push_back(scalar(v));
    return out;
  }
};

// ---- plaintext oracles -----------------------------------------------------

inline std::vector<uint64_t> oracle_intersection(std::vector<uint64_t> x,
                                                 std::vector<uint64_t> y) {
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::vector<uint64_t> out;
  std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(out));
  return out;
}

inline size_t oracle_ca(const std::vector<uint64_t>& x, const std::vector<uint64_t>& y) {
  return oracle_intersection(x, y).size();
}

inline bool oracle_subset(const std::vector<uint64_t>& x, const std::vector<uint64_t>& y) {
  for (uint64_t v : x) {
    if (std::find(y.begin(), y.end(), v) == y.end()) return false;
  }
  return true;
}

/// Exact rational comparison tversky(x, y) >= t1/t2 with alpha = a1/a2,
/// beta = b1/b2, all over the set sizes (no floating point).
inline bool oracle_tversky_at_least(const std::vector<uint64_t>& x,
                                    const std::vector<uint64_t>& y, const Fraction& alpha,
                                    const Fraction& beta, const Fraction& t) {
  const long long ca = static_cast<long long>(oracle_ca(x, y));
  const long long nx = static_cast<long long>(x.size());
  const long long ny = static_cast<long long>(y.size());
  // tversky = ca / (ca + alpha (nx-ca) + beta (ny-ca)); compare cross-
  // multiplied in integers: ca * t.den * a2 * b2 >= t.num * (ca a2 b2 +
  // a1 b2 (nx-ca) + b1 a2 (ny-ca)).
  const long long lhs = ca * t.den * alpha.den * beta.den;
  const long long rhs =
      t.num * (ca * alpha.den * beta.den + alpha.num * beta.den * (nx - ca) +
               beta.num * alpha.den * (ny - ca));
  return lhs >= rhs;
}

inline uint64_t oracle_weighted_sum(const std::vector<uint64_t>& x,
                                    const std::vector<uint64_t>& y,
                                    const std::vector<uint64_t>& w, uint64_t q) {
  uint64_t acc = 0;
  for (size_t i = 0; i < y.size(); ++i) {
    if (std::find(x.begin(), x.end(), y[i]) != x.end()) acc = add_mod(acc, w[i] % q, q);
  }
  return acc;
}

/// kappa'th (1-based) matching set's datum; 0 when absent.
inline uint64_t oracle_retrieval(const std::vector<bool>& matches,
                                 const std::vector<uint64_t>& data, uint64_t kappa) {
  uint64_t seen = 0;
  for (size_t j = 0; j < matches.size(); ++j) {
    if (matches[j] && ++seen == kappa) return data[j];
  }
  return 0;
}

// ---- random circuit oracle (backend homomorphism + depth) -------------------

struct CircuitOp {
  enum Kind { AddCt, SubCt, MulCt, AddPlain, MulPlain } kind;
  size_t lhs, rhs;      // wire indices (rhs unused for plain ops)
  uint64_t scalar = 0;  // plain operand
};

struct Circuit {
  size_t inputs;
  std::vector<CircuitOp> ops;
};

inline Circuit random_circuit(SeededRng& rng, size_t inputs, size_t length, uint64_t q) {
  Circuit c{inputs, {}};
  size_t wires = inputs;
  for (size_t i = 0; i < length; ++i) {
    CircuitOp op;
    op.kind = static_cast<CircuitOp::Kind>(rng.uniform_below(5));
    op.lhs = rng.uniform_below(wires);
    op.rhs = rng.uniform_below(wires);
    op.scalar = rng.uniform_below(q);
    c.ops.push_back(op);
    ++wires;
  }
  return c;
}

/// Evaluates the circuit over plaintext slots and also returns the ct-ct
/// multiplication DAG depth of every wire.
inline std::pair<std::vector<std::vector<uint64_t>>, std::vector<uint32_t>> eval_circuit_plain(
    const Circuit& c, const std::vector<std::vector<uint64_t>>& inputs, uint64_t q) {
  std::vector<std::vector<uint64_t>> wires = inputs;
  std::vector<uint32_t> depth(inputs.size(), 0);
  for (const CircuitOp& op : c.ops) {
    const auto& a = wires[op.lhs];
    const auto& b = wires[op.rhs];
    std::vector<uint64_t> out(a.size());
    uint32_t d = 0;
    switch (op.kind) {
      case CircuitOp::AddCt:
        for (size_t i = 0; i < a.size(); ++i) out[i] = add_mod(a[i], b[i], q);
        d = std::max(depth[op.lhs], depth[op.rhs]);
        break;
      case CircuitOp::SubCt:
        for (size_t i = 0; i < a.size(); ++i) out[i] = sub_mod(a[i], b[i], q);
        d = std::max(depth[op.lhs], depth[op.rhs]);
        break;
      case CircuitOp::MulCt:
        for (size_t i = 0; i < a.size(); ++i) out[i] = mul_mod(a[i], b[i], q);
        d = std::max(depth[op.lhs], depth[op.rhs]) + 1;
        break;
      case CircuitOp::AddPlain:
        for (size_t i = 0; i < a.size(); ++i) out[i] = add_mod(a[i], op.scalar, q);
        d = depth[op.lhs];
        break;
      case CircuitOp::MulPlain:
        for (size_t i = 0; i < a.size(); ++i) out[i] = mul_mod(a[i], op.scalar, q);
        d = depth[op.lhs];
        break;
    }
    wires.push_back(std::move(out));
    depth.push_back(d);
  }
  return {wires, depth};
}

inline std::vector<Ciphertext> eval_circuit_backend(HeBackend& be, const Circuit& c,
                                                    std::vector<Ciphertext> wires) {
  const uint32_t n = be.params().slot_count;
  for (const CircuitOp& op : c.ops) {
    const Ciphertext& a = wires[op.lhs];
    const Ciphertext& b = wires[op.rhs];
    std::vector<uint64_t> plain(n, op.scalar);
    switch (op.kind) {
      case CircuitOp::AddCt: wires.push_back(be.add(a, b)); break;
      case CircuitOp::SubCt: wires.push_back(be.sub(a, b)); break;
      case CircuitOp::MulCt: wires.push_back(be.mul(a, b)); break;
      case CircuitOp::AddPlain: wires.push_back(be.add_plain(a, plain)); break;
      case CircuitOp::MulPlain: wires.push_back(be.mul_plain(a, plain)); break;
    }
  }
  return wires;
}

// ---- statistics helpers ------------------------------------------------------

/// |observed - expected| <= sigmas * sqrt(n p (1-p)) for a binomial count.
inline bool binomial_within(uint64_t observed, double n, double p, double sigmas) {
  double mean = n * p;
  double sd = std::sqrt(std::max(n * p * (1 - p), 1e-12));
  return std::abs(static_cast<double>(observed) - mean) <= sigmas * sd;
}

/// Pearson chi-square statistic against the uniform distribution over q bins.
inline double chi_square_uniform(const std::vector<uint64_t>& counts, double total) {
  double expected = total / counts.size();
  double stat = 0;
  for (uint64_t c : counts) {
    double d = c - expected;
    stat += d * d / expected;
  }
  return stat;
}

/// Random distinct values below q.
inline std::vector<uint64_t> random_distinct(SeededRng& rng, size_t n, uint64_t bound) {
  std::set<uint64_t> s;
  while (s.size() < n) s.insert(rng.uniform_below(bound));
  return std::vector<uint64_t>(s.begin(), s.end());
}

}  // namespace pcm_test
