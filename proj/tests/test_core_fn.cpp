#include <doctest.h>

#include "helpers.hpp"
#include "pcm/core_fn.hpp"

using namespace pcm;
using namespace pcm_test;

TEST_CASE("is_zero basics") {
  ScalarRig rig(7);
  CHECK(rig.dec(is_zero(*rig.backend, rig.keys.pk, rig.enc(0))) == 1);
  CHECK(rig.dec(is_zero(*rig.backend, rig.keys.pk, rig.enc(4))) == 0);
}

TEST_CASE("is_zero exhaustive indicator at q=101") {
  ScalarRig rig(101);
  for (uint64_t x = 0; x < 101; ++x) {
    CHECK(rig.dec(is_zero(*rig.backend, rig.keys.pk, rig.enc(x))) == (x == 0 ? 1 : 0));
  }
}

TEST_CASE("is_zero depth accounting and budget check") {
  // q = 17: exponent 16, depth ceil(log2 16) = 4
  ScalarRig ok(17, BackendKind::DepthTracked, 4);
  Ciphertext b = is_zero(*ok.backend, ok.keys.pk, ok.enc(5));
  CHECK(b.depth_used == 4);
  CHECK(ok.dec(b) == 0);

  ScalarRig tight(17, BackendKind::DepthTracked, 3);
  CHECK_THROWS_AS(is_zero(*tight.backend, tight.keys.pk, tight.enc(5)), Error);
}

TEST_CASE("is_zero bills one exponentiation unit") {
  ScalarRig rig(101);
  rig.backend->reset_costs();
  is_zero(*rig.backend, rig.keys.pk, rig.enc(9));
  CostSnapshot snap = rig.backend->cost_snapshot();
  CHECK(snap.exponentiations == 1);
  CHECK(snap.ct_mul == 0);
  CHECK(snap.ct_add == 0);
}

TEST_CASE("ct_pow matches plaintext power with balanced depth") {
  ScalarRig rig(1009, BackendKind::DepthTracked, 12);
  SeededRng rng(3);
  for (int i = 0; i < 50; ++i) {
    uint64_t x = rng.uniform_below(1009);
    uint64_t e = 1 + rng.uniform_below(200);
    Ciphertext p = ct_pow(*rig.backend, rig.enc(x), e);
    CHECK(rig.dec(p) == pow_mod(x, e, 1009));
    CHECK(p.depth_used == exponent_depth(e));
  }
}

TEST_CASE("is_in_encrypted membership") {
  ScalarRig rig(7);
  auto enc_set = [&](std::vector<uint64_t> ys) {
    std::vector<Ciphertext> out;
    for (uint64_t y : ys) out.push_back(rig.enc(y));
    return out;
  };
  auto ys = enc_set({1, 3, 5});
  CHECK(rig.dec(is_in_encrypted(*rig.backend, rig.keys.pk, rig.enc(3), ys, rig.rng).ct) == 0);
  auto zero_set = enc_set({0});
  CHECK(rig.dec(is_in_encrypted(*rig.backend, rig.keys.pk, rig.enc(0), zero_set, rig.rng).ct) ==
        0);
  CHECK_THROWS_AS(is_in_encrypted(*rig.backend, rig.keys.pk, rig.enc(0), {}, rig.rng), Error);

  // non-member output covers Z_7^* uniformly over the mask randomness
  auto pair = enc_set({1, 3});
  std::vector<uint64_t> counts(7, 0);
  for (int i = 0; i < 6000; ++i) {
    ++counts[rig.dec(is_in_encrypted(*rig.backend, rig.keys.pk, rig.enc(2), pair, rig.rng).ct)];
  }
  CHECK(counts[0] == 0);
  for (int v = 1; v < 7; ++v) CHECK(binomial_within(counts[v], 6000, 1.0 / 6, 5.0));
}

TEST_CASE("is_in_plain coefficient form") {
  ScalarRig rig(7);
  // x = 2, Y = {1,2}: coefficients [2, 4, 1]; 2 + 4*2 + 1*4 = 14 = 0 mod 7
  std::vector<Ciphertext> powers{rig.enc(2), rig.enc(4)};
  std::vector<uint64_t> ys{1, 2};
  CHECK(rig.dec(is_in_plain(*rig.backend, rig.keys.pk, powers, ys, rig.rng).ct) == 0);

  std::vector<Ciphertext> powers3{rig.enc(3), rig.enc(2)};
  CHECK(rig.dec(is_in_plain(*rig.backend, rig.keys.pk, powers3, ys, rig.rng).ct) != 0);

  // strict mode requires |Y| powers
  std::vector<Ciphertext> only_x{rig.enc(2)};
  CHECK_THROWS_AS(
      is_in_plain(*rig.backend, rig.keys.pk, only_x, ys, rig.rng, PowerCompletion::None), Error);
  CHECK_THROWS_AS(is_in_plain(*rig.backend, rig.keys.pk, {}, ys, rig.rng), Error);
}

TEST_CASE("power completion depth") {
  // 8 supplied powers, degree 16: one pairing level.
  ScalarRig rig(97, BackendKind::DepthTracked, 10);
  SeededRng rng(8);
  uint64_t x = 5;
  std::vector<Ciphertext> powers;
  for (uint64_t j = 1; j <= 8; ++j) powers.push_back(rig.enc(pow_mod(x, j, 97)));
  auto ys = random_distinct(rng, 16, 97);
  InclusionResult inc = is_in_plain(*rig.backend, rig.keys.pk, powers, ys, rig.rng);
  CHECK(inc.ct.depth_used == 1);

  // full powers: no ct-ct depth at all
  std::vector<Ciphertext> full;
  for (uint64_t j = 1; j <= 16; ++j) full.push_back(rig.enc(pow_mod(x, j, 97)));
  InclusionResult direct = is_in_plain(*rig.backend, rig.keys.pk, full, ys, rig.rng);
  CHECK(direct.ct.depth_used == 0);
  CHECK((rig.dec(direct.ct) == 0) == (rig.dec(inc.ct) == 0));
}

TEST_CASE("is_in variants agree on the zero pattern") {
  SeededRng rng(21);
  for (int trial = 0; trial < 400; ++trial) {
    uint64_t q = std::vector<uint64_t>{31, 101, 1009}[rng.uniform_below(3)];
    ScalarRig rig(q, BackendKind::ClearRing, 0, 5000 + trial);
    size_t n = 1 + rng.uniform_below(6);
    auto ys = random_distinct(rng, n, q);
    uint64_t x = rng.uniform_below(q);

    std::vector<Ciphertext> enc_ys;
    for (uint64_t y : ys) enc_ys.push_back(rig.enc(y));
    std::vector<Ciphertext> powers;
    for (size_t j = 1; j <= n; ++j) powers.push_back(rig.enc(pow_mod(x, j, q)));

    bool member = std::find(ys.begin(), ys.end(), x) != ys.end();
    uint64_t via_enc =
        rig.dec(is_in_encrypted(*rig.backend, rig.keys.pk, rig.enc(x), enc_ys, rig.rng).ct);
    uint64_t via_set = rig.dec(is_in_set(*rig.backend, rig.keys.pk, rig.enc(x), ys, rig.rng).ct);
    uint64_t via_poly = rig.dec(is_in_plain(*rig.backend, rig.keys.pk, powers, ys, rig.rng).ct);
    CHECK((via_enc == 0) == member);
    CHECK((via_set == 0) == member);
    CHECK((via_poly == 0) == member);
  }
}

TEST_CASE("is_zero of is_in is the membership indicator, exhaustively at q=31") {
  ScalarRig rig(31);
  std::vector<uint64_t> ys{3, 7, 19};
  for (uint64_t x = 0; x < 31; ++x) {
    InclusionResult inc = is_in_set(*rig.backend, rig.keys.pk, rig.enc(x), ys, rig.rng);
    uint64_t indicator = rig.dec(is_zero(*rig.backend, rig.keys.pk, inc.ct));
    bool member = std::find(ys.begin(), ys.end(), x) != ys.end();
    CHECK(indicator == (member ? 1 : 0));
  }
}

TEST_CASE("is_in depth is logarithmic in the set size") {
  ScalarRig rig(1009, BackendKind::DepthTracked, 16);
  SeededRng rng(31);
  for (size_t n : {1ull, 2ull, 3ull, 5ull, 8ull, 16ull}) {
    auto ys = random_distinct(rng, n, 1009);
    std::vector<Ciphertext> enc_ys;
    for (uint64_t y : ys) enc_ys.push_back(rig.enc(y));
    InclusionResult inc =
        is_in_encrypted(*rig.backend, rig.keys.pk, rig.enc(4), enc_ys, rig.rng);
    CHECK(inc.ct.depth_used == ceil_log2(n));
  }
}

TEST_CASE("is_equal_to") {
  ScalarRig rig(101);
  CHECK(rig.dec(is_equal_to(*rig.backend, rig.keys.pk, rig.enc(42), 42)) == 1);
  CHECK(rig.dec(is_equal_to(*rig.backend, rig.keys.pk, rig.enc(42), 41)) == 0);
  rig.backend->reset_costs();
  is_equal_to(*rig.backend, rig.keys.pk, rig.enc(5), 9);
  CHECK(rig.backend->cost_snapshot().exponentiations == 1);
  CHECK(rig.backend->cost_snapshot().ct_add == 0);
}
