#include <doctest.h>

#include "helpers.hpp"
#include "pcm/match.hpp"

using namespace pcm;
using namespace pcm_test;

namespace {

std::vector<InclusionResult> make_statuses(ScalarRig& rig, const std::vector<uint64_t>& xv,
                                           const std::vector<uint64_t>& yv) {
  ClientSet x(rig.scalars(xv), 16);
  ServerSet y{rig.scalars(yv), 0};
  Query q = encode_query(*rig.backend, rig.keys.pk, x);
  return psi_process(*rig.backend, rig.keys.pk, q, y, rig.rng);
}

}  // namespace

TEST_CASE("tversky parameter transform") {
  TverskyParams maccs = tversky_param_process(Fraction(1, 1), Fraction(1, 1), Fraction(4, 5));
  CHECK(maccs.a == 9);
  CHECK(maccs.b == 4);
  CHECK(maccs.c == 4);

  TverskyParams half = tversky_param_process(Fraction(1, 1), Fraction(1, 1), Fraction(1, 2));
  CHECK(half.a == 3);
  CHECK(half.b == 1);
  CHECK(half.c == 1);

  CHECK_THROWS_AS(tversky_param_process(Fraction(0, 1), Fraction(0, 1), Fraction(1, 1)), Error);
  CHECK_THROWS_AS(tversky_param_process(Fraction(1, 1), Fraction(1, 1), Fraction(0, 1)), Error);
  CHECK_THROWS_AS(tversky_param_process(Fraction(1, 1), Fraction(1, 1), Fraction(6, 5)), Error);

  TverskyParams jac = jaccard_params(Fraction(4, 5));
  CHECK(jac.a == 9);
  CHECK(jac.b == 4);
  CHECK(jac.c == 4);
}

TEST_CASE("fraction parsing") {
  CHECK(Fraction::parse("4/5") == Fraction(4, 5));
  CHECK(Fraction::parse("0.8") == Fraction(4, 5));
  CHECK(Fraction::parse("1") == Fraction(1, 1));
  CHECK(Fraction::parse("0.25") == Fraction(1, 4));
  CHECK_THROWS_AS(Fraction::parse("abc"), Error);
}

TEST_CASE("f_match containment") {
  ScalarRig rig(101);
  auto subset = make_statuses(rig, {2, 3}, {2, 3, 9});
  MatchingStatus gamma = f_match(*rig.backend, rig.keys.pk, subset, 0);
  CHECK(rig.dec(gamma.ct) == 0);
  CHECK(match_reveal(*rig.backend, rig.keys.sk, gamma));

  // empty client set matches vacuously
  MatchingStatus empty = f_match(*rig.backend, rig.keys.pk, {}, 0);
  CHECK(match_reveal(*rig.backend, rig.keys.sk, empty));
}

TEST_CASE("f_match with one missing element never matches") {
  ScalarRig rig(31);
  for (int i = 0; i < 600; ++i) {
    auto statuses = make_statuses(rig, {2, 3, 7}, {2, 3, 9});  // 7 missing
    MatchingStatus gamma = f_match(*rig.backend, rig.keys.pk, statuses, 0);
    CHECK(rig.dec(gamma.ct) != 0);
  }
}

TEST_CASE("f_match false-positive rate with two missing elements") {
  // Two unmatched statuses sum to zero with probability
  // z^[2] = 1/(q-1); never a false negative.
  ScalarRig rig(101);
  const int trials = 10000;
  uint64_t fps = 0;
  for (int i = 0; i < trials; ++i) {
    auto statuses = make_statuses(rig, {2, 7, 13}, {2, 3, 9});  // 7 and 13 missing
    MatchingStatus gamma = f_match(*rig.backend, rig.keys.pk, statuses, 0);
    fps += rig.dec(gamma.ct) == 0 ? 1 : 0;
  }
  double z = static_cast<double>(sum_distribution(2, rig.params.plaintext_modulus).zero_prob);
  CHECK(z == 1.0 / 100);
  CHECK(binomial_within(fps, trials, z, 4.0));
}

TEST_CASE("f_match small-domain adapter") {
  ScalarRig rig(101);
  Domain d(rig.scalars({0, 1, 2, 3, 4}));
  ServerSet y{rig.scalars({0, 2, 3}), 0};
  SUBCASE("contained") {
    ClientSet x(rig.scalars({0, 3}), 5);
    Query q = encode_sd_query(*rig.backend, rig.keys.pk, x, d);
    auto statuses = psi_sd_process(*rig.backend, rig.keys.pk, q, y, d);
    MatchingStatus gamma = f_match_sd(*rig.backend, rig.keys.pk, q, statuses, 0, rig.rng);
    CHECK(match_reveal(*rig.backend, rig.keys.sk, gamma));
  }
  SUBCASE("one missing never matches") {
    ClientSet x(rig.scalars({0, 1}), 5);
    Query q = encode_sd_query(*rig.backend, rig.keys.pk, x, d);
    for (int i = 0; i < 200; ++i) {
      auto statuses = psi_sd_process(*rig.backend, rig.keys.pk, q, y, d);
      MatchingStatus gamma = f_match_sd(*rig.backend, rig.keys.pk, q, statuses, 0, rig.rng);
      CHECK_FALSE(match_reveal(*rig.backend, rig.keys.sk, gamma));
    }
  }
}

TEST_CASE("th_match") {
  ScalarRig rig(31);
  auto ca_for = [&](std::vector<uint64_t> xv, std::vector<uint64_t> yv) {
    ClientSet x(rig.scalars(xv), 8);
    ServerSet y{rig.scalars(yv), 0};
    Query q = encode_query(*rig.backend, rig.keys.pk, x);
    return epsica_process(*rig.backend, rig.keys.pk, q, y, rig.rng);
  };

  Ciphertext ca2 = ca_for({1, 2, 3}, {2, 3, 9});  // intersection size 2
  CHECK(match_reveal(*rig.backend, rig.keys.sk,
                     th_match(*rig.backend, rig.keys.pk, ca2, 2, 3, 0, rig.rng)));
  for (int i = 0; i < 300; ++i) {
    MatchingStatus miss = th_match(*rig.backend, rig.keys.pk, ca2, 3, 3, 0, rig.rng);
    CHECK(rig.dec(miss.ct) != 0);
  }
  // t_min 0: every reachable cardinality is in range
  CHECK(match_reveal(*rig.backend, rig.keys.sk,
                     th_match(*rig.backend, rig.keys.pk, ca2, 0, 3, 0, rig.rng)));
  // empty threshold range: statically false
  MatchingStatus none = th_match(*rig.backend, rig.keys.pk, ca2, 5, 3, 0, rig.rng);
  CHECK_FALSE(match_reveal(*rig.backend, rig.keys.sk, none));
}

TEST_CASE("tv_match frozen MACCS-style example") {
  ScalarRig rig(786433);
  TverskyParams p = tversky_param_process(Fraction(1, 1), Fraction(1, 1), Fraction(4, 5));

  // |X| = 8, |Y| = 8, |∩| = 7: 9*7 - 32 - 32 = -1 < 0, below threshold
  MatchingStatus non = tv_match(*rig.backend, rig.keys.pk, rig.enc(7), 8, 8, p, 0, rig.rng);
  CHECK_FALSE(match_reveal(*rig.backend, rig.keys.sk, non));

  // |∩| = 8 reaches similarity 1
  MatchingStatus hit = tv_match(*rig.backend, rig.keys.pk, rig.enc(8), 8, 8, p, 0, rig.rng);
  CHECK(match_reveal(*rig.backend, rig.keys.sk, hit));
}

TEST_CASE("tv_match equals the exact rational oracle on random bit-vectors") {
  ScalarRig rig(786433);
  SeededRng rng(23);
  TverskyParams p = tversky_param_process(Fraction(1, 1), Fraction(1, 1), Fraction(4, 5));
  Fraction alpha(1, 1), beta(1, 1), t(4, 5);
  for (int trial = 0; trial < 500; ++trial) {
    auto xv = random_distinct(rng, 1 + rng.uniform_below(32), 32);
    auto yv = random_distinct(rng, 1 + rng.uniform_below(32), 32);
    uint64_t ca = oracle_ca(xv, yv);
    MatchingStatus gamma =
        tv_match(*rig.backend, rig.keys.pk, rig.enc(ca), xv.size(), yv.size(), p, 0, rig.rng);
    CHECK(match_reveal(*rig.backend, rig.keys.sk, gamma) ==
          oracle_tversky_at_least(xv, yv, alpha, beta, t));
  }
}

TEST_CASE("tv_match encrypted |X| variant agrees with the plaintext |X| variant") {
  ScalarRig rig(786433);
  SeededRng rng(29);
  TverskyParams p = tversky_param_process(Fraction(1, 1), Fraction(1, 1), Fraction(4, 5));
  for (int trial = 0; trial < 200; ++trial) {
    uint64_t nx = 1 + rng.uniform_below(16);
    uint64_t ny = 1 + rng.uniform_below(16);
    uint64_t ca = rng.uniform_below(std::min(nx, ny) + 1);
    MatchingStatus a = tv_match(*rig.backend, rig.keys.pk, rig.enc(ca), nx, ny, p, 0, rig.rng);
    MatchingStatus b = tv_match(*rig.backend, rig.keys.pk, rig.enc(ca), rig.enc(nx), nx, ny, p,
                                0, rig.rng);
    CHECK(match_reveal(*rig.backend, rig.keys.sk, a) ==
          match_reveal(*rig.backend, rig.keys.sk, b));
  }
}

TEST_CASE("tv_match is invariant under coefficient scaling") {
  ScalarRig rig(786433);
  SeededRng rng(31);
  TverskyParams base = TverskyParams::from_coefficients(9, 4, 4);
  TverskyParams scaled = TverskyParams::from_coefficients(27, 12, 12);
  for (int trial = 0; trial < 200; ++trial) {
    uint64_t nx = 1 + rng.uniform_below(12);
    uint64_t ny = 1 + rng.uniform_below(12);
    uint64_t ca = rng.uniform_below(std::min(nx, ny) + 1);
    MatchingStatus a = tv_match(*rig.backend, rig.keys.pk, rig.enc(ca), nx, ny, base, 0, rig.rng);
    MatchingStatus b =
        tv_match(*rig.backend, rig.keys.pk, rig.enc(ca), nx, ny, scaled, 0, rig.rng);
    CHECK(match_reveal(*rig.backend, rig.keys.sk, a) ==
          match_reveal(*rig.backend, rig.keys.sk, b));
  }
}

TEST_CASE("tversky guard rejects degenerate coefficient sets") {
  CHECK_THROWS_AS(TverskyParams::from_coefficients(0, 0, 0), Error);
  CHECK_THROWS_AS(TverskyParams::from_coefficients(2, 2, 1), Error);
  // ring too small for the affine range
  ScalarRig rig(31);
  TverskyParams p = tversky_param_process(Fraction(1, 1), Fraction(1, 1), Fraction(4, 5));
  CHECK_THROWS_AS(tv_match(*rig.backend, rig.keys.pk, rig.enc(3), 8, 16, p, 0, rig.rng), Error);
}

TEST_CASE("tv_match range test consumes logarithmic depth") {
  // |T| = 167 as in the 166-bit fingerprint configuration
  ScalarRig rig(786433, BackendKind::DepthTracked, 16);
  TverskyParams p = tversky_param_process(Fraction(1, 1), Fraction(1, 1), Fraction(4, 5));
  MatchingStatus gamma = tv_match(*rig.backend, rig.keys.pk, rig.enc(100), 166, 166, p, 0,
                                  rig.rng);
  CHECK(gamma.ct.depth_used == ceil_log2(167));
  CHECK(gamma.ct.depth_used == 8);
}

TEST_CASE("match_reveal popcount over shuffled statuses") {
  ScalarRig rig(101);
  std::vector<Ciphertext> statuses{rig.enc(0), rig.enc(5), rig.enc(0), rig.enc(9), rig.enc(0)};
  SeededRng rng(41);
  auto shuffled = shuffle_statuses(statuses, rng);
  size_t matches = 0;
  for (const auto& ct : shuffled) {
    matches += match_reveal(*rig.backend, rig.keys.sk, MatchingStatus{ct, 0}) ? 1 : 0;
  }
  CHECK(matches == 3);
}

TEST_CASE("layer isolation: match bits agree across PSI variants") {
  SeededRng rng(37);
  ScalarRig rig(1009);
  Domain d(rig.scalars([&] {
    std::vector<uint64_t> v(16);
    for (uint64_t i = 0; i < 16; ++i) v[i] = i;
    return v;
  }()));
  for (int trial = 0; trial < 200; ++trial) {
    auto xv = random_distinct(rng, 1 + rng.uniform_below(5), 16);
    auto yv = random_distinct(rng, 1 + rng.uniform_below(10), 16);
    ClientSet x(rig.scalars(xv), 16);
    ServerSet y{rig.scalars(yv), 0};
    Query qsi = encode_query(*rig.backend, rig.keys.pk, x);
    Query qsd = encode_sd_query(*rig.backend, rig.keys.pk, x, d);

    uint64_t t_min = 1 + rng.uniform_below(4);
    Ciphertext ca_si = epsica_process(*rig.backend, rig.keys.pk, qsi, y, rig.rng);
    Ciphertext ca_sd = epsica_sd_process(*rig.backend, rig.keys.pk, qsd, y, d);
    uint64_t t_max_si = std::min<uint64_t>(xv.size(), yv.size());
    uint64_t t_max_sd = std::min<uint64_t>(d.size(), yv.size());
    bool th_si = match_reveal(
        *rig.backend, rig.keys.sk,
        th_match(*rig.backend, rig.keys.pk, ca_si, t_min, t_max_si, 0, rig.rng));
    bool th_sd = match_reveal(
        *rig.backend, rig.keys.sk,
        th_match(*rig.backend, rig.keys.pk, ca_sd, t_min, t_max_sd, 0, rig.rng));
    CHECK(th_si == th_sd);
    CHECK(th_si == (oracle_ca(xv, yv) >= t_min));
  }
}
