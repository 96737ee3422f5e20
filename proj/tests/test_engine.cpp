#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <thread>

#include "helpers.hpp"
#include "pcm/engine.hpp"

using namespace pcm;
using namespace pcm_test;

namespace {

SessionConfig scalar_config(uint64_t q) {
  SessionConfig cfg;
  cfg.profile = "custom";
  cfg.custom_slots = 1;
  cfg.custom_modulus = q;
  cfg.custom_depth = 0;
  cfg.backend = BackendKind::ClearRing;
  return cfg;
}

Collection small_input_collection(const PrimeModulus& m,
                                  const std::vector<std::vector<uint64_t>>& sets) {
  Collection c;
  for (size_t i = 0; i < sets.size(); ++i) {
    std::vector<Scalar> elems;
    for (uint64_t v : sets[i]) elems.emplace_back(v, m);
    c.sets.push_back(ServerSet{std::move(elems), static_cast<int>(i)});
  }
  return c;
}

}  // namespace

TEST_CASE("replicated layout arithmetic") {
  // 8 elements with 2 powers and 512 duplicates exactly fill 8192 slots
  ReplicatedLayout full = ReplicatedLayout::for_small_input(8, 2, 512, 8192);
  CHECK(full.copy_width == 16);
  CHECK(static_cast<uint64_t>(full.copy_width) * 512 == 8192);
  CHECK_THROWS_AS(ReplicatedLayout::for_small_input(8, 2, 513, 8192), Error);
  CHECK_THROWS_AS(ReplicatedLayout::for_small_input(9, 2, 512, 8192), Error);
}

TEST_CASE("encode_replicated_query packs powers then duplicates") {
  HEParams params = HEParams::custom(8, 7, 4, false);
  auto backend = make_backend(BackendKind::ClearRing, params);
  SeededRng rng(1);
  KeyPair keys = backend->keygen(rng);

  std::vector<uint64_t> values{3};
  Query q = encode_replicated_query(*backend, keys.pk, values, 3, 2);
  auto slots = *backend->decrypt(keys.sk, q.ciphertexts.front());
  // 3^1 = 3, 3^2 = 2, 3^3 = 6 mod 7, duplicated once
  CHECK(slots == std::vector<uint64_t>{3, 2, 6, 3, 2, 6, 0, 0});

  Query plain = encode_replicated_query(*backend, keys.pk, values, 1, 1);
  auto plain_slots = *backend->decrypt(keys.sk, plain.ciphertexts.front());
  CHECK(plain_slots == std::vector<uint64_t>{3, 0, 0, 0, 0, 0, 0, 0});
}

TEST_CASE("pack_server_sets lane arithmetic") {
  EvalPlan plan = pack_server_sets(1000, 166, 32768);
  CHECK(plan.lane_width == 256);
  CHECK(plan.lanes_per_group == 128);
  CHECK(plan.groups.size() == 8);  // ceil(1000/128)

  EvalPlan plan2 = pack_server_sets(100, 256, 8192);
  CHECK(plan2.lanes_per_group == 32);

  EvalPlan single = pack_server_sets(1, 166, 32768);
  CHECK(single.groups.size() == 1);
  CHECK(single.groups[0].size() == 1);

  CHECK_THROWS_AS(pack_server_sets(10, 1 << 20, 8192), Error);
}

TEST_CASE("replication check accepts honest queries and catches tampering") {
  HEParams params = HEParams::custom(64, 101, 8, false);
  auto backend = make_backend(BackendKind::ClearRing, params);
  SeededRng rng(2);
  KeyPair keys = backend->keygen(rng);

  std::vector<uint64_t> values{3, 7};
  SeededRng check_rng(55);

  SUBCASE("honest") {
    Query q = encode_replicated_query(*backend, keys.pk, values, 4, 3);
    for (int i = 0; i < 20; ++i) {
      Ciphertext r = replication_check(*backend, keys.pk, q, check_rng);
      CHECK((*backend->decrypt(keys.sk, r))[0] == 0);
    }
  }

  SUBCASE("tampered duplicate") {
    Query q = encode_replicated_query(*backend, keys.pk, values, 4, 3);
    // corrupt one slot of the second copy
    ReplicatedLayout layout = ReplicatedLayout::for_small_input(2, 4, 3, 64);
    uint64_t caught = 0;
    const int trials = 300;
    for (int i = 0; i < trials; ++i) {
      std::vector<uint64_t> slots = *backend->decrypt(keys.sk, q.ciphertexts.front());
      slots[layout.slot(1, 0, 2)] = add_mod(slots[layout.slot(1, 0, 2)], 1, 101);
      Query bad = q;
      bad.ciphertexts[0] = backend->encrypt(keys.pk, slots);
      Ciphertext r = replication_check(*backend, keys.pk, bad, check_rng);
      caught += (*backend->decrypt(keys.sk, r))[0] != 0;
    }
    CHECK(binomial_within(caught, trials, 100.0 / 101, 5.0));
  }

  SUBCASE("broken power chain") {
    Query q = encode_replicated_query(*backend, keys.pk, values, 4, 3);
    ReplicatedLayout layout = ReplicatedLayout::for_small_input(2, 4, 3, 64);
    uint64_t caught = 0;
    const int trials = 300;
    for (int i = 0; i < trials; ++i) {
      std::vector<uint64_t> slots = *backend->decrypt(keys.sk, q.ciphertexts.front());
      // x^2 slot of element 1 no longer equals x * x
      for (uint32_t c = 0; c < 3; ++c) {
        slots[layout.slot(c, 1, 1)] = add_mod(slots[layout.slot(c, 1, 1)], 5, 101);
      }
      Query bad = q;
      bad.ciphertexts[0] = backend->encrypt(keys.pk, slots);
      Ciphertext r = replication_check(*backend, keys.pk, bad, check_rng);
      caught += (*backend->decrypt(keys.sk, r))[0] != 0;
    }
    CHECK(binomial_within(caught, trials, 100.0 / 101, 5.0));
  }
}

TEST_CASE("scalar engine end to end, in process") {
  SessionConfig cfg = scalar_config(101);
  cfg.psi_variant = QueryVariant::SmallInput;
  cfg.match = MatchKind::F;
  cfg.agg = AggSelect::X;
  cfg.validate();

  PrimeModulus m(101);
  Collection collection =
      small_input_collection(m, {{1, 2, 3}, {4, 5, 6}, {7, 8, 9, 10}, {2, 4, 8}});
  ServerEngine engine(cfg, collection);
  ClientSession session = make_client_session(cfg, 99);
  engine.set_client_key(session.keys.pk);

  std::vector<uint64_t> hit{4, 6};  // subset of set 1
  EngineResult r1 = engine.evaluate(build_query(session, hit));
  CHECK(reveal_response(session, r1.response).bit);

  std::vector<uint64_t> miss{4, 11};
  EngineResult r2 = engine.evaluate(build_query(session, miss));
  CHECK_FALSE(reveal_response(session, r2.response).bit);
}

TEST_CASE("loopback protocol run over TCP") {
  SessionConfig cfg = scalar_config(101);
  cfg.psi_variant = QueryVariant::SmallInput;
  cfg.match = MatchKind::F;
  cfg.agg = AggSelect::X;
  cfg.validate();
  PrimeModulus m(101);
  Collection collection = small_input_collection(m, {{1, 2}, {3, 4, 5}, {6, 7}});

  TcpListener listener("127.0.0.1", 0);
  std::exception_ptr server_error;
  std::thread server([&] {
    try {
      serve(listener, cfg, collection, nullptr, 1);
    } catch (...) {
      server_error = std::current_exception();
    }
  });

  ClientSession session = make_client_session(cfg, 7);
  std::vector<uint64_t> values{3, 5};
  QueryOutcome outcome = run_client_query("127.0.0.1", listener.port(), session, values);
  server.join();
  REQUIRE_FALSE(server_error);

  CHECK(outcome.result.bit);
  // single-round property: one Query sent, one Response received
  CHECK(outcome.sent == std::vector<wire::MsgType>{wire::MsgType::Hello, wire::MsgType::Setup,
                                                   wire::MsgType::Query});
  CHECK(outcome.received == std::vector<wire::MsgType>{wire::MsgType::Response});
}

TEST_CASE("query before setup draws a protocol error") {
  SessionConfig cfg = scalar_config(101);
  cfg.validate();
  PrimeModulus m(101);
  Collection collection = small_input_collection(m, {{1, 2}});

  TcpListener listener("127.0.0.1", 0);
  std::thread server([&] {
    try {
      serve(listener, cfg, collection, nullptr, 1);
    } catch (...) {
    }
  });

  TcpStream stream = TcpStream::connect("127.0.0.1", listener.port());
  stream.send_message({wire::MsgType::Hello, {}});
  wire::QueryBody body;
  body.variant = 0;
  body.declared_size = 0;
  stream.send_message({wire::MsgType::Query, body.encode()});
  wire::WireMessage reply = stream.recv_message();
  server.join();
  REQUIRE(reply.type == wire::MsgType::Error);
  wire::ErrorBody err = wire::ErrorBody::decode(reply.body);
  CHECK(err.text == "setup-required");
}

TEST_CASE("parallel evaluation is deterministic across thread counts") {
  PrimeModulus m(1009);
  SeededRng data_rng(5);
  std::vector<std::vector<uint64_t>> sets;
  for (int i = 0; i < 24; ++i) sets.push_back(random_distinct(data_rng, 6, 1009));
  Collection collection = small_input_collection(m, sets);

  auto run = [&](uint32_t threads) {
    SessionConfig cfg = scalar_config(1009);
    cfg.psi_variant = QueryVariant::SmallInput;
    cfg.match = MatchKind::F;
    cfg.agg = AggSelect::Ca;
    cfg.ca_mode = CaMode::Shuffle;
    cfg.threads = threads;
    cfg.seed = 42;
    cfg.validate();
    ServerEngine engine(cfg, collection);
    ClientSession session = make_client_session(cfg, 11);
    engine.set_client_key(session.keys.pk);
    EngineResult r = engine.evaluate(build_query(session, std::vector<uint64_t>{5, 17, 400}));
    return r.response.encode();
  };

  CHECK(run(1) == run(8));
}

namespace {

SessionConfig batched_sd_config(uint64_t q, uint32_t slots, uint32_t width, MatchKind match,
                                AggSelect agg) {
  SessionConfig cfg;
  cfg.profile = "custom";
  cfg.custom_slots = slots;
  cfg.custom_modulus = q;
  cfg.custom_depth = 0;
  cfg.custom_batching = false;
  cfg.backend = BackendKind::ClearRing;
  cfg.batched = true;
  cfg.psi_variant = QueryVariant::SmallDomain;
  cfg.domain_width = width;
  cfg.match = match;
  cfg.agg = agg;
  cfg.duplicates = slots / next_pow2(width);
  cfg.validate();
  return cfg;
}

Collection sd_collection(const PrimeModulus& m, uint32_t width,
                         const std::vector<std::vector<uint64_t>>& sets) {
  Collection c = small_input_collection(m, sets);
  std::vector<Scalar> domain;
  for (uint32_t d = 0; d < width; ++d) domain.emplace_back(d, m);
  c.domain = Domain(std::move(domain));
  return c;
}

RevealedAggregate run_engine(const SessionConfig& cfg, const Collection& collection,
                             const std::vector<uint64_t>& values, uint64_t key_seed) {
  ServerEngine engine(cfg, collection);
  ClientSession session = make_client_session(cfg, key_seed);
  engine.set_client_key(session.keys.pk);
  EngineResult r = engine.evaluate(build_query(session, values));
  return reveal_response(session, r.response);
}

}  // namespace

TEST_CASE("batched small-domain pipeline agrees with the scalar pipeline") {
  SeededRng data_rng(77);
  const uint32_t width = 16;
  const uint64_t q = 786433;
  PrimeModulus m(q);

  for (int trial = 0; trial < 34; ++trial) {
    size_t n_sets = 1 + data_rng.uniform_below(12);
    std::vector<std::vector<uint64_t>> sets;
    for (size_t i = 0; i < n_sets; ++i) {
      sets.push_back(random_distinct(data_rng, 1 + data_rng.uniform_below(width), width));
    }
    Collection collection = sd_collection(m, width, sets);
    std::vector<uint64_t> xv = random_distinct(data_rng, 1 + data_rng.uniform_below(8), width);

    for (MatchKind match : {MatchKind::F, MatchKind::Th, MatchKind::Tv}) {
      for (AggSelect agg : {AggSelect::X, AggSelect::Ca}) {
        SessionConfig batched = batched_sd_config(q, 64, width, match, agg);
        batched.seed = 100 + trial;
        SessionConfig scalar = scalar_config(q);
        scalar.psi_variant = QueryVariant::SmallDomain;
        scalar.domain_width = width;
        scalar.match = match;
        scalar.agg = agg;
        scalar.seed = 100 + trial;
        scalar.validate();

        RevealedAggregate a = run_engine(batched, collection, xv, 9);
        RevealedAggregate b = run_engine(scalar, collection, xv, 9);
        if (agg == AggSelect::X) {
          CHECK(a.bit == b.bit);
        } else {
          CHECK(a.count == b.count);
        }
      }
    }
  }
}

TEST_CASE("batched threshold with an unreachable minimum never matches") {
  const uint32_t width = 16;
  const uint64_t q = 786433;
  PrimeModulus m(q);
  SeededRng data_rng(6);
  std::vector<std::vector<uint64_t>> sets;
  for (int i = 0; i < 5; ++i) sets.push_back(random_distinct(data_rng, 4, width));
  Collection collection = sd_collection(m, width, sets);

  SessionConfig cfg = batched_sd_config(q, 64, width, MatchKind::Th, AggSelect::Ca);
  cfg.th_min = 1000;  // above every possible intersection size
  cfg.validate();
  RevealedAggregate out = run_engine(cfg, collection, {0, 1, 2}, 4);
  CHECK(out.count == 0);
}

TEST_CASE("batched chunked existential emits ceil(N / 2^l) chunk bits") {
  const uint32_t width = 16;  // lane 16, 4 lanes per 64-slot group
  const uint64_t q = 786433;
  PrimeModulus m(q);
  SeededRng data_rng(5);
  std::vector<std::vector<uint64_t>> sets;
  for (int i = 0; i < 11; ++i) sets.push_back(random_distinct(data_rng, 4, width));
  Collection collection = sd_collection(m, width, sets);

  SessionConfig cfg = batched_sd_config(q, 64, width, MatchKind::F, AggSelect::X);
  cfg.chunk_level = 1;  // chunks of 2 sets
  cfg.validate();
  RevealedAggregate out = run_engine(cfg, collection, {0, 1}, 3);
  CHECK(out.chunk_bits.size() == 6);  // ceil(11 / 2)
}

TEST_CASE("batched small-input pipeline agrees with the scalar pipeline") {
  SeededRng data_rng(31);
  const uint64_t q = 163841;
  PrimeModulus m(q);

  for (int trial = 0; trial < 50; ++trial) {
    size_t n_sets = 1 + data_rng.uniform_below(10);
    std::vector<std::vector<uint64_t>> sets;
    for (size_t i = 0; i < n_sets; ++i) {
      sets.push_back(random_distinct(data_rng, 3 + data_rng.uniform_below(6), q));
    }
    Collection collection = small_input_collection(m, sets);
    size_t pick = data_rng.uniform_below(n_sets);
    bool plant = data_rng.uniform_below(2) == 0;
    std::vector<uint64_t> xv;
    if (plant) {
      xv.assign(sets[pick].begin(), sets[pick].begin() + std::min<size_t>(2, sets[pick].size()));
    } else {
      xv = random_distinct(data_rng, 2, q);
    }

    SessionConfig batched;
    batched.profile = "custom";
    batched.custom_slots = 64;
    batched.custom_modulus = q;
    batched.backend = BackendKind::ClearRing;
    batched.batched = true;
    batched.psi_variant = QueryVariant::SmallInput;
    batched.match = MatchKind::F;
    batched.agg = AggSelect::X;
    batched.powers = 4;  // supports polynomial degrees up to 8 with one pairing
    batched.duplicates = 2;
    batched.seed = 500 + trial;
    batched.validate();

    SessionConfig scalar = scalar_config(q);
    scalar.match = MatchKind::F;
    scalar.agg = AggSelect::X;
    scalar.seed = 500 + trial;
    scalar.validate();

    RevealedAggregate a = run_engine(batched, collection, xv, 13);
    RevealedAggregate b = run_engine(scalar, collection, xv, 13);
    CHECK(a.bit == b.bit);
  }
}

TEST_CASE("batched small-input statuses consume exactly one ct-ct depth") {
  // Power replication with p = half the polynomial degree: the only ct-ct
  // multiplication pairs supplied powers.
  const uint64_t q = 163841;
  PrimeModulus m(q);
  SeededRng data_rng(3);
  std::vector<std::vector<uint64_t>> sets{random_distinct(data_rng, 8, q),
                                          random_distinct(data_rng, 8, q)};
  Collection collection = small_input_collection(m, sets);

  SessionConfig cfg;
  cfg.profile = "custom";
  cfg.custom_slots = 64;
  cfg.custom_modulus = q;
  cfg.custom_depth = 7;
  cfg.backend = BackendKind::DepthTracked;
  cfg.batched = true;
  cfg.psi_variant = QueryVariant::SmallInput;
  cfg.match = MatchKind::F;
  cfg.agg = AggSelect::Na;
  cfg.powers = 4;  // degree 8 polynomial: one pairing level
  cfg.duplicates = 1;
  cfg.validate();

  ServerEngine engine(cfg, collection);
  ClientSession session = make_client_session(cfg, 21);
  engine.set_client_key(session.keys.pk);
  std::vector<uint64_t> xv{5, 6};
  EngineResult r = engine.evaluate(build_query(session, xv));
  for (const auto& blob : r.response.ciphertexts) {
    Ciphertext ct = deserialize_ciphertext(blob, session.params, session.keys.pk.token,
                                           Freshness::Evaluated);
    CHECK(ct.depth_used == 1);
  }
}

TEST_CASE("full existential response bytes are independent of the set count") {
  PrimeModulus m(101);
  SeededRng data_rng(9);
  std::vector<size_t> sizes;
  for (size_t n = 1; n <= 64; n *= 2) sizes.push_back(n);
  std::set<size_t> observed;
  for (size_t n : sizes) {
    std::vector<std::vector<uint64_t>> sets;
    for (size_t i = 0; i < n; ++i) sets.push_back(random_distinct(data_rng, 4, 101));
    Collection collection = small_input_collection(m, sets);
    SessionConfig cfg = scalar_config(101);
    cfg.match = MatchKind::F;
    cfg.agg = AggSelect::X;
    cfg.validate();
    ServerEngine engine(cfg, collection);
    ClientSession session = make_client_session(cfg, 3);
    engine.set_client_key(session.keys.pk);
    EngineResult r = engine.evaluate(build_query(session, std::vector<uint64_t>{1, 2}));
    observed.insert(r.response.encode().size());
  }
  CHECK(observed.size() == 1);
}

TEST_CASE("additive mal-check leaves honest clients untouched and scrambles duplicates") {
  PrimeModulus m(101);
  Collection collection = small_input_collection(m, {{1, 2, 9}, {3, 4, 9}, {9, 11, 12}});
  SessionConfig cfg = scalar_config(101);
  cfg.match = MatchKind::F;
  cfg.agg = AggSelect::Ca;
  cfg.ca_mode = CaMode::IsZero;
  cfg.mal_check = MalCheckMode::Additive;
  cfg.validate();

  ServerEngine engine(cfg, collection);
  ClientSession session = make_client_session(cfg, 31);
  engine.set_client_key(session.keys.pk);

  // honest query: true count of sets containing {9}
  for (int i = 0; i < 20; ++i) {
    EngineResult r = engine.evaluate(build_query(session, std::vector<uint64_t>{9}));
    CHECK(reveal_response(session, r.response).count == 3);
  }

  // duplicate elements: revealed value is scrambled almost always
  size_t hits = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    EngineResult r = engine.evaluate(build_query(session, std::vector<uint64_t>{9, 9}));
    hits += reveal_response(session, r.response).count == 3 ? 1 : 0;
  }
  CHECK(hits < 20);  // chance level is 1/101
}

TEST_CASE("multiplicative mal-check round trips through the client undo") {
  PrimeModulus m(101);
  Collection collection = small_input_collection(m, {{1, 2, 9}, {3, 4, 9}, {9, 11, 12}});
  SessionConfig cfg = scalar_config(101);
  cfg.match = MatchKind::F;
  cfg.agg = AggSelect::Ca;
  cfg.ca_mode = CaMode::IsZero;
  cfg.mal_check = MalCheckMode::Multiplicative;
  cfg.validate();

  ServerEngine engine(cfg, collection);
  ClientSession session = make_client_session(cfg, 32);
  engine.set_client_key(session.keys.pk);

  EngineResult r = engine.evaluate(build_query(session, std::vector<uint64_t>{9, 2}));
  CHECK(reveal_response(session, r.response).count == 1);  // only {1,2,9} holds both

  // existential reveals need no undo: T != 0 preserves the zero pattern
  cfg.agg = AggSelect::X;
  cfg.validate();
  ServerEngine engine2(cfg, collection);
  ClientSession session2 = make_client_session(cfg, 33);
  engine2.set_client_key(session2.keys.pk);
  EngineResult r2 = engine2.evaluate(build_query(session2, std::vector<uint64_t>{9, 2}));
  CHECK(reveal_response(session2, r2.response).bit);

  // a duplicate query zeroes its own pairwise product; the undo reports it
  EngineResult r3 = engine.evaluate(build_query(session, std::vector<uint64_t>{9, 9}));
  CHECK_THROWS_AS(reveal_response(session, r3.response), Error);
}

TEST_CASE("audit log records one line per query") {
  PrimeModulus m(101);
  Collection collection = small_input_collection(m, {{1, 2}, {3, 4}});
  SessionConfig cfg = scalar_config(101);
  cfg.match = MatchKind::F;
  cfg.agg = AggSelect::X;
  cfg.validate();

  std::string path = "audit_test.jsonl";
  std::remove(path.c_str());
  {
    TcpListener listener("127.0.0.1", 0);
    AuditLog audit(path);
    std::thread server([&] { serve(listener, cfg, collection, &audit, 2); });
    ClientSession session = make_client_session(cfg, 4);
    run_client_query("127.0.0.1", listener.port(), session, std::vector<uint64_t>{1});
    run_client_query("127.0.0.1", listener.port(), session, std::vector<uint64_t>{9});
    server.join();
  }
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  size_t lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    CHECK(line.find("\"counters\"") != std::string::npos);
    CHECK(line.find("\"config_digest\"") != std::string::npos);
  }
  CHECK(lines == 2);
  std::remove(path.c_str());
}
