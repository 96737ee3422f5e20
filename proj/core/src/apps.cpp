#include "pcm/apps.hpp"

#include <sodium.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace pcm {

namespace {

std::vector<uint8_t> parse_bits(const std::string& field, uint32_t width, size_t line_no) {
  std::vector<uint8_t> bits(width, 0);
  if (field.rfind("0x", 0) == 0 || field.rfind("0X", 0) == 0) {
    std::string digits = field.substr(2);
    if (digits.empty()) raise(ErrorCode::ParseError, "empty hex field on line " + std::to_string(line_no));
    for (size_t d = 0; d < digits.size(); ++d) {
      char ch = digits[digits.size() - 1 - d];
      int v;
      if (ch >= '0' && ch <= '9') v = ch - '0';
      else if (ch >= 'a' && ch <= 'f') v = ch - 'a' + 10;
      else if (ch >= 'A' && ch <= 'F') v = ch - 'A' + 10;
      else raise(ErrorCode::ParseError, "bad hex digit on line " + std::to_string(line_no));
      for (int b = 0; b < 4; ++b) {
        if ((v >> b & 1) == 0) continue;
        size_t bit = d * 4 + static_cast<size_t>(b);
        if (bit >= width) {
          raise(ErrorCode::WidthMismatch, "bit " + std::to_string(bit) + " outside width " +
                                              std::to_string(width) + " on line " +
                                              std::to_string(line_no));
        }
        bits[bit] = 1;
      }
    }
    return bits;
  }
  if (field.size() != width) {
    raise(ErrorCode::WidthMismatch, "expected " + std::to_string(width) + " binary digits, got " +
                                        std::to_string(field.size()) + " on line " +
                                        std::to_string(line_no));
  }
  for (size_t pos = 0; pos < field.size(); ++pos) {
    char ch = field[pos];
    if (ch != '0' && ch != '1') {
      raise(ErrorCode::ParseError, "bad binary digit on line " + std::to_string(line_no));
    }
    if (ch == '1') bits[width - 1 - pos] = 1;
  }
  return bits;
}

struct LoopbackServer {
  TcpListener listener{"127.0.0.1", 0};
  std::thread thread;
  std::exception_ptr failure;

  LoopbackServer(const SessionConfig& cfg, const Collection& collection) {
    thread = std::thread([this, &cfg, &collection] {
      try {
        serve(listener, cfg, collection, nullptr, 1);
      } catch (...) {
        failure = std::current_exception();
      }
    });
  }

  ~LoopbackServer() {
    if (thread.joinable()) thread.join();
  }

  void join() {
    thread.join();
    if (failure) std::rethrow_exception(failure);
  }
};

SearchResult run_loopback(const SessionConfig& cfg, const Collection& collection,
                          std::span<const uint64_t> values) {
  LoopbackServer server(cfg, collection);
  ClientSession session = make_client_session(cfg, cfg.seed + 0x517cc1b727220a95ull);
  QueryOutcome outcome = run_client_query("127.0.0.1", server.listener.port(), session, values);
  server.join();
  return SearchResult{outcome.result, std::move(outcome)};
}

}  // namespace

size_t Fingerprint::popcount() const {
  size_t n = 0;
  for (uint8_t b : bits) n += b;
  return n;
}

std::vector<Fingerprint> ingest_fingerprints(const std::string& path, uint32_t width) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open fingerprint file: " + path);
  std::vector<Fingerprint> fps;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      raise(ErrorCode::ParseError, "expected <id>\\t<bits> on line " + std::to_string(line_no));
    }
    Fingerprint fp;
    fp.id = line.substr(0, tab);
    fp.bits = parse_bits(line.substr(tab + 1), width, line_no);
    fps.push_back(std::move(fp));
  }
  return fps;
}

void write_fingerprints(const std::string& path, const std::vector<Fingerprint>& fps) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write fingerprint file: " + path);
  for (const Fingerprint& fp : fps) {
    out << fp.id << '\t';
    for (size_t pos = fp.bits.size(); pos > 0; --pos) out << (fp.bits[pos - 1] ? '1' : '0');
    out << '\n';
  }
}

std::vector<Fingerprint> synthetic_fingerprints(size_t count, uint32_t width, double density,
                                                SeededRng& rng) {
  std::vector<Fingerprint> fps;
  fps.reserve(count);
  const uint64_t threshold = static_cast<uint64_t>(density * double(1ull << 32));
  for (size_t i = 0; i < count; ++i) {
    Fingerprint fp;
    fp.id = "fp" + std::to_string(i);
    fp.bits.assign(width, 0);
    size_t ones = 0;
    while (ones == 0) {
      for (uint32_t b = 0; b < width; ++b) {
        fp.bits[b] = (rng.next_u64() & 0xffffffffull) < threshold ? 1 : 0;
        ones += fp.bits[b];
      }
    }
    fps.push_back(std::move(fp));
  }
  return fps;
}

std::vector<uint64_t> fingerprint_positions(const Fingerprint& fp) {
  std::vector<uint64_t> out;
  for (size_t b = 0; b < fp.bits.size(); ++b) {
    if (fp.bits[b]) out.push_back(b);
  }
  return out;
}

Collection fingerprint_collection(const std::vector<Fingerprint>& fps, uint32_t width,
                                  const PrimeModulus& m) {
  Collection collection;
  std::vector<Scalar> domain;
  domain.reserve(width);
  for (uint32_t d = 0; d < width; ++d) domain.emplace_back(d, m);
  collection.domain = Domain(std::move(domain));
  for (size_t i = 0; i < fps.size(); ++i) {
    if (fps[i].bits.size() != width) raise(ErrorCode::WidthMismatch, "fingerprint " + fps[i].id);
    std::vector<Scalar> elems;
    for (uint64_t pos : fingerprint_positions(fps[i])) elems.emplace_back(pos, m);
    if (elems.empty()) {
      raise(ErrorCode::InvalidParams, "empty fingerprint rejected: " + fps[i].id);
    }
    collection.sets.push_back(ServerSet{std::move(elems), static_cast<int>(i)});
  }
  return collection;
}

uint64_t hash_keyword(const std::string& word, uint32_t hash_index, const KeywordEncoding& enc) {
  if (enc.modulus == 0) raise(ErrorCode::InvalidParams, "keyword encoding needs a modulus");
  uint8_t key[32];
  uint8_t seed_bytes[12];
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<uint8_t>(enc.seed >> (8 * i));
  for (int i = 0; i < 4; ++i) seed_bytes[8 + i] = static_cast<uint8_t>(hash_index >> (8 * i));
  crypto_generichash(key, sizeof(key), seed_bytes, sizeof(seed_bytes), nullptr, 0);
  uint8_t digest[16];
  crypto_generichash(digest, sizeof(digest), reinterpret_cast<const uint8_t*>(word.data()),
                     word.size(), key, sizeof(key));
  // Fold the 128-bit digest into Z_q.
  unsigned __int128 acc = 0;
  for (int i = 15; i >= 0; --i) acc = (acc << 8) | digest[i];
  return static_cast<uint64_t>(acc % enc.modulus);
}

std::vector<LabeledScalar> hash_keywords(const std::vector<std::string>& words,
                                         const KeywordEncoding& enc) {
  std::vector<LabeledScalar> out;
  out.reserve(words.size() * enc.hash_count);
  for (uint32_t w = 0; w < words.size(); ++w) {
    for (uint32_t h = 0; h < enc.hash_count; ++h) {
      out.push_back(LabeledScalar{w, h, hash_keyword(words[w], h, enc)});
    }
  }
  return out;
}

std::vector<DocumentRecord> ingest_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open corpus file: " + path);
  std::vector<DocumentRecord> docs;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorCode::ParseError,
            "bad corpus record on line " + std::to_string(line_no) + ": " + e.what());
    }
    DocumentRecord doc;
    if (!j.contains("id") || !j.contains("keywords") || !j["keywords"].is_array()) {
      raise(ErrorCode::ParseError, "corpus record needs id and keywords on line " +
                                       std::to_string(line_no));
    }
    doc.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    for (const auto& kw : j["keywords"]) doc.keywords.push_back(kw.get<std::string>());
    if (doc.keywords.empty()) {
      raise(ErrorCode::ParseError, "document without keywords on line " + std::to_string(line_no));
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

void write_corpus(const std::string& path, const std::vector<DocumentRecord>& docs) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write corpus file: " + path);
  for (const DocumentRecord& doc : docs) {
    nlohmann::json j{{"id", doc.id}, {"keywords", doc.keywords}};
    out << j.dump() << '\n';
  }
}

std::vector<DocumentRecord> synthetic_corpus(size_t count, uint32_t keywords_per_doc,
                                             size_t vocabulary, SeededRng& rng) {
  if (vocabulary < keywords_per_doc) {
    raise(ErrorCode::InvalidParams, "vocabulary smaller than document size");
  }
  std::vector<DocumentRecord> docs;
  docs.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    DocumentRecord doc;
    doc.id = "doc" + std::to_string(i);
    std::unordered_set<uint64_t> chosen;
    while (chosen.size() < keywords_per_doc) chosen.insert(rng.uniform_below(vocabulary));
    for (uint64_t kw : chosen) doc.keywords.push_back("kw" + std::to_string(kw));
    docs.push_back(std::move(doc));
  }
  return docs;
}

Collection document_collection(const std::vector<DocumentRecord>& docs,
                               const KeywordEncoding& enc, uint32_t max_keywords) {
  Collection collection;
  PrimeModulus m(enc.modulus);
  collection.hashed.resize(docs.size());
  for (size_t k = 0; k < docs.size(); ++k) {
    const DocumentRecord& doc = docs[k];
    if (doc.keywords.empty()) raise(ErrorCode::InvalidParams, "document without keywords: " + doc.id);
    if (doc.keywords.size() > max_keywords) {
      raise(ErrorCode::InvalidParams, "document exceeds the keyword cap: " + doc.id);
    }
    auto& per_hash = collection.hashed[k];
    per_hash.resize(enc.hash_count);
    std::vector<Scalar> all;
    std::unordered_set<uint64_t> seen;
    for (uint32_t h = 0; h < enc.hash_count; ++h) {
      for (const std::string& word : doc.keywords) {
        uint64_t v = hash_keyword(word, h, enc);
        per_hash[h].push_back(v);
        if (seen.insert(v).second) all.emplace_back(v, m);
      }
    }
    collection.sets.push_back(ServerSet{std::move(all), static_cast<int>(k)});
  }
  return collection;
}

SessionConfig chem_config(AggSelect agg, const std::string& profile, BackendKind backend,
                          uint32_t width) {
  SessionConfig cfg;
  cfg.profile = profile;
  cfg.backend = backend;
  cfg.batched = true;
  cfg.psi_variant = QueryVariant::SmallDomain;
  cfg.domain_width = width;
  cfg.match = MatchKind::Tv;
  cfg.tv_alpha = Fraction(1, 1);
  cfg.tv_beta = Fraction(1, 1);
  cfg.tv_t = Fraction(4, 5);
  cfg.agg = agg;
  if (agg == AggSelect::X) cfg.chunk_level = 6;
  cfg.ca_mode = CaMode::Shuffle;
  cfg.mal_check = MalCheckMode::Off;
  cfg.replication_check = true;
  HEParams params = cfg.he_params();
  cfg.duplicates = params.slot_count / next_pow2(width);
  cfg.validate();
  return cfg;
}

SessionConfig doc_config(AggSelect agg, const std::string& profile, BackendKind backend,
                         uint32_t hash_count, uint32_t repetitions) {
  SessionConfig cfg;
  cfg.profile = profile;
  cfg.backend = backend;
  cfg.batched = true;
  cfg.psi_variant = QueryVariant::SmallInput;
  cfg.match = MatchKind::F;
  cfg.agg = agg;
  cfg.ca_mode = CaMode::Shuffle;
  cfg.mal_check = MalCheckMode::Off;  // repeated keywords do not affect containment
  cfg.replication_check = true;
  cfg.hash_count = hash_count;
  cfg.repetitions = repetitions;
  cfg.powers = 64;  // half the keyword cap: one pairing multiplication of depth 1
  cfg.duplicates = repetitions;
  cfg.max_keywords = 128;
  cfg.validate();
  return cfg;
}

SearchResult chem_search(const Fingerprint& query, const std::vector<Fingerprint>& collection,
                         const SessionConfig& cfg) {
  HEParams params = cfg.he_params();
  Collection server = fingerprint_collection(collection, cfg.domain_width,
                                             params.plaintext_modulus);
  std::vector<uint64_t> values = fingerprint_positions(query);
  return run_loopback(cfg, server, values);
}

SearchResult doc_search(const std::vector<std::string>& keywords,
                        const std::vector<DocumentRecord>& corpus, const SessionConfig& cfg) {
  HEParams params = cfg.he_params();
  KeywordEncoding enc{cfg.hash_count, cfg.hash_seed, params.q()};
  Collection server = document_collection(corpus, enc, cfg.max_keywords);
  std::vector<uint64_t> values;
  for (const LabeledScalar& s : hash_keywords(keywords, enc)) values.push_back(s.value);
  return run_loopback(cfg, server, values);
}

double doc_mapping_fp_bits(uint64_t q, uint32_t hash_count) {
  return hash_count * std::log2(static_cast<double>(q));
}

std::string bench_csv(const std::string& scenario, const std::vector<size_t>& sweep,
                      uint64_t seed) {
  std::ostringstream out;
  out << "# counters measured on the clear-ring backend in scalar mode; expected values follow\n";
  out << "# the per-layer operation formulas. map_fp_bits = hash_count * log2(m_pt), inferred\n";
  out << "# from the plaintext modulus of the named profile.\n";
  out << "scenario,n,q,ct_add,ct_mul,pt_mul,rotations,exponentiations,"
         "expected_add,expected_mul,counters_ok,query_bytes,response_bytes,wall_ms,"
         "map_fp_bits_p8k,map_fp_bits_p32k\n";

  SeededRng rng(seed);
  for (size_t n : sweep) {
    SessionConfig cfg;
    cfg.backend = BackendKind::ClearRing;
    cfg.batched = false;
    cfg.profile = "custom";
    cfg.custom_slots = 1;
    cfg.custom_depth = 0;
    cfg.custom_batching = false;

    Collection collection;
    std::vector<uint64_t> values;
    uint64_t expected_add = 0;
    uint64_t expected_mul = 0;

    if (scenario == "chem") {
      cfg.custom_modulus = 786433;  // P32k plaintext modulus
      cfg.psi_variant = QueryVariant::SmallDomain;
      cfg.domain_width = 32;
      cfg.match = MatchKind::Tv;
      cfg.tv_t = Fraction(4, 5);
      cfg.agg = AggSelect::X;
      SeededRng data_rng = rng.fork(n);
      auto fps = synthetic_fingerprints(n + 1, cfg.domain_width, 0.4, data_rng);
      Fingerprint query = fps.back();
      fps.pop_back();
      collection = fingerprint_collection(fps, cfg.domain_width,
                                          PrimeModulus(cfg.custom_modulus));
      values = fingerprint_positions(query);
      // Per set: |D| plaintext mults (PSI-SD), |D| adds (ePSI-CA-SD), |D|+1
      // adds for the encrypted |X|, 2+2 affine ops, |T| adds and mults for
      // the range test; the aggregation adds one mult per set.
      TverskyParams tv = tversky_param_process(cfg.tv_alpha, cfg.tv_beta, cfg.tv_t);
      for (const ServerSet& y : collection.sets) {
        uint64_t span = (tv.a - tv.b - tv.c) * y.elements.size();
        expected_add += cfg.domain_width + cfg.domain_width + 2 + (span + 1);
        expected_mul += cfg.domain_width + 2 + (span + 1);
      }
      expected_mul += n;
    } else if (scenario == "doc") {
      cfg.custom_modulus = 4079617;  // P8k plaintext modulus
      cfg.psi_variant = QueryVariant::SmallInput;
      cfg.match = MatchKind::F;
      cfg.agg = AggSelect::X;
      cfg.hash_count = 2;
      SeededRng data_rng = rng.fork(n);
      auto docs = synthetic_corpus(n, 16, 4096, data_rng);
      KeywordEncoding enc{cfg.hash_count, cfg.hash_seed, cfg.custom_modulus};
      collection = document_collection(docs, enc, cfg.max_keywords);
      std::vector<std::string> keywords;
      for (int i = 0; i < 4; ++i) keywords.push_back("kw" + std::to_string(i));
      for (const LabeledScalar& s : hash_keywords(keywords, enc)) values.push_back(s.value);
      // Per doc: n_q scalars, each an inclusion test over its labeled subset
      // (|Y| adds and |Y| mults), then n_q adds for containment; aggregation
      // adds one mult per doc.
      for (const auto& per_hash : collection.hashed) {
        for (size_t i = 0; i < values.size(); ++i) {
          expected_add += per_hash[i % per_hash.size()].size();
          expected_mul += per_hash[i % per_hash.size()].size();
        }
        expected_add += values.size();
      }
      expected_mul += n;
    } else {
      raise(ErrorCode::ConfigError, "unknown bench scenario: " + scenario);
    }

    ServerEngine engine(cfg, collection);
    ClientSession session = make_client_session(cfg, seed + n);
    engine.set_client_key(session.keys.pk);
    wire::QueryBody query = build_query(session, values);
    EngineResult result = engine.evaluate(query);
    (void)reveal_response(session, result.response);

    bool ok = result.cost.ct_add == expected_add && result.cost.ct_mul == expected_mul;
    out << scenario << ',' << n << ',' << cfg.custom_modulus << ',' << result.cost.ct_add << ','
        << result.cost.ct_mul << ',' << result.cost.pt_mul << ',' << result.cost.rotations << ','
        << result.cost.exponentiations << ',' << expected_add << ',' << expected_mul << ','
        << (ok ? "yes" : "no") << ',' << query.encode().size() + 9 << ','
        << result.response.encode().size() + 9 << ',' << result.wall_ms << ',';
    if (scenario == "doc") {
      out << doc_mapping_fp_bits(4079617, cfg.hash_count) << ','
          << doc_mapping_fp_bits(786433, cfg.hash_count);
    } else {
      out << ',';
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace pcm
