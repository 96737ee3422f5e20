#include "pcm/config.hpp"

#include <sodium.h>

#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pcm {

namespace {

using FlatMap = std::map<std::string, std::string>;

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

FlatMap parse_ini(const std::string& text) {
  FlatMap out;
  std::istringstream in(text);
  std::string line, section;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos) raise(ErrorCode::ConfigError, "expected key = value: " + line);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) raise(ErrorCode::ConfigError, "empty key");
    out[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

FlatMap parse_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ConfigError, std::string("bad json config: ") + e.what());
  }
  if (!j.is_object()) raise(ErrorCode::ConfigError, "json config must be an object");
  FlatMap out;
  for (auto& [section, body] : j.items()) {
    if (body.is_object()) {
      for (auto& [key, value] : body.items()) {
        std::string v = value.is_string() ? value.get<std::string>() : value.dump();
        out[section + "." + key] = v;
      }
    } else {
      out[section] = body.is_string() ? body.get<std::string>() : body.dump();
    }
  }
  return out;
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    raise(ErrorCode::ConfigError, "bad integer for " + key + ": " + v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  raise(ErrorCode::ConfigError, "bad boolean for " + key + ": " + v);
}

}  // namespace

const char* to_string(MatchKind k) {
  switch (k) {
    case MatchKind::F: return "f";
    case MatchKind::Th: return "th";
    case MatchKind::Tv: return "tv";
  }
  return "unknown";
}

const char* to_string(AggSelect k) {
  switch (k) {
    case AggSelect::Na: return "na";
    case AggSelect::X: return "x";
    case AggSelect::Ca: return "ca";
    case AggSelect::Ret: return "ret";
  }
  return "unknown";
}

const char* to_string(MalCheckMode k) {
  switch (k) {
    case MalCheckMode::Off: return "off";
    case MalCheckMode::Additive: return "additive";
    case MalCheckMode::Multiplicative: return "multiplicative";
  }
  return "unknown";
}

HEParams SessionConfig::he_params() const {
  if (profile == "custom") {
    return HEParams::custom(custom_slots, custom_modulus, custom_depth, custom_batching);
  }
  return HEParams::profile(profile);
}

void SessionConfig::validate() const {
  he_params();  // profile name / custom params
  if (backend == BackendKind::RlweAdapter) {
    raise(ErrorCode::ConfigError, "no RLWE backend is linked");
  }
  if (psi_variant == QueryVariant::SmallDomain && domain_width == 0) {
    raise(ErrorCode::ConfigError, "small-domain sessions need psi.domain_width");
  }
  if (match == MatchKind::Tv) {
    tversky_param_process(tv_alpha, tv_beta, tv_t);
  }
  if (agg == AggSelect::Ret && ret_kappa < 1) {
    raise(ErrorCode::ConfigError, "agg.kappa must be >= 1");
  }
  if (chunk_level && *chunk_level > 30) raise(ErrorCode::ConfigError, "agg.chunk_level too large");
  if (powers < 1 || duplicates < 1) {
    raise(ErrorCode::ConfigError, "replication counts must be >= 1");
  }
  if (hash_count < 1) raise(ErrorCode::ConfigError, "doc.hash_count must be >= 1");
  if (repetitions < 1) raise(ErrorCode::ConfigError, "doc.repetitions must be >= 1");
  if (mal_check == MalCheckMode::Multiplicative && psi_variant != QueryVariant::SmallInput) {
    raise(ErrorCode::ConfigError, "multiplicative mal-check applies to small-input queries");
  }
  if (replication_check && !batched) {
    raise(ErrorCode::ConfigError, "the replication check applies to batched (packed) queries");
  }
  if (batched && psi_variant == QueryVariant::SmallInput && (powers & (powers - 1)) != 0) {
    raise(ErrorCode::ConfigError,
          "batched small-input evaluation folds power blocks; powers must be a power of two");
  }
}

std::string SessionConfig::to_text() const {
  std::ostringstream out;
  out << "[session]\n";
  out << "profile = " << profile << "\n";
  out << "backend = " << pcm::to_string(backend) << "\n";
  out << "seed = " << seed << "\n";
  out << "threads = " << threads << "\n";
  out << "batched = " << (batched ? "true" : "false") << "\n";
  if (profile == "custom") {
    out << "custom_slots = " << custom_slots << "\n";
    out << "custom_modulus = " << custom_modulus << "\n";
    out << "custom_depth = " << custom_depth << "\n";
    out << "custom_batching = " << (custom_batching ? "true" : "false") << "\n";
  }
  out << "[psi]\n";
  out << "variant = " << (psi_variant == QueryVariant::SmallInput ? "small_input" : "small_domain")
      << "\n";
  out << "domain_width = " << domain_width << "\n";
  out << "[match]\n";
  out << "kind = " << pcm::to_string(match) << "\n";
  out << "th_min = " << th_min << "\n";
  out << "tv_alpha = " << tv_alpha.num << "/" << tv_alpha.den << "\n";
  out << "tv_beta = " << tv_beta.num << "/" << tv_beta.den << "\n";
  out << "tv_t = " << tv_t.num << "/" << tv_t.den << "\n";
  out << "[agg]\n";
  out << "kind = " << pcm::to_string(agg) << "\n";
  if (chunk_level) out << "chunk_level = " << *chunk_level << "\n";
  out << "ca_mode = " << (ca_mode == CaMode::Shuffle ? "shuffle" : "is_zero") << "\n";
  out << "kappa = " << ret_kappa << "\n";
  out << "[mal]\n";
  out << "mode = " << pcm::to_string(mal_check) << "\n";
  out << "replication_check = " << (replication_check ? "true" : "false") << "\n";
  out << "[replication]\n";
  out << "powers = " << powers << "\n";
  out << "duplicates = " << duplicates << "\n";
  out << "[doc]\n";
  out << "hash_count = " << hash_count << "\n";
  out << "repetitions = " << repetitions << "\n";
  out << "hash_seed = " << hash_seed << "\n";
  out << "max_keywords = " << max_keywords << "\n";
  return out.str();
}

std::array<uint8_t, 16> SessionConfig::digest() const {
  // The digest pins what both parties must agree on. Runtime-local knobs
  // (worker threads, the server's randomness seed) are excluded so that
  // e.g. a server running with more threads still accepts its clients.
  SessionConfig canonical = *this;
  canonical.seed = 0;
  canonical.threads = 1;
  std::string text = canonical.to_text();
  std::array<uint8_t, 16> out{};
  crypto_generichash(out.data(), out.size(), reinterpret_cast<const uint8_t*>(text.data()),
                     text.size(), nullptr, 0);
  return out;
}

SessionConfig SessionConfig::from_text(const std::string& text) {
  size_t first = text.find_first_not_of(" \t\r\n");
  FlatMap kv = (first != std::string::npos && text[first] == '{') ? parse_json(text)
                                                                  : parse_ini(text);
  SessionConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "session.profile") cfg.profile = value;
    else if (key == "session.backend") {
      if (value == "clear_ring") cfg.backend = BackendKind::ClearRing;
      else if (value == "depth_tracked") cfg.backend = BackendKind::DepthTracked;
      else if (value == "rlwe_adapter") cfg.backend = BackendKind::RlweAdapter;
      else raise(ErrorCode::ConfigError, "unknown backend: " + value);
    } else if (key == "session.seed") cfg.seed = to_u64(key, value);
    else if (key == "session.threads") cfg.threads = static_cast<uint32_t>(to_u64(key, value));
    else if (key == "session.batched") cfg.batched = to_bool(key, value);
    else if (key == "session.custom_slots") cfg.custom_slots = static_cast<uint32_t>(to_u64(key, value));
    else if (key == "session.custom_modulus") cfg.custom_modulus = to_u64(key, value);
    else if (key == "session.custom_depth") cfg.custom_depth = static_cast<uint32_t>(to_u64(key, value));
    else if (key == "session.custom_batching") cfg.custom_batching = to_bool(key, value);
    else if (key == "psi.variant") {
      if (value == "small_input") cfg.psi_variant = QueryVariant::SmallInput;
      else if (value == "small_domain") cfg.psi_variant = QueryVariant::SmallDomain;
      else raise(ErrorCode::ConfigError, "unknown psi variant: " + value);
    } else if (key == "psi.domain_width") cfg.domain_width = static_cast<uint32_t>(to_u64(key, value));
    else if (key == "match.kind") {
      if (value == "f") cfg.match = MatchKind::F;
      else if (value == "th") cfg.match = MatchKind::Th;
      else if (value == "tv") cfg.match = MatchKind::Tv;
      else raise(ErrorCode::ConfigError, "unknown match kind: " + value);
    } else if (key == "match.th_min") cfg.th_min = to_u64(key, value);
    else if (key == "match.tv_alpha") cfg.tv_alpha = Fraction::parse(value);
    else if (key == "match.tv_beta") cfg.tv_beta = Fraction::parse(value);
    else if (key == "match.tv_t") cfg.tv_t = Fraction::parse(value);
    else if (key == "agg.kind") {
      if (value == "na") cfg.agg = AggSelect::Na;
      else if (value == "x") cfg.agg = AggSelect::X;
      else if (value == "ca") cfg.agg = AggSelect::Ca;
      else if (value == "ret") cfg.agg = AggSelect::Ret;
      else raise(ErrorCode::ConfigError, "unknown agg kind: " + value);
    } else if (key == "agg.chunk_level") cfg.chunk_level = static_cast<uint32_t>(to_u64(key, value));
    else if (key == "agg.ca_mode") {
      if (value == "shuffle") cfg.ca_mode = CaMode::Shuffle;
      else if (value == "is_zero") cfg.ca_mode = CaMode::IsZero;
      else raise(ErrorCode::ConfigError, "unknown ca mode: " + value);
    } else if (key == "agg.kappa") cfg.ret_kappa = to_u64(key, value);
    else if (key == "mal.mode") {
      if (value == "off") cfg.mal_check = MalCheckMode::Off;
      else if (value == "additive") cfg.mal_check = MalCheckMode::Additive;
      else if (value == "multiplicative") cfg.mal_check = MalCheckMode::Multiplicative;
      else raise(ErrorCode::ConfigError, "unknown mal mode: " + value);
    } else if (key == "mal.replication_check") cfg.replication_check = to_bool(key, value);
    else if (key == "replication.powers") cfg.powers = static_cast<uint32_t>(to_u64(key, value));
    else if (key == "replication.duplicates") cfg.duplicates = static_cast<uint32_t>(to_u64(key, value));
    else if (key == "doc.hash_count") cfg.hash_count = static_cast<uint32_t>(to_u64(key, value));
    else if (key == "doc.repetitions") cfg.repetitions = static_cast<uint32_t>(to_u64(key, value));
    else if (key == "doc.hash_seed") cfg.hash_seed = to_u64(key, value);
    else if (key == "doc.max_keywords") cfg.max_keywords = static_cast<uint32_t>(to_u64(key, value));
    else raise(ErrorCode::ConfigError, "unknown config key: " + key);
  }
  cfg.validate();
  return cfg;
}

SessionConfig SessionConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::ConfigError, "cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

}  // namespace pcm
