#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <iostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "pcm/apps.hpp"

namespace pcm_tools {

// Exit codes shared by all tools.
constexpr int kOk = 0;
constexpr int kProtocolError = 2;
constexpr int kConfigError = 3;

inline int exit_code_for(const pcm::Error& e) {
  switch (e.code()) {
    case pcm::ErrorCode::ConfigError:
    case pcm::ErrorCode::InvalidParams:
    case pcm::ErrorCode::InvalidThreshold:
    case pcm::ErrorCode::ParseError:
    case pcm::ErrorCode::WidthMismatch:
      return kConfigError;
    default:
      return kProtocolError;
  }
}

inline nlohmann::json revealed_to_json(const pcm::RevealedAggregate& r) {
  nlohmann::json j;
  j["kind"] = pcm::to_string(r.kind);
  switch (r.kind) {
    case pcm::AggKind::Existential:
      j["match"] = r.bit;
      break;
    case pcm::AggKind::ExistentialChunked:
      j["match"] = r.bit;
      j["chunk_bits"] = r.chunk_bits;
      break;
    case pcm::AggKind::Cardinality:
    case pcm::AggKind::CardinalityShuffled:
      j["count"] = r.count;
      break;
    case pcm::AggKind::Retrieval:
      j["value"] = r.value;
      break;
    case pcm::AggKind::Naive:
      j["bits"] = r.bits;
      break;
  }
  return j;
}

inline void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) pcm::raise(pcm::ErrorCode::IoError, "cannot write " + path);
  out << text;
}

/// Collection file sniffing: JSONL documents ({"keywords": ...}), JSONL raw
/// sets ({"elements": ...}), or fingerprint TSV.
inline pcm::Collection load_collection(const std::string& path, const pcm::SessionConfig& cfg) {
  const pcm::HEParams params = cfg.he_params();
  if (cfg.psi_variant == pcm::QueryVariant::SmallDomain) {
    auto fps = pcm::ingest_fingerprints(path, cfg.domain_width);
    return pcm::fingerprint_collection(fps, cfg.domain_width, params.plaintext_modulus);
  }
  std::ifstream in(path);
  if (!in) pcm::raise(pcm::ErrorCode::IoError, "cannot open collection: " + path);
  std::string first_line;
  std::getline(in, first_line);
  in.close();
  if (first_line.find("\"keywords\"") != std::string::npos) {
    auto docs = pcm::ingest_corpus(path);
    pcm::KeywordEncoding enc{cfg.hash_count, cfg.hash_seed, params.q()};
    return pcm::document_collection(docs, enc, cfg.max_keywords);
  }
  // Raw integer sets: {"id": ..., "elements": [...], "datum": optional}
  pcm::Collection collection;
  const pcm::PrimeModulus& m = params.plaintext_modulus;
  std::ifstream again(path);
  std::string line;
  size_t line_no = 0;
  bool any_datum = false;
  while (std::getline(again, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("elements")) {
      pcm::raise(pcm::ErrorCode::ParseError, "bad set record on line " + std::to_string(line_no));
    }
    std::vector<pcm::Scalar> elems;
    for (uint64_t v : j["elements"].get<std::vector<uint64_t>>()) elems.emplace_back(v, m);
    collection.sets.push_back(
        pcm::ServerSet{std::move(elems), static_cast<int>(collection.sets.size())});
    if (j.contains("datum")) {
      collection.associated.emplace_back(j["datum"].get<uint64_t>(), m);
      any_datum = true;
    }
  }
  if (any_datum && collection.associated.size() != collection.sets.size()) {
    pcm::raise(pcm::ErrorCode::ParseError, "datum must be present on every record or none");
  }
  return collection;
}

/// Query file: fingerprint line for small-domain sessions; JSON with
/// "elements" (raw residues) or "keywords" (hashed client-side) otherwise.
inline std::vector<uint64_t> load_query_values(const std::string& path,
                                               const pcm::SessionConfig& cfg) {
  const pcm::HEParams params = cfg.he_params();
  if (cfg.psi_variant == pcm::QueryVariant::SmallDomain) {
    auto fps = pcm::ingest_fingerprints(path, cfg.domain_width);
    if (fps.empty()) pcm::raise(pcm::ErrorCode::ParseError, "query file is empty");
    return pcm::fingerprint_positions(fps.front());
  }
  std::ifstream in(path);
  if (!in) pcm::raise(pcm::ErrorCode::IoError, "cannot open query: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j = nlohmann::json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) pcm::raise(pcm::ErrorCode::ParseError, "query file must be JSON");
  if (j.contains("elements")) return j["elements"].get<std::vector<uint64_t>>();
  if (j.contains("keywords")) {
    pcm::KeywordEncoding enc{cfg.hash_count, cfg.hash_seed, params.q()};
    std::vector<uint64_t> values;
    for (const auto& s : pcm::hash_keywords(j["keywords"].get<std::vector<std::string>>(), enc)) {
      values.push_back(s.value);
    }
    return values;
  }
  pcm::raise(pcm::ErrorCode::ParseError, "query JSON needs elements or keywords");
}

/// Key material lives in <dir>/keys.json as the hex token plus profile name;
/// generated on first use.
inline pcm::ClientSession load_or_create_session(const pcm::SessionConfig& cfg,
                                                 const std::string& keys_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(keys_dir);
  const std::string path = keys_dir + "/keys.json";
  uint64_t key_seed;
  if (fs::exists(path)) {
    std::ifstream in(path);
    nlohmann::json j;
    in >> j;
    key_seed = j.at("key_seed").get<uint64_t>();
  } else {
    std::random_device rd;
    key_seed = (static_cast<uint64_t>(rd()) << 32) | rd();
    std::ofstream out(path);
    out << nlohmann::json{{"key_seed", key_seed}}.dump(2) << "\n";
  }
  return pcm::make_client_session(cfg, key_seed);
}

}  // namespace pcm_tools
