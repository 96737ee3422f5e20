#pragma once

#include <array>
#include <optional>
#include <string>

#include "pcm/agg.hpp"
#include "pcm/backend.hpp"
#include "pcm/match.hpp"
#include "pcm/psi.hpp"

namespace pcm {

enum class MatchKind : uint8_t { F = 0, Th = 1, Tv = 2 };
enum class AggSelect : uint8_t { Na = 0, X = 1, Ca = 2, Ret = 3 };
enum class MalCheckMode : uint8_t { Off = 0, Additive = 1, Multiplicative = 2 };

const char* to_string(MatchKind k);
const char* to_string(AggSelect k);
const char* to_string(MalCheckMode k);

/// Full description of one protocol session: parameter profile, layer
/// variants and their parameters, hardening options, and batching layout.
/// Loadable from a sectioned key/value text file or an equivalent JSON
/// rendering.
struct SessionConfig {
  // [session]
  std::string profile = "P8k";
  BackendKind backend = BackendKind::ClearRing;
  uint64_t seed = 1;
  uint32_t threads = 1;
  bool batched = false;
  // custom parameter block, used when profile == "custom"
  uint32_t custom_slots = 1;
  uint64_t custom_modulus = 4079617;
  uint32_t custom_depth = 2;
  bool custom_batching = false;

  // [psi]
  QueryVariant psi_variant = QueryVariant::SmallInput;
  uint32_t domain_width = 0;  // |D|, small-domain only

  // [match]
  MatchKind match = MatchKind::F;
  uint64_t th_min = 1;
  Fraction tv_alpha{1, 1};
  Fraction tv_beta{1, 1};
  Fraction tv_t{4, 5};

  // [agg]
  AggSelect agg = AggSelect::X;
  std::optional<uint32_t> chunk_level;
  CaMode ca_mode = CaMode::Shuffle;
  uint64_t ret_kappa = 1;

  // [mal]
  MalCheckMode mal_check = MalCheckMode::Off;
  bool replication_check = false;

  // [replication]
  uint32_t powers = 1;
  uint32_t duplicates = 1;

  // [doc]
  uint32_t hash_count = 2;
  uint32_t repetitions = 1;
  uint64_t hash_seed = 7;
  uint32_t max_keywords = 128;

  HEParams he_params() const;
  void validate() const;

  /// BLAKE2b-128 digest of the canonical text rendering.
  std::array<uint8_t, 16> digest() const;

  std::string to_text() const;
  static SessionConfig from_text(const std::string& text);
  static SessionConfig from_file(const std::string& path);
};

}  // namespace pcm
