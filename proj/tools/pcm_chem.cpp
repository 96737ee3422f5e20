#include <CLI11.hpp>

#include "common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Private chemical-similarity search over fingerprint collections"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "generate a synthetic fingerprint collection");
  size_t gen_count = 256;
  unsigned gen_width = 166;
  double gen_density = 0.3;
  uint64_t gen_seed = 1;
  std::string gen_out = "fingerprints.tsv";
  gen->add_option("--count", gen_count, "number of fingerprints");
  gen->add_option("--width", gen_width, "fingerprint width in bits");
  gen->add_option("--density", gen_density, "expected fraction of set bits");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output TSV path");

  auto* search = app.add_subcommand("search", "run an aggregated similarity search");
  std::string s_collection;
  std::string s_query;
  std::string s_agg = "x";
  std::string s_profile = "P32k";
  std::string s_backend = "clear_ring";
  unsigned s_width = 166;
  std::string s_out = "-";
  search->add_option("--collection", s_collection, "fingerprint TSV")->required();
  search->add_option("--query", s_query, "query fingerprint TSV (first record used)")->required();
  search->add_option("--agg", s_agg, "aggregation: x (any match) or ca (count)");
  search->add_option("--profile", s_profile, "parameter profile (P8k/P16k/P32k)");
  search->add_option("--backend", s_backend, "clear_ring or depth_tracked");
  search->add_option("--width", s_width, "fingerprint width in bits");
  search->add_option("--out", s_out, "result output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      pcm::SeededRng rng(gen_seed);
      auto fps = pcm::synthetic_fingerprints(gen_count, gen_width, gen_density, rng);
      pcm::write_fingerprints(gen_out, fps);
      std::cerr << "wrote " << fps.size() << " fingerprints to " << gen_out << "\n";
      return pcm_tools::kOk;
    }

    pcm::AggSelect agg;
    if (s_agg == "x") agg = pcm::AggSelect::X;
    else if (s_agg == "ca") agg = pcm::AggSelect::Ca;
    else pcm::raise(pcm::ErrorCode::ConfigError, "agg must be x or ca");
    pcm::BackendKind backend = s_backend == "depth_tracked" ? pcm::BackendKind::DepthTracked
                                                            : pcm::BackendKind::ClearRing;
    pcm::SessionConfig cfg = pcm::chem_config(agg, s_profile, backend, s_width);
    auto collection = pcm::ingest_fingerprints(s_collection, s_width);
    auto query = pcm::ingest_fingerprints(s_query, s_width);
    if (query.empty()) pcm::raise(pcm::ErrorCode::ParseError, "query file is empty");
    pcm::SearchResult result = pcm::chem_search(query.front(), collection, cfg);
    nlohmann::json j = pcm_tools::revealed_to_json(result.revealed);
    j["query_bytes"] = result.outcome.query_bytes;
    j["response_bytes"] = result.outcome.response_bytes;
    pcm_tools::write_text(s_out, j.dump(2) + "\n");
    return pcm_tools::kOk;
  } catch (const pcm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pcm_tools::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pcm_tools::kProtocolError;
  }
}
