#include <CLI11.hpp>

#include <sstream>

#include "common.hpp"

namespace {

std::vector<std::string> split_keywords(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Private keyword search over document collections"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "generate a synthetic document corpus");
  size_t gen_count = 64;
  unsigned gen_keywords = 128;
  size_t gen_vocab = 1 << 16;
  uint64_t gen_seed = 1;
  std::string gen_out = "corpus.jsonl";
  gen->add_option("--count", gen_count, "number of documents");
  gen->add_option("--keywords-per-doc", gen_keywords, "keywords per document");
  gen->add_option("--vocab", gen_vocab, "vocabulary size");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output JSONL path");

  auto* search = app.add_subcommand("search", "run an aggregated document search");
  std::string s_corpus;
  std::string s_keywords;
  std::string s_agg = "x";
  std::string s_profile;
  std::string s_backend = "clear_ring";
  unsigned s_hashes = 2;
  unsigned s_reps = 1;
  std::string s_out = "-";
  search->add_option("--corpus", s_corpus, "corpus JSONL")->required();
  search->add_option("--keywords", s_keywords, "comma-separated query keywords")->required();
  search->add_option("--agg", s_agg, "aggregation: x (any match) or ca (count)");
  search->add_option("--profile", s_profile, "parameter profile (default: P32k for x, P8k for ca)");
  search->add_option("--backend", s_backend, "clear_ring or depth_tracked");
  search->add_option("--hashes", s_hashes, "hash functions per keyword");
  search->add_option("--repetitions", s_reps, "independent matching repetitions");
  search->add_option("--out", s_out, "result output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      pcm::SeededRng rng(gen_seed);
      auto docs = pcm::synthetic_corpus(gen_count, gen_keywords, gen_vocab, rng);
      pcm::write_corpus(gen_out, docs);
      std::cerr << "wrote " << docs.size() << " documents to " << gen_out << "\n";
      return pcm_tools::kOk;
    }

    pcm::AggSelect agg;
    if (s_agg == "x") agg = pcm::AggSelect::X;
    else if (s_agg == "ca") agg = pcm::AggSelect::Ca;
    else pcm::raise(pcm::ErrorCode::ConfigError, "agg must be x or ca");
    if (s_profile.empty()) s_profile = agg == pcm::AggSelect::X ? "P32k" : "P8k";
    pcm::BackendKind backend = s_backend == "depth_tracked" ? pcm::BackendKind::DepthTracked
                                                            : pcm::BackendKind::ClearRing;
    pcm::SessionConfig cfg = pcm::doc_config(agg, s_profile, backend, s_hashes, s_reps);
    auto corpus = pcm::ingest_corpus(s_corpus);
    auto keywords = split_keywords(s_keywords);
    if (keywords.empty()) pcm::raise(pcm::ErrorCode::ConfigError, "no query keywords");
    pcm::SearchResult result = pcm::doc_search(keywords, corpus, cfg);
    nlohmann::json j = pcm_tools::revealed_to_json(result.revealed);
    j["query_bytes"] = result.outcome.query_bytes;
    j["response_bytes"] = result.outcome.response_bytes;
    j["mapping_fp_bits"] = pcm::doc_mapping_fp_bits(cfg.he_params().q(), s_hashes);
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
