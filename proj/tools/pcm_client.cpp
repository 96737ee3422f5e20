#include <CLI11.hpp>

#include "common.hpp"
#include "pcm/engine.hpp"

int main(int argc, char** argv) {
  CLI::App app{"PCM client: runs one private collection matching query"};
  std::string connect = "127.0.0.1:7712";
  std::string query_path;
  std::string config_path;
  std::string keys_dir = ".pcm-keys";
  std::string out_path = "-";
  app.add_option("--connect", connect, "server host:port");
  app.add_option("--query", query_path, "query file")->required();
  app.add_option("--config", config_path, "session config file")->required();
  app.add_option("--keys", keys_dir, "key material directory");
  app.add_option("--out", out_path, "result output path (default stdout)");
  CLI11_PARSE(app, argc, argv);

  try {
    pcm::SessionConfig cfg = pcm::SessionConfig::from_file(config_path);
    std::vector<uint64_t> values = pcm_tools::load_query_values(query_path, cfg);
    pcm::ClientSession session = pcm_tools::load_or_create_session(cfg, keys_dir);
    auto [host, port] = pcm::parse_endpoint(connect);
    pcm::QueryOutcome outcome = pcm::run_client_query(host, port, session, values);
    nlohmann::json j = pcm_tools::revealed_to_json(outcome.result);
    j["query_bytes"] = outcome.query_bytes;
    j["response_bytes"] = outcome.response_bytes;
    pcm_tools::write_text(out_path, j.dump(2) + "\n");
    return pcm_tools::kOk;
  } catch (const pcm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pcm_tools::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pcm_tools::kProtocolError;
  }
}
