#include <CLI11.hpp>

#include "common.hpp"
#include "pcm/engine.hpp"

int main(int argc, char** argv) {
  CLI::App app{"PCM server: serves private collection matching sessions"};
  std::string listen = "127.0.0.1:7712";
  std::string collection_path;
  std::string config_path;
  std::string audit_path;
  unsigned threads = 1;
  size_t max_sessions = 0;
  app.add_option("--listen", listen, "host:port to listen on");
  app.add_option("--collection", collection_path, "collection file")->required();
  app.add_option("--config", config_path, "session config file")->required();
  app.add_option("--threads", threads, "worker threads for per-set matching");
  app.add_option("--audit", audit_path, "audit log path (JSON lines)");
  app.add_option("--max-sessions", max_sessions, "serve this many sessions then exit (0 = forever)");
  CLI11_PARSE(app, argc, argv);

  try {
    pcm::SessionConfig cfg = pcm::SessionConfig::from_file(config_path);
    cfg.threads = threads;
    pcm::Collection collection = pcm_tools::load_collection(collection_path, cfg);
    auto [host, port] = pcm::parse_endpoint(listen);
    pcm::TcpListener listener(host, port);
    std::cerr << "listening on " << host << ":" << listener.port() << "\n";
    std::unique_ptr<pcm::AuditLog> audit;
    if (!audit_path.empty()) audit = std::make_unique<pcm::AuditLog>(audit_path);
    pcm::serve(listener, cfg, collection, audit.get(), max_sessions);
    return pcm_tools::kOk;
  } catch (const pcm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pcm_tools::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pcm_tools::kProtocolError;
  }
}
