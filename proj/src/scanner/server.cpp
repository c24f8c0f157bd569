#include "prism/scanner/server.hpp"

namespace prism::scanner {

ScannerServer::ScannerServer(ScannerService& service) : service_(service) {
  // Leave room for JSON escaping; the text itself is capped by the scanner.
  http_.set_max_body_bytes(2 * 1024 * 1024);

  http_.route("POST", "/scan", [this](const net::HttpRequest& req) {
    ScanRequest sr;
    sr.auth_token = req.bearer_token().value_or("");
    if (!service_.authenticate(sr.auth_token)) return net::HttpResponse::json(401, {{"error", "unauthorized"}});
    const auto j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("text") || !j["text"].is_string()) {
      return net::HttpResponse::json(400, {{"error", "body must be an object with a string 'text'"}});
    }
    sr.text = j["text"].get<std::string>();
    if (j.contains("tool") && j["tool"].is_string()) sr.tool = j["tool"].get<std::string>();
    if (j.contains("session") && j["session"].is_string()) sr.session = j["session"].get<std::string>();
    if (j.contains("metadata") && j["metadata"].is_object() && j["metadata"].contains("mock_verdict") &&
        j["metadata"]["mock_verdict"].is_string()) {
      sr.metadata.mock_verdict = scan::verdict_from_string(j["metadata"]["mock_verdict"].get<std::string>());
    }
    try {
      return net::HttpResponse::json(200, response_to_json(service_.handle_scan(sr)));
    } catch (const AuthError&) {
      return net::HttpResponse::json(401, {{"error", "unauthorized"}});
    } catch (const scan::InputTooLarge& e) {
      return net::HttpResponse::json(413, {{"error", "text_too_large"}, {"limit", e.limit()}});
    }
  });

  http_.route("GET", "/health", [this](const net::HttpRequest&) {
    return net::HttpResponse::json(200, service_.health());
  });
}

}  // namespace prism::scanner
