#include "prism/scanner/client.hpp"

#include "prism/net/http.hpp"

namespace prism::scanner {

nlohmann::json request_to_json(std::string_view text, const std::optional<std::string>& tool,
                               const std::optional<std::string>& session, const ScanMetadata& meta) {
  nlohmann::json j = {{"text", std::string(text)}};
  if (tool) j["tool"] = *tool;
  if (session) j["session"] = *session;
  if (meta.mock_verdict) j["metadata"] = {{"mock_verdict", std::string(scan::to_string(*meta.mock_verdict))}};
  return j;
}

ScanClientResult InProcessScanClient::scan(std::string_view text, std::optional<std::string> tool,
                                           std::optional<std::string> session, const ScanMetadata& meta) {
  ScanRequest req{std::string(text), std::move(tool), std::move(session), token_, meta};
  try {
    return {service_.handle_scan(req), ""};
  } catch (const std::exception& e) {
    return {std::nullopt, e.what()};
  }
}

HttpScanClient::HttpScanClient(std::string base_url, std::string token, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), token_(std::move(token)), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

ScanClientResult HttpScanClient::scan(std::string_view text, std::optional<std::string> tool,
                                      std::optional<std::string> session, const ScanMetadata& meta) {
  const auto body = request_to_json(text, tool, session, meta).dump();
  const auto res =
      net::http_call("POST", base_url_ + "/scan", body, {{"Authorization", "Bearer " + token_}}, timeout_);
  if (!res.ok) return {std::nullopt, res.timed_out ? "scanner timeout: " + res.error : "scanner unreachable: " + res.error};
  if (res.status != 200) return {std::nullopt, "scanner returned HTTP " + std::to_string(res.status)};
  try {
    return {response_from_json(nlohmann::json::parse(res.body)), ""};
  } catch (const std::exception& e) {
    return {std::nullopt, std::string("bad scanner response: ") + e.what()};
  }
}

}  // namespace prism::scanner
