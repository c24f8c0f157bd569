#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

#include "prism/scanner/scanner.hpp"

namespace prism::scanner {

struct ScanClientResult {
  std::optional<ScanResponse> response;
  std::string error;  // set when response is absent
};

// How hooks reach the second scanning tier.
class ScanClient {
 public:
  virtual ~ScanClient() = default;
  virtual ScanClientResult scan(std::string_view text, std::optional<std::string> tool,
                                std::optional<std::string> session, const ScanMetadata& meta) = 0;
};

class InProcessScanClient final : public ScanClient {
 public:
  InProcessScanClient(ScannerService& service, std::string token) : service_(service), token_(std::move(token)) {}
  ScanClientResult scan(std::string_view text, std::optional<std::string> tool, std::optional<std::string> session,
                        const ScanMetadata& meta) override;

 private:
  ScannerService& service_;
  std::string token_;
};

class HttpScanClient final : public ScanClient {
 public:
  // base_url like "http://127.0.0.1:18766"; 21 s default timeout.
  HttpScanClient(std::string base_url, std::string token,
                 std::chrono::milliseconds timeout = std::chrono::milliseconds(21000));
  ScanClientResult scan(std::string_view text, std::optional<std::string> tool, std::optional<std::string> session,
                        const ScanMetadata& meta) override;

 private:
  std::string base_url_;
  std::string token_;
  std::chrono::milliseconds timeout_;
};

class UnavailableScanClient final : public ScanClient {
 public:
  ScanClientResult scan(std::string_view, std::optional<std::string>, std::optional<std::string>,
                        const ScanMetadata&) override {
    return {std::nullopt, "scanner not deployed"};
  }
};

nlohmann::json request_to_json(std::string_view text, const std::optional<std::string>& tool,
                               const std::optional<std::string>& session, const ScanMetadata& meta);

}  // namespace prism::scanner
