#pragma once

#include <string>

#include "prism/net/http.hpp"
#include "prism/scanner/scanner.hpp"

namespace prism::scanner {

inline constexpr int kDefaultPort = 18766;

// POST /scan and GET /health over loopback HTTP.
class ScannerServer {
 public:
  explicit ScannerServer(ScannerService& service);

  int start(const std::string& host = "127.0.0.1", int port = kDefaultPort) { return http_.start(host, port); }
  void listen(const std::string& host = "127.0.0.1", int port = kDefaultPort) { http_.listen(host, port); }
  void stop() { http_.stop(); }

 private:
  ScannerService& service_;
  net::HttpServer http_;
};

}  // namespace prism::scanner
