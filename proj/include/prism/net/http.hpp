#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

namespace prism::net {

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;

  std::optional<std::string> header(const std::string& lower_name) const;
  // Value of "Authorization: Bearer <token>", if present.
  std::optional<std::string> bearer_token() const;
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";

  static HttpResponse json(int status, const nlohmann::json& body);
};

using Handler = std::function<HttpResponse(const HttpRequest&)>;

// Small threaded HTTP/1.1 server. Handlers run concurrently.
class HttpServer {
 public:
  HttpServer();
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  void route(const std::string& method, const std::string& path, Handler handler);
  void set_max_body_bytes(std::size_t n);

  // Binds and serves on a background thread; port 0 picks a free port.
  // Returns the bound port or throws std::runtime_error.
  int start(const std::string& host, int port);
  // Binds and serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ClientResult {
  bool ok = false;  // transport succeeded (any status)
  int status = 0;
  std::string body;
  std::string error;
  bool timed_out = false;
};

// One-shot client call; url is "http://host:port/path".
ClientResult http_call(const std::string& method, const std::string& url, const std::string& body,
                       const std::map<std::string, std::string>& headers, std::chrono::milliseconds timeout);

}  // namespace prism::net
