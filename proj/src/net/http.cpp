#include "prism/net/http.hpp"

#include <atomic>
#include <stdexcept>
#include <thread>

#include <httplib.h>

namespace prism::net {

std::optional<std::string> HttpRequest::header(const std::string& lower_name) const {
  const auto it = headers.find(lower_name);
  if (it == headers.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> HttpRequest::bearer_token() const {
  const auto h = header("authorization");
  if (!h) return std::nullopt;
  constexpr std::string_view kPrefix = "Bearer ";
  if (h->size() <= kPrefix.size() || h->compare(0, kPrefix.size(), kPrefix) != 0) return std::nullopt;
  return h->substr(kPrefix.size());
}

HttpResponse HttpResponse::json(int status, const nlohmann::json& body) {
  return {status, body.dump(), "application/json"};
}

struct HttpServer::Impl {
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> running{false};
};

HttpServer::HttpServer() : impl_(std::make_unique<Impl>()) {
  impl_->server.set_payload_max_length(1024 * 1024);
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::set_max_body_bytes(std::size_t n) { impl_->server.set_payload_max_length(n); }

void HttpServer::route(const std::string& method, const std::string& path, Handler handler) {
  auto adapt = [handler = std::move(handler), method](const httplib::Request& req, httplib::Response& res) {
    HttpRequest r;
    r.method = method;
    r.path = req.path;
    r.body = req.body;
    for (const auto& [k, v] : req.headers) {
      std::string key = k;
      for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      r.headers[key] = v;
    }
    HttpResponse out;
    try {
      out = handler(r);
    } catch (const std::exception& e) {
      out = HttpResponse::json(500, {{"error", "internal_error"}, {"detail", e.what()}});
    }
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  if (method == "GET") {
    impl_->server.Get(path, adapt);
  } else if (method == "POST") {
    impl_->server.Post(path, adapt);
  } else if (method == "PUT") {
    impl_->server.Put(path, adapt);
  } else {
    throw std::invalid_argument("unsupported method " + method);
  }
}

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  impl_->running = true;
  impl_->thread = std::thread([this] {
    impl_->server.listen_after_bind();
    impl_->running = false;
  });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::listen(const std::string& host, int port) {
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->running = true;
  impl_->server.listen_after_bind();
  impl_->running = false;
}

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

bool HttpServer::running() const { return impl_->running; }

ClientResult http_call(const std::string& method, const std::string& url, const std::string& body,
                       const std::map<std::string, std::string>& headers, std::chrono::milliseconds timeout) {
  ClientResult out;
  const auto sep = url.find("://");
  if (sep == std::string::npos) {
    out.error = "bad url";
    return out;
  }
  const auto path_at = url.find('/', sep + 3);
  const std::string base = url.substr(0, path_at);
  const std::string path = path_at == std::string::npos ? "/" : url.substr(path_at);
  httplib::Client client(base);
  const auto secs = static_cast<time_t>(timeout.count() / 1000);
  const auto usecs = static_cast<time_t>((timeout.count() % 1000) * 1000);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  httplib::Result res = method == "GET" ? client.Get(path, h) : client.Post(path, h, body, "application/json");
  if (!res) {
    out.error = httplib::to_string(res.error());
    out.timed_out = res.error() == httplib::Error::ConnectionTimeout || res.error() == httplib::Error::Read;
    return out;
  }
  out.ok = true;
  out.status = res->status;
  out.body = res->body;
  return out;
}

}  // namespace prism::net
