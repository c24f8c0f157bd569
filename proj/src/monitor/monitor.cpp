#include "prism/monitor/monitor.hpp"

#include <condition_variable>
#include <fstream>
#include <sstream>

#include "prism/audit/crypto.hpp"

namespace prism::monitor {

namespace {

constexpr std::string_view kActor = "file-monitor";
constexpr int kManifestVersion = 1;

nlohmann::json opt(const std::optional<std::string>& s) { return s ? nlohmann::json(*s) : nlohmann::json(nullptr); }

std::string manifest_mac(const nlohmann::json& files, std::string_view key) {
  return audit::to_hex(audit::hmac_sha256(key, audit::canonical_json(files)));
}

}  // namespace

std::string_view to_string(ChangeKind k) {
  switch (k) {
    case ChangeKind::created: return "new";
    case ChangeKind::changed: return "changed";
    case ChangeKind::deleted: return "deleted";
  }
  return "changed";
}

std::string_view to_string(DriftKind k) {
  switch (k) {
    case DriftKind::modified: return "modified";
    case DriftKind::missing: return "missing";
    case DriftKind::appeared: return "appeared";
  }
  return "modified";
}

std::optional<std::string> file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  if (in.bad()) return std::nullopt;
  return audit::to_hex(audit::sha256(buf.str()));
}

FileMonitor::FileMonitor(std::vector<std::string> paths, audit::EventSink& audit) : audit_(audit) {
  const auto now = std::chrono::system_clock::now();
  for (auto& p : paths) entries_.push_back({p, file_digest(p), now});
}

std::vector<ChangeEvent> FileMonitor::poll() {
  std::lock_guard lock(mu_);
  std::vector<ChangeEvent> events;
  const auto now = std::chrono::system_clock::now();
  for (auto& e : entries_) {
    auto current = file_digest(e.path);
    e.last_seen = now;
    if (current == e.last_hash) continue;
    ChangeEvent ev{e.path, ChangeKind::changed, e.last_hash, current};
    if (!e.last_hash) ev.kind = ChangeKind::created;
    if (!current) ev.kind = ChangeKind::deleted;
    e.last_hash = std::move(current);
    audit_.record(kActor, "file_" + std::string(to_string(ev.kind)), std::nullopt,
                  {{"path", ev.path}, {"old_digest", opt(ev.old_digest)}, {"new_digest", opt(ev.new_digest)}});
    events.push_back(std::move(ev));
  }
  return events;
}

std::vector<WatchEntry> FileMonitor::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

nlohmann::json make_manifest(const std::vector<std::string>& paths, std::string_view key) {
  nlohmann::json files = nlohmann::json::object();
  for (const auto& p : paths) files[p] = opt(file_digest(p));
  return {{"version", kManifestVersion},
          {"created_at", audit::utc_timestamp_now()},
          {"files", files},
          {"mac", manifest_mac(files, key)}};
}

nlohmann::json ReconcileReport::to_json() const {
  nlohmann::json d = nlohmann::json::array();
  for (const auto& x : drift) {
    d.push_back({{"path", x.path}, {"kind", std::string(to_string(x.kind))}, {"expected", opt(x.expected)},
                 {"actual", opt(x.actual)}});
  }
  nlohmann::json j = {{"ok", ok()}, {"signature_ok", signature_ok}, {"drift", d}};
  if (!error.empty()) j["error"] = error;
  return j;
}

ReconcileReport reconcile(const nlohmann::json& manifest, std::string_view key) {
  ReconcileReport r;
  if (!manifest.is_object() || manifest.value("version", 0) != kManifestVersion || !manifest.contains("files") ||
      !manifest["files"].is_object() || !manifest.contains("mac") || !manifest["mac"].is_string()) {
    r.error = "manifest is malformed";
    return r;
  }
  audit::Digest want{}, got{};
  if (!audit::from_hex(manifest["mac"].get<std::string>(), want) ||
      !audit::from_hex(manifest_mac(manifest["files"], key), got) || !audit::digest_equal(want, got)) {
    r.error = "manifest signature does not verify";
    return r;
  }
  r.signature_ok = true;
  for (const auto& [path, expected_j] : manifest["files"].items()) {
    std::optional<std::string> expected;
    if (expected_j.is_string()) expected = expected_j.get<std::string>();
    const auto actual = file_digest(path);
    if (expected == actual) continue;
    DriftKind kind = DriftKind::modified;
    if (!actual) kind = DriftKind::missing;
    if (!expected) kind = DriftKind::appeared;
    r.drift.push_back({path, kind, expected, actual});
  }
  return r;
}

MonitorRunner::MonitorRunner(FileMonitor& monitor, std::chrono::milliseconds interval)
    : thread_([&monitor, interval](std::stop_token st) {
        std::mutex m;
        std::condition_variable_any cv;
        std::unique_lock lock(m);
        while (!st.stop_requested()) {
          if (cv.wait_for(lock, st, interval, [] { return false; })) break;
          if (st.stop_requested()) break;
          monitor.poll();
        }
      }) {}

MonitorRunner::~MonitorRunner() {
  thread_.request_stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace prism::monitor
