#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "prism/audit/audit_log.hpp"

namespace prism::monitor {

enum class ChangeKind { created, changed, deleted };
std::string_view to_string(ChangeKind k);

struct ChangeEvent {
  std::string path;
  ChangeKind kind = ChangeKind::changed;
  std::optional<std::string> old_digest;
  std::optional<std::string> new_digest;
};

struct WatchEntry {
  std::string path;
  std::optional<std::string> last_hash;  // nullopt while the file is absent
  std::chrono::system_clock::time_point last_seen;
};

// SHA-256 hex of a file's bytes; nullopt if it cannot be read.
std::optional<std::string> file_digest(const std::string& path);

// Polls a fixed set of files and reports content-hash changes. The first
// state is taken at construction, so only later changes produce events.
class FileMonitor {
 public:
  FileMonitor(std::vector<std::string> paths, audit::EventSink& audit);

  // Each event is also recorded in the audit sink.
  std::vector<ChangeEvent> poll();
  std::vector<WatchEntry> entries() const;

 private:
  mutable std::mutex mu_;
  std::vector<WatchEntry> entries_;
  audit::EventSink& audit_;
};

// HMAC-signed {path: digest} snapshot.
nlohmann::json make_manifest(const std::vector<std::string>& paths, std::string_view key);

enum class DriftKind { modified, missing, appeared };
std::string_view to_string(DriftKind k);

struct Drift {
  std::string path;
  DriftKind kind;
  std::optional<std::string> expected;
  std::optional<std::string> actual;
};

struct ReconcileReport {
  bool signature_ok = false;
  std::vector<Drift> drift;
  std::string error;

  bool ok() const { return signature_ok && drift.empty(); }
  nlohmann::json to_json() const;
};

// Verifies the manifest signature, then compares each listed path with its
// current digest. A bad signature skips the comparison.
ReconcileReport reconcile(const nlohmann::json& manifest, std::string_view key);

// Background poller for the monitor.
class MonitorRunner {
 public:
  MonitorRunner(FileMonitor& monitor, std::chrono::milliseconds interval);
  ~MonitorRunner();
  MonitorRunner(const MonitorRunner&) = delete;
  MonitorRunner& operator=(const MonitorRunner&) = delete;

 private:
  std::jthread thread_;
};

}  // namespace prism::monitor
