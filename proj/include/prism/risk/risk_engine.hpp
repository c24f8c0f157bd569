#pragma once

#include <atomic>
#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

namespace prism::risk {

using Clock = std::chrono::steady_clock;
using TimePoint = Clock::time_point;
using Duration = std::chrono::milliseconds;

enum class Scope { conversation, session };
std::string_view to_string(Scope s);

struct RiskKey {
  Scope scope = Scope::session;
  std::string id;

  static RiskKey conversation(std::string id) { return {Scope::conversation, std::move(id)}; }
  static RiskKey session(std::string id) { return {Scope::session, std::move(id)}; }

  friend auto operator<=>(const RiskKey&, const RiskKey&) = default;
};

struct RiskEntry {
  int amount = 0;
  std::string reason;
  TimePoint created_at;
  Duration ttl{0};

  bool live_at(TimePoint now) const { return now - created_at < ttl; }
};

enum class ResponseLevel { none = 0, warn = 1, block_tools = 2, block_spawn = 3 };
std::string_view to_string(ResponseLevel l);

struct RiskThresholds {
  int warn_at = 30;
  int tool_block_at = 60;
  int spawn_block_at = 80;

  bool valid() const { return 0 < warn_at && warn_at < tool_block_at && tool_block_at < spawn_block_at; }
};

ResponseLevel level_for(int risk, const RiskThresholds& t);

struct RiskConfig {
  Duration ttl = std::chrono::minutes(30);
  Duration sweep_interval = std::chrono::seconds(60);
  RiskThresholds thresholds;
};

struct RestoreReport {
  bool ok = false;
  std::size_t restored = 0;
  std::size_t dropped_expired = 0;
  std::string error;
};

// Conversation- and session-scoped risk with per-entry TTL. All methods are
// thread-safe; reads take a shared lock, mutations an exclusive one.
class RiskEngine {
 public:
  static constexpr int kSnapshotVersion = 1;

  explicit RiskEngine(RiskConfig config = {});

  // Precondition amount > 0 (throws std::invalid_argument otherwise).
  int add_risk(const RiskKey& key, int amount, std::string reason, TimePoint now);
  int current_risk(const RiskKey& key, TimePoint now) const;
  ResponseLevel response_level(const RiskKey& key, TimePoint now) const;
  std::size_t sweep(TimePoint now);
  // Drops every entry of one key (session end).
  std::size_t clear(const RiskKey& key);
  std::size_t entry_count() const;
  std::vector<RiskKey> keys() const;

  // Wall-clock created_at plus remaining TTL per live entry.
  nlohmann::json snapshot(TimePoint now, std::chrono::system_clock::time_point wall_now) const;
  // On any validation failure the engine is left empty and ok=false.
  RestoreReport restore(const nlohmann::json& doc, TimePoint now, std::chrono::system_clock::time_point wall_now);

  const RiskConfig& config() const { return config_; }

 private:
  RiskConfig config_;
  mutable std::shared_mutex mu_;
  std::map<RiskKey, std::vector<RiskEntry>> entries_;
};

// Periodically sweeps an engine on a background thread.
class RiskSweeper {
 public:
  RiskSweeper(RiskEngine& engine, Duration interval, std::function<TimePoint()> now = [] { return Clock::now(); });
  ~RiskSweeper();
  RiskSweeper(const RiskSweeper&) = delete;
  RiskSweeper& operator=(const RiskSweeper&) = delete;

  std::uint64_t runs() const { return runs_.load(); }

 private:
  std::atomic<std::uint64_t> runs_{0};
  std::jthread thread_;
};

}  // namespace prism::risk
