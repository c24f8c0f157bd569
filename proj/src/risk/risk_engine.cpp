#include "prism/risk/risk_engine.hpp"

#include <algorithm>
#include <condition_variable>
#include <mutex>
#include <stdexcept>

#include "prism/audit/crypto.hpp"

namespace prism::risk {

std::string_view to_string(Scope s) { return s == Scope::conversation ? "conversation" : "session"; }

std::string_view to_string(ResponseLevel l) {
  switch (l) {
    case ResponseLevel::none: return "none";
    case ResponseLevel::warn: return "warn";
    case ResponseLevel::block_tools: return "block_tools";
    case ResponseLevel::block_spawn: return "block_spawn";
  }
  return "none";
}

ResponseLevel level_for(int risk, const RiskThresholds& t) {
  if (risk >= t.spawn_block_at) return ResponseLevel::block_spawn;
  if (risk >= t.tool_block_at) return ResponseLevel::block_tools;
  if (risk >= t.warn_at) return ResponseLevel::warn;
  return ResponseLevel::none;
}

RiskEngine::RiskEngine(RiskConfig config) : config_(config) {
  if (!config_.thresholds.valid()) throw std::invalid_argument("risk thresholds must satisfy 0 < warn < tool_block < spawn_block");
  if (config_.ttl.count() <= 0) throw std::invalid_argument("risk TTL must be positive");
}

int RiskEngine::add_risk(const RiskKey& key, int amount, std::string reason, TimePoint now) {
  if (amount <= 0) throw std::invalid_argument("risk amount must be positive");
  if (key.id.empty()) throw std::invalid_argument("risk key id must not be empty");
  std::unique_lock lock(mu_);
  auto& list = entries_[key];
  list.push_back({amount, std::move(reason), now, config_.ttl});
  int sum = 0;
  for (const auto& e : list) sum += e.live_at(now) ? e.amount : 0;
  return sum;
}

int RiskEngine::current_risk(const RiskKey& key, TimePoint now) const {
  std::shared_lock lock(mu_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return 0;
  int sum = 0;
  for (const auto& e : it->second) sum += e.live_at(now) ? e.amount : 0;
  return sum;
}

ResponseLevel RiskEngine::response_level(const RiskKey& key, TimePoint now) const {
  return level_for(current_risk(key, now), config_.thresholds);
}

std::size_t RiskEngine::sweep(TimePoint now) {
  std::unique_lock lock(mu_);
  std::size_t removed = 0;
  for (auto it = entries_.begin(); it != entries_.end();) {
    auto& list = it->second;
    const auto before = list.size();
    list.erase(std::remove_if(list.begin(), list.end(), [&](const RiskEntry& e) { return !e.live_at(now); }), list.end());
    removed += before - list.size();
    it = list.empty() ? entries_.erase(it) : std::next(it);
  }
  return removed;
}

std::size_t RiskEngine::clear(const RiskKey& key) {
  std::unique_lock lock(mu_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return 0;
  const auto n = it->second.size();
  entries_.erase(it);
  return n;
}

std::size_t RiskEngine::entry_count() const {
  std::shared_lock lock(mu_);
  std::size_t n = 0;
  for (const auto& [key, list] : entries_) n += list.size();
  return n;
}

std::vector<RiskKey> RiskEngine::keys() const {
  std::shared_lock lock(mu_);
  std::vector<RiskKey> out;
  out.reserve(entries_.size());
  for (const auto& [key, list] : entries_) out.push_back(key);
  return out;
}

namespace {

using SysClock = std::chrono::system_clock;

std::int64_t to_unix_ms(SysClock::time_point t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

std::string entries_checksum(const nlohmann::json& entries) {
  return audit::to_hex(audit::sha256(entries.dump()));
}

}  // namespace

nlohmann::json RiskEngine::snapshot(TimePoint now, SysClock::time_point wall_now) const {
  std::shared_lock lock(mu_);
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [key, list] : entries_) {
    for (const auto& e : list) {
      if (!e.live_at(now)) continue;
      const auto age = std::chrono::duration_cast<Duration>(now - e.created_at);
      const auto remaining = e.ttl - age;
      entries.push_back({{"scope", std::string(to_string(key.scope))},
                         {"id", key.id},
                         {"amount", e.amount},
                         {"reason", e.reason},
                         {"created_at_ms", to_unix_ms(wall_now) - age.count()},
                         {"ttl_ms", e.ttl.count()},
                         {"remaining_ms", remaining.count()}});
    }
  }
  return {{"version", kSnapshotVersion},
          {"saved_at_ms", to_unix_ms(wall_now)},
          {"entries", entries},
          {"checksum", entries_checksum(entries)}};
}

RestoreReport RiskEngine::restore(const nlohmann::json& doc, TimePoint now, SysClock::time_point wall_now) {
  RestoreReport report;
  std::map<RiskKey, std::vector<RiskEntry>> restored;
  try {
    if (!doc.is_object()) throw std::runtime_error("snapshot is not an object");
    if (doc.at("version").get<int>() != kSnapshotVersion) {
      throw std::runtime_error("snapshot version " + doc.at("version").dump() + " is not supported");
    }
    const auto saved_at = doc.at("saved_at_ms").get<std::int64_t>();
    const auto& entries = doc.at("entries");
    if (!entries.is_array()) throw std::runtime_error("snapshot entries must be a list");
    if (doc.at("checksum").get<std::string>() != entries_checksum(entries)) {
      throw std::runtime_error("snapshot checksum mismatch");
    }
    const std::int64_t downtime = std::max<std::int64_t>(0, to_unix_ms(wall_now) - saved_at);
    for (const auto& item : entries) {
      const std::string scope = item.at("scope").get<std::string>();
      if (scope != "conversation" && scope != "session") throw std::runtime_error("unknown scope '" + scope + "'");
      RiskKey key{scope == "conversation" ? Scope::conversation : Scope::session, item.at("id").get<std::string>()};
      const int amount = item.at("amount").get<int>();
      const Duration ttl{item.at("ttl_ms").get<std::int64_t>()};
      const std::int64_t remaining = item.at("remaining_ms").get<std::int64_t>() - downtime;
      if (key.id.empty() || amount <= 0 || ttl.count() <= 0) throw std::runtime_error("invalid snapshot entry");
      if (remaining <= 0) {
        ++report.dropped_expired;
        continue;
      }
      const Duration age = ttl - Duration(std::min(remaining, ttl.count()));
      restored[key].push_back({amount, item.at("reason").get<std::string>(), now - age, ttl});
      ++report.restored;
    }
  } catch (const std::exception& e) {
    std::unique_lock lock(mu_);
    entries_.clear();
    report = RestoreReport{};
    report.error = e.what();
    return report;
  }
  std::unique_lock lock(mu_);
  entries_ = std::move(restored);
  report.ok = true;
  return report;
}

RiskSweeper::RiskSweeper(RiskEngine& engine, Duration interval, std::function<TimePoint()> now)
    : thread_([this, &engine, interval, now = std::move(now)](std::stop_token stop) {
        std::mutex m;
        std::condition_variable_any cv;
        std::unique_lock lock(m);
        while (!stop.stop_requested()) {
          cv.wait_for(lock, stop, interval, [] { return false; });
          if (stop.stop_requested()) break;
          engine.sweep(now());
          runs_.fetch_add(1);
        }
      }) {}

RiskSweeper::~RiskSweeper() {
  thread_.request_stop();
}

}  // namespace prism::risk
