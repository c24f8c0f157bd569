#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prism/audit/crypto.hpp"

namespace prism::audit {

using Json = nlohmann::json;

struct AuditEntry {
  std::uint64_t seq = 0;
  std::string timestamp;
  std::string actor;
  std::string event_type;
  std::optional<std::string> session;
  Json payload;
  std::string payload_hash;
  std::string prev_hash;
  std::string entry_mac;
};

struct Anchor {
  std::uint64_t at_seq = 0;
  std::string cumulative_digest;
  std::string anchor_mac;
};

enum class FailureKind { hash_mismatch, mac_mismatch, gap, anchor_mismatch };
std::string_view to_string(FailureKind k);

struct ChainBreak {
  std::uint64_t seq = 0;
  FailureKind failure = FailureKind::gap;
  std::string detail;
};

struct VerificationReport {
  bool ok = true;
  std::size_t entries_checked = 0;
  std::size_t anchors_checked = 0;
  std::optional<ChainBreak> first_break;
};

// Where hooks, proxy and monitor send audit events. Implementations must not
// throw: enforcement never waits on, or fails because of, audit delivery.
class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void record(std::string_view actor, std::string_view event_type, std::optional<std::string> session,
                      Json payload) noexcept = 0;
};

// Collects events in memory; used by tests and the benchmark harness.
class MemorySink final : public EventSink {
 public:
  struct Event {
    std::string actor;
    std::string event_type;
    std::optional<std::string> session;
    Json payload;
  };

  void record(std::string_view actor, std::string_view event_type, std::optional<std::string> session,
              Json payload) noexcept override;

  std::vector<Event> events() const;
  std::size_t count(std::string_view event_type) const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<Event> events_;
};

class NullSink final : public EventSink {
 public:
  void record(std::string_view, std::string_view, std::optional<std::string>, Json) noexcept override {}
};

// Persistence target for serialized records.
class LineSink {
 public:
  virtual ~LineSink() = default;
  // false when the sink is currently unavailable; the line is retried later.
  virtual bool write_line(std::string_view line) = 0;
};

class FileLineSink final : public LineSink {
 public:
  explicit FileLineSink(std::string path, bool fsync_each = false);
  ~FileLineSink() override;
  FileLineSink(const FileLineSink&) = delete;
  FileLineSink& operator=(const FileLineSink&) = delete;

  bool write_line(std::string_view line) override;

 private:
  std::string path_;
  bool fsync_each_;
  int fd_ = -1;
};

// Chain position needed to continue an existing log.
struct ChainState {
  std::uint64_t next_seq = 0;
  Digest last_digest = kZeroDigest;
  Digest cumulative = kZeroDigest;
};

struct AuditLogOptions {
  std::string key;
  std::size_t anchor_interval = 10;
  std::size_t buffer_limit = 1000;
  // Returns an RFC 3339 UTC timestamp; defaults to the system clock.
  std::function<std::string()> clock;
};

class WriterConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AuditLog final : public EventSink {
 public:
  AuditLog(std::unique_ptr<LineSink> sink, AuditLogOptions options, ChainState resume = {});
  ~AuditLog() override;

  // Opens (or creates) a log file as its single writer and resumes the chain.
  // Throws WriterConflict when another writer holds the log, and
  // std::runtime_error when the existing log does not verify.
  static std::unique_ptr<AuditLog> open(const std::string& path, AuditLogOptions options);

  AuditEntry append(std::string_view actor, std::string_view event_type, std::optional<std::string> session,
                    Json payload);

  void record(std::string_view actor, std::string_view event_type, std::optional<std::string> session,
              Json payload) noexcept override;

  std::uint64_t next_seq() const;
  std::size_t buffered() const;
  std::uint64_t degradation_events() const;
  std::uint64_t lost_records() const;

 private:
  void flush_locked();
  void write_head_locked();

  mutable std::mutex mu_;
  std::unique_ptr<LineSink> sink_;
  AuditLogOptions options_;
  ChainState state_;
  std::deque<std::string> pending_;
  std::uint64_t degradation_events_ = 0;
  std::uint64_t lost_records_ = 0;
  std::string head_path_;
  int lock_fd_ = -1;
};

std::string canonical_json(const Json& value);
std::string utc_timestamp_now();

// Checks sequence density, payload hashes, hash linkage and every entry MAC.
// Anchor records must parse but are otherwise ignored.
VerificationReport verify_chain(std::istream& log, std::string_view key);
VerificationReport verify_chain_file(const std::string& path, std::string_view key);

struct AnchorOptions {
  std::size_t anchor_interval = 10;
  // Expected total entry count, e.g. from the writer's head record; a shorter
  // log is reported as a gap at the first missing seq.
  std::optional<std::uint64_t> expected_entries;
};

VerificationReport verify_with_anchors(std::istream& log, std::string_view key, const AnchorOptions& options = {});
// Reads `<path>.head` (when present) for the expected tail.
VerificationReport verify_with_anchors_file(const std::string& path, std::string_view key,
                                            AnchorOptions options = {});

// Last n entries in seq order (anchors skipped, unreadable lines skipped).
std::vector<AuditEntry> tail(const std::string& path, std::size_t n);

Json entry_to_json(const AuditEntry& e);

// Loads the MAC key from an environment variable, falling back to a key file.
std::optional<std::string> load_key(const std::string& env_var, const std::string& key_file);

}  // namespace prism::audit
