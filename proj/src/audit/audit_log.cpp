#include "prism/audit/audit_log.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace prism::audit {

std::string_view to_string(FailureKind k) {
  switch (k) {
    case FailureKind::hash_mismatch: return "hash_mismatch";
    case FailureKind::mac_mismatch: return "mac_mismatch";
    case FailureKind::gap: return "gap";
    case FailureKind::anchor_mismatch: return "anchor_mismatch";
  }
  return "gap";
}

// ---------------------------------------------------------------- sinks

void MemorySink::record(std::string_view actor, std::string_view event_type, std::optional<std::string> session,
                        Json payload) noexcept {
  try {
    std::lock_guard<std::mutex> lock(mu_);
    events_.push_back({std::string(actor), std::string(event_type), std::move(session), std::move(payload)});
  } catch (...) {
  }
}

std::vector<MemorySink::Event> MemorySink::events() const {
  std::lock_guard<std::mutex> lock(mu_);
  return events_;
}

std::size_t MemorySink::count(std::string_view event_type) const {
  std::lock_guard<std::mutex> lock(mu_);
  std::size_t n = 0;
  for (const auto& e : events_) n += e.event_type == event_type ? 1 : 0;
  return n;
}

void MemorySink::clear() {
  std::lock_guard<std::mutex> lock(mu_);
  events_.clear();
}

FileLineSink::FileLineSink(std::string path, bool fsync_each) : path_(std::move(path)), fsync_each_(fsync_each) {
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0600);
}

FileLineSink::~FileLineSink() {
  if (fd_ >= 0) ::close(fd_);
}

bool FileLineSink::write_line(std::string_view line) {
  if (fd_ < 0) {
    fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0600);
    if (fd_ < 0) return false;
  }
  std::string buf(line);
  buf.push_back('\n');
  // O_APPEND with a single write keeps each record contiguous
  const ssize_t n = ::write(fd_, buf.data(), buf.size());
  if (n != static_cast<ssize_t>(buf.size())) return false;
  if (fsync_each_) ::fsync(fd_);
  return true;
}

// ---------------------------------------------------------------- encoding

std::string canonical_json(const Json& value) { return value.dump(-1, ' ', false, Json::error_handler_t::replace); }

std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms % 1000));
  return buf;
}

namespace {

std::string mac_input(const AuditEntry& e) {
  Json j = {{"seq", e.seq},
            {"timestamp", e.timestamp},
            {"actor", e.actor},
            {"event_type", e.event_type},
            {"session", e.session ? Json(*e.session) : Json(nullptr)},
            {"payload_hash", e.payload_hash},
            {"prev_hash", e.prev_hash}};
  return canonical_json(j);
}

Digest chain_digest(const std::string& mac_in, const std::string& mac_hex) { return sha256(mac_in + "|" + mac_hex); }

Digest fold_cumulative(const Digest& cumulative, const Digest& digest) {
  std::string buf(reinterpret_cast<const char*>(cumulative.data()), cumulative.size());
  buf.append(reinterpret_cast<const char*>(digest.data()), digest.size());
  return sha256(buf);
}

std::string anchor_mac_input(std::uint64_t at_seq, const std::string& cumulative_hex) {
  return "anchor|" + std::to_string(at_seq) + "|" + cumulative_hex;
}

std::string head_mac_input(std::uint64_t next_seq, const std::string& digest_hex) {
  return "head|" + std::to_string(next_seq) + "|" + digest_hex;
}

Json::object_t::size_type field_count(const Json& j) { return j.is_object() ? j.size() : 0; }

bool parse_entry(const Json& j, AuditEntry& e) {
  if (field_count(j) != 9) return false;
  const auto seq = j.find("seq");
  if (seq == j.end() || !seq->is_number_unsigned()) return false;
  e.seq = seq->get<std::uint64_t>();
  auto str = [&](const char* name, std::string& out) {
    const auto it = j.find(name);
    if (it == j.end() || !it->is_string()) return false;
    out = it->get<std::string>();
    return true;
  };
  if (!str("timestamp", e.timestamp) || !str("actor", e.actor) || !str("event_type", e.event_type) ||
      !str("payload_hash", e.payload_hash) || !str("prev_hash", e.prev_hash) || !str("entry_mac", e.entry_mac)) {
    return false;
  }
  const auto session = j.find("session");
  if (session == j.end()) return false;
  if (session->is_null()) {
    e.session.reset();
  } else if (session->is_string()) {
    e.session = session->get<std::string>();
  } else {
    return false;
  }
  const auto payload = j.find("payload");
  if (payload == j.end()) return false;
  e.payload = *payload;
  return true;
}

bool parse_anchor(const Json& j, Anchor& a) {
  if (field_count(j) != 3) return false;
  const auto at = j.find("at_seq");
  const auto cum = j.find("cumulative_digest");
  const auto mac = j.find("anchor_mac");
  if (at == j.end() || !at->is_number_unsigned() || cum == j.end() || !cum->is_string() || mac == j.end() ||
      !mac->is_string()) {
    return false;
  }
  a.at_seq = at->get<std::uint64_t>();
  a.cumulative_digest = cum->get<std::string>();
  a.anchor_mac = mac->get<std::string>();
  return true;
}

struct Walk {
  VerificationReport report;
  ChainState state;
  bool anchor_pending = false;
  std::uint64_t pending_at = 0;
};

void fail(Walk& w, std::uint64_t seq, FailureKind kind, std::string detail) {
  w.report.ok = false;
  w.report.first_break = ChainBreak{seq, kind, std::move(detail)};
}

// Single pass over the log; stops at the first break.
Walk walk_log(std::istream& in, std::string_view key, bool check_anchors, std::size_t interval) {
  Walk w;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::uint64_t expected = w.state.next_seq;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      fail(w, expected, FailureKind::gap, "unreadable record at line " + std::to_string(line_no));
      return w;
    }
    const auto kind_it = j.find("record_kind");
    const std::string kind = kind_it != j.end() && kind_it->is_string() ? kind_it->get<std::string>() : "";
    if (kind == "entry") {
      if (check_anchors && w.anchor_pending) {
        fail(w, w.pending_at, FailureKind::anchor_mismatch, "anchor missing after seq " + std::to_string(w.pending_at));
        return w;
      }
      AuditEntry e;
      Json body = j;
      body.erase("record_kind");
      if (!parse_entry(body, e)) {
        fail(w, expected, FailureKind::gap, "unreadable entry at line " + std::to_string(line_no));
        return w;
      }
      if (e.seq != expected) {
        fail(w, expected, FailureKind::gap,
             "expected seq " + std::to_string(expected) + ", found " + std::to_string(e.seq));
        return w;
      }
      if (e.payload_hash != to_hex(sha256(canonical_json(e.payload)))) {
        fail(w, expected, FailureKind::hash_mismatch, "payload hash does not match payload");
        return w;
      }
      if (e.prev_hash != to_hex(w.state.last_digest)) {
        fail(w, expected, FailureKind::hash_mismatch, "prev_hash does not link to the previous entry");
        return w;
      }
      const std::string input = mac_input(e);
      Digest mac{};
      if (!from_hex(e.entry_mac, mac) || !digest_equal(mac, hmac_sha256(key, input))) {
        fail(w, expected, FailureKind::mac_mismatch, "entry MAC does not verify");
        return w;
      }
      const Digest digest = chain_digest(input, e.entry_mac);
      w.state.last_digest = digest;
      w.state.cumulative = fold_cumulative(w.state.cumulative, digest);
      w.state.next_seq = expected + 1;
      ++w.report.entries_checked;
      if (interval > 0 && w.state.next_seq % interval == 0) {
        w.anchor_pending = true;
        w.pending_at = expected;
      }
    } else if (kind == "anchor") {
      Anchor a;
      Json body = j;
      body.erase("record_kind");
      if (!parse_anchor(body, a)) {
        fail(w, expected == 0 ? 0 : expected - 1, check_anchors ? FailureKind::anchor_mismatch : FailureKind::gap,
             "unreadable anchor at line " + std::to_string(line_no));
        return w;
      }
      if (!check_anchors) continue;
      if (!w.anchor_pending || a.at_seq != w.pending_at) {
        fail(w, a.at_seq, FailureKind::anchor_mismatch, "anchor at unexpected position");
        return w;
      }
      Digest mac{};
      if (a.cumulative_digest != to_hex(w.state.cumulative)) {
        fail(w, a.at_seq, FailureKind::anchor_mismatch, "cumulative digest does not match the chain");
        return w;
      }
      if (!from_hex(a.anchor_mac, mac) ||
          !digest_equal(mac, hmac_sha256(key, anchor_mac_input(a.at_seq, a.cumulative_digest)))) {
        fail(w, a.at_seq, FailureKind::anchor_mismatch, "anchor MAC does not verify");
        return w;
      }
      w.anchor_pending = false;
      ++w.report.anchors_checked;
    } else {
      fail(w, expected, FailureKind::gap, "unknown record kind at line " + std::to_string(line_no));
      return w;
    }
  }
  return w;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Json entry_to_json(const AuditEntry& e) {
  nlohmann::ordered_json j;
  j["record_kind"] = "entry";
  j["seq"] = e.seq;
  j["timestamp"] = e.timestamp;
  j["actor"] = e.actor;
  j["event_type"] = e.event_type;
  j["session"] = e.session ? nlohmann::ordered_json(*e.session) : nlohmann::ordered_json(nullptr);
  j["payload"] = nlohmann::ordered_json::parse(e.payload.dump());
  j["payload_hash"] = e.payload_hash;
  j["prev_hash"] = e.prev_hash;
  j["entry_mac"] = e.entry_mac;
  return Json::parse(j.dump());
}

namespace {

// Keeps the field order of the on-disk format stable and readable.
std::string serialize_entry(const AuditEntry& e) {
  nlohmann::ordered_json j;
  j["record_kind"] = "entry";
  j["seq"] = e.seq;
  j["timestamp"] = e.timestamp;
  j["actor"] = e.actor;
  j["event_type"] = e.event_type;
  j["session"] = e.session ? nlohmann::ordered_json(*e.session) : nlohmann::ordered_json(nullptr);
  j["payload"] = nlohmann::ordered_json::parse(canonical_json(e.payload));
  j["payload_hash"] = e.payload_hash;
  j["prev_hash"] = e.prev_hash;
  j["entry_mac"] = e.entry_mac;
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

std::string serialize_anchor(const Anchor& a) {
  nlohmann::ordered_json j;
  j["record_kind"] = "anchor";
  j["at_seq"] = a.at_seq;
  j["cumulative_digest"] = a.cumulative_digest;
  j["anchor_mac"] = a.anchor_mac;
  return j.dump();
}

}  // namespace

// ---------------------------------------------------------------- writer

AuditLog::AuditLog(std::unique_ptr<LineSink> sink, AuditLogOptions options, ChainState resume)
    : sink_(std::move(sink)), options_(std::move(options)), state_(resume) {
  if (!options_.clock) options_.clock = utc_timestamp_now;
  if (options_.key.empty()) throw std::invalid_argument("audit MAC key must not be empty");
}

AuditLog::~AuditLog() {
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
  }
}

std::unique_ptr<AuditLog> AuditLog::open(const std::string& path, AuditLogOptions options) {
  const std::string lock_path = path + ".lock";
  const int lock_fd = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0600);
  if (lock_fd < 0) throw std::runtime_error("cannot open audit lock file " + lock_path);
  if (::flock(lock_fd, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd);
    throw WriterConflict("audit log " + path + " already has a writer");
  }

  ChainState resume;
  bool missing_anchor = false;
  std::uint64_t missing_at = 0;
  if (std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    Walk w = walk_log(in, options.key, true, options.anchor_interval);
    if (!w.report.ok) {
      ::flock(lock_fd, LOCK_UN);
      ::close(lock_fd);
      throw std::runtime_error("existing audit log " + path + " does not verify at seq " +
                               std::to_string(w.report.first_break->seq) + ": " + w.report.first_break->detail);
    }
    resume = w.state;
    missing_anchor = w.anchor_pending;
    missing_at = w.pending_at;
  }

  auto log = std::make_unique<AuditLog>(std::make_unique<FileLineSink>(path), std::move(options), resume);
  log->lock_fd_ = lock_fd;
  log->head_path_ = path + ".head";
  if (missing_anchor) {
    std::lock_guard<std::mutex> lock(log->mu_);
    const std::string cum = to_hex(log->state_.cumulative);
    log->pending_.push_back(
        serialize_anchor({missing_at, cum, to_hex(hmac_sha256(log->options_.key, anchor_mac_input(missing_at, cum)))}));
    log->flush_locked();
  }
  return log;
}

AuditEntry AuditLog::append(std::string_view actor, std::string_view event_type, std::optional<std::string> session,
                            Json payload) {
  std::lock_guard<std::mutex> lock(mu_);
  AuditEntry e;
  e.seq = state_.next_seq;
  e.timestamp = options_.clock();
  e.actor = actor;
  e.event_type = event_type;
  e.session = std::move(session);
  e.payload = std::move(payload);
  e.payload_hash = to_hex(sha256(canonical_json(e.payload)));
  e.prev_hash = to_hex(state_.last_digest);
  const std::string input = mac_input(e);
  e.entry_mac = to_hex(hmac_sha256(options_.key, input));

  const Digest digest = chain_digest(input, e.entry_mac);
  state_.last_digest = digest;
  state_.cumulative = fold_cumulative(state_.cumulative, digest);
  state_.next_seq = e.seq + 1;

  pending_.push_back(serialize_entry(e));
  if (options_.anchor_interval > 0 && state_.next_seq % options_.anchor_interval == 0) {
    const std::string cum = to_hex(state_.cumulative);
    pending_.push_back(serialize_anchor({e.seq, cum, to_hex(hmac_sha256(options_.key, anchor_mac_input(e.seq, cum)))}));
  }
  flush_locked();
  return e;
}

void AuditLog::record(std::string_view actor, std::string_view event_type, std::optional<std::string> session,
                      Json payload) noexcept {
  try {
    append(actor, event_type, std::move(session), std::move(payload));
  } catch (...) {
    std::lock_guard<std::mutex> lock(mu_);
    ++degradation_events_;
  }
}

void AuditLog::flush_locked() {
  bool wrote = false;
  while (!pending_.empty()) {
    bool ok = false;
    try {
      ok = sink_->write_line(pending_.front());
    } catch (...) {
      ok = false;
    }
    if (!ok) {
      ++degradation_events_;
      break;
    }
    pending_.pop_front();
    wrote = true;
  }
  while (pending_.size() > options_.buffer_limit) {
    pending_.pop_front();
    ++lost_records_;
  }
  if (wrote && pending_.empty()) write_head_locked();
}

void AuditLog::write_head_locked() {
  if (head_path_.empty()) return;
  const std::string digest = to_hex(state_.last_digest);
  nlohmann::ordered_json head;
  head["next_seq"] = state_.next_seq;
  head["last_digest"] = digest;
  head["head_mac"] = to_hex(hmac_sha256(options_.key, head_mac_input(state_.next_seq, digest)));
  const std::string tmp = head_path_ + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << head.dump() << '\n';
    if (!out) return;
  }
  std::error_code ec;
  std::filesystem::rename(tmp, head_path_, ec);
}

std::uint64_t AuditLog::next_seq() const {
  std::lock_guard<std::mutex> lock(mu_);
  return state_.next_seq;
}

std::size_t AuditLog::buffered() const {
  std::lock_guard<std::mutex> lock(mu_);
  return pending_.size();
}

std::uint64_t AuditLog::degradation_events() const {
  std::lock_guard<std::mutex> lock(mu_);
  return degradation_events_;
}

std::uint64_t AuditLog::lost_records() const {
  std::lock_guard<std::mutex> lock(mu_);
  return lost_records_;
}

// ---------------------------------------------------------------- verification

VerificationReport verify_chain(std::istream& log, std::string_view key) {
  return walk_log(log, key, false, 0).report;
}

VerificationReport verify_chain_file(const std::string& path, std::string_view key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    VerificationReport r;
    r.ok = false;
    r.first_break = ChainBreak{0, FailureKind::gap, "cannot open " + path};
    return r;
  }
  return verify_chain(in, key);
}

VerificationReport verify_with_anchors(std::istream& log, std::string_view key, const AnchorOptions& options) {
  Walk w = walk_log(log, key, true, options.anchor_interval);
  if (!w.report.ok) return w.report;
  if (options.expected_entries && w.state.next_seq < *options.expected_entries) {
    fail(w, w.state.next_seq, FailureKind::gap,
         "log ends at seq " + std::to_string(w.state.next_seq) + " but " + std::to_string(*options.expected_entries) +
             " entries were written");
    return w.report;
  }
  if (w.anchor_pending) {
    fail(w, w.pending_at, FailureKind::anchor_mismatch, "anchor missing after seq " + std::to_string(w.pending_at));
  }
  return w.report;
}

VerificationReport verify_with_anchors_file(const std::string& path, std::string_view key, AnchorOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    VerificationReport r;
    r.ok = false;
    r.first_break = ChainBreak{0, FailureKind::gap, "cannot open " + path};
    return r;
  }
  const std::string head_path = path + ".head";
  if (!options.expected_entries && std::filesystem::exists(head_path)) {
    const Json head = Json::parse(read_text(head_path), nullptr, false);
    bool head_ok = false;
    if (head.is_object() && head.contains("next_seq") && head["next_seq"].is_number_unsigned() &&
        head.contains("last_digest") && head["last_digest"].is_string() && head.contains("head_mac") &&
        head["head_mac"].is_string()) {
      const auto next = head["next_seq"].get<std::uint64_t>();
      Digest mac{};
      if (from_hex(head["head_mac"].get<std::string>(), mac) &&
          digest_equal(mac, hmac_sha256(key, head_mac_input(next, head["last_digest"].get<std::string>())))) {
        options.expected_entries = next;
        head_ok = true;
      }
    }
    if (!head_ok) {
      VerificationReport r;
      r.ok = false;
      r.first_break = ChainBreak{0, FailureKind::anchor_mismatch, "head record " + head_path + " does not verify"};
      return r;
    }
  }
  return verify_with_anchors(in, key, options);
}

std::vector<AuditEntry> tail(const std::string& path, std::size_t n) {
  std::ifstream in(path, std::ios::binary);
  std::deque<AuditEntry> last;
  std::string line;
  while (std::getline(in, line)) {
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("record_kind", "") != "entry") continue;
    j.erase("record_kind");
    AuditEntry e;
    if (!parse_entry(j, e)) continue;
    last.push_back(std::move(e));
    if (last.size() > n) last.pop_front();
  }
  return {last.begin(), last.end()};
}

std::optional<std::string> load_key(const std::string& env_var, const std::string& key_file) {
  if (!env_var.empty()) {
    if (const char* v = std::getenv(env_var.c_str()); v != nullptr && *v != '\0') return std::string(v);
  }
  if (!key_file.empty() && std::filesystem::exists(key_file)) {
    std::string key = read_text(key_file);
    while (!key.empty() && (key.back() == '\n' || key.back() == '\r' || key.back() == ' ')) key.pop_back();
    if (!key.empty()) return key;
  }
  return std::nullopt;
}

}  // namespace prism::audit
