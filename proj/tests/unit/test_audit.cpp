#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "prism/audit/audit_log.hpp"
#include "prism/audit/crypto.hpp"

namespace fs = std::filesystem;
using namespace prism::audit;

namespace {

const std::string kKey = "unit-test-key";

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("prism-audit-" + std::to_string(::getpid()) + "-" + std::to_string(counter_++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

AuditLogOptions opts() {
  AuditLogOptions o;
  o.key = kKey;
  int tick = 0;
  o.clock = [tick]() mutable { return "2026-01-01T00:00:00." + std::to_string(100 + tick++) + "Z"; };
  return o;
}

void write_entries(const std::string& path, int n) {
  auto log = AuditLog::open(path, opts());
  for (int i = 0; i < n; ++i) log->append("test", "event", "s1", {{"i", i}});
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : lines) out << l << '\n';
}

class FlakySink : public LineSink {
 public:
  bool up = true;
  std::vector<std::string> lines;
  bool write_line(std::string_view line) override {
    if (!up) return false;
    lines.emplace_back(line);
    return true;
  }
};

}  // namespace

TEST(Crypto, KnownDigests) {
  // FIPS 180-2 "abc" vector and RFC 4231 test case 2.
  EXPECT_EQ(to_hex(sha256("abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(to_hex(hmac_sha256("Jefe", "what do ya want for nothing?")),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
  Digest d{};
  EXPECT_TRUE(from_hex(to_hex(sha256("x")), d));
  EXPECT_TRUE(digest_equal(d, sha256("x")));
  EXPECT_FALSE(from_hex("zz", d));
}

TEST(AuditLog, FirstEntryUsesGenesis) {
  TempDir dir;
  auto log = AuditLog::open(dir.file("a.log"), opts());
  const auto e = log->append("test", "start", std::nullopt, {{"k", "v"}});
  EXPECT_EQ(e.seq, 0U);
  EXPECT_EQ(e.prev_hash, std::string(64, '0'));
  EXPECT_EQ(e.payload_hash, to_hex(sha256(R"({"k":"v"})")));
}

TEST(AuditLog, CleanChainVerifies) {
  TempDir dir;
  const auto path = dir.file("a.log");
  write_entries(path, 3);
  const auto r = verify_chain_file(path, kKey);
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(r.entries_checked, 3U);
  EXPECT_FALSE(r.first_break.has_value());
}

TEST(AuditLog, AnchorEveryTenEntries) {
  TempDir dir;
  const auto path = dir.file("a.log");
  write_entries(path, 10);
  const auto lines = read_lines(path);
  ASSERT_EQ(lines.size(), 11U);
  EXPECT_NE(lines.back().find("\"record_kind\":\"anchor\""), std::string::npos);
  EXPECT_NE(lines.back().find("\"at_seq\":9"), std::string::npos);
}

TEST(AuditLog, MutatedPayloadIsHashMismatch) {
  TempDir dir;
  const auto path = dir.file("a.log");
  write_entries(path, 3);
  auto lines = read_lines(path);
  const auto pos = lines[2].find("{\"i\":2}");
  ASSERT_NE(pos, std::string::npos);
  lines[2].replace(pos, 7, "{\"i\":7}");
  write_lines(path, lines);
  const auto r = verify_chain_file(path, kKey);
  ASSERT_FALSE(r.ok);
  EXPECT_EQ(r.first_break->seq, 2U);
  EXPECT_EQ(r.first_break->failure, FailureKind::hash_mismatch);
}

TEST(AuditLog, DeletedEntryIsGap) {
  TempDir dir;
  const auto path = dir.file("a.log");
  write_entries(path, 5);
  auto lines = read_lines(path);
  lines.erase(lines.begin() + 2);
  write_lines(path, lines);
  const auto r = verify_chain_file(path, kKey);
  ASSERT_FALSE(r.ok);
  EXPECT_EQ(r.first_break->seq, 2U);
  EXPECT_EQ(r.first_break->failure, FailureKind::gap);
}

TEST(AuditLog, WrongKeyIsMacMismatch) {
  TempDir dir;
  const auto path = dir.file("a.log");
  write_entries(path, 2);
  const auto r = verify_chain_file(path, "other-key");
  ASSERT_FALSE(r.ok);
  EXPECT_EQ(r.first_break->seq, 0U);
  EXPECT_EQ(r.first_break->failure, FailureKind::mac_mismatch);
}

TEST(AuditLog, UnreadableRecordReportsItsSeq) {
  TempDir dir;
  const auto path = dir.file("a.log");
  write_entries(path, 4);
  auto lines = read_lines(path);
  lines[1] = "{not json";
  write_lines(path, lines);
  const auto r = verify_chain_file(path, kKey);
  ASSERT_FALSE(r.ok);
  EXPECT_EQ(r.first_break->seq, 1U);
}

TEST(AuditLog, TwoHundredEntriesWithAnchors) {
  TempDir dir;
  const auto path = dir.file("a.log");
  write_entries(path, 200);
  const auto chain = verify_chain_file(path, kKey);
  EXPECT_TRUE(chain.ok);
  EXPECT_EQ(chain.entries_checked, 200U);
  const auto anchored = verify_with_anchors_file(path, kKey);
  EXPECT_TRUE(anchored.ok);
  EXPECT_EQ(anchored.anchors_checked, 20U);
}

TEST(AuditLog, FlippedAnchorMac) {
  TempDir dir;
  const auto path = dir.file("a.log");
  write_entries(path, 20);
  auto lines = read_lines(path);
  // Line 10 is the first anchor (after entries 0..9).
  auto& anchor = lines[10];
  const auto pos = anchor.find("\"anchor_mac\":\"") + 14;
  anchor[pos] = anchor[pos] == 'a' ? 'b' : 'a';
  write_lines(path, lines);
  EXPECT_TRUE(verify_chain_file(path, kKey).ok);
  const auto r = verify_with_anchors_file(path, kKey);
  ASSERT_FALSE(r.ok);
  EXPECT_EQ(r.first_break->failure, FailureKind::anchor_mismatch);
  EXPECT_EQ(r.first_break->seq, 9U);
}

TEST(AuditLog, TruncationAfterLastAnchorIsGap) {
  TempDir dir;
  const auto path = dir.file("a.log");
  write_entries(path, 25);
  auto lines = read_lines(path);
  // 25 entries + 2 anchors; drop the last 3 entries (seq 22..24).
  lines.resize(lines.size() - 3);
  write_lines(path, lines);
  EXPECT_TRUE(verify_chain_file(path, kKey).ok);
  const auto r = verify_with_anchors_file(path, kKey);
  ASSERT_FALSE(r.ok);
  EXPECT_EQ(r.first_break->failure, FailureKind::gap);
  EXPECT_EQ(r.first_break->seq, 22U);
}

TEST(AuditLog, ResumeContinuesChain) {
  TempDir dir;
  const auto path = dir.file("a.log");
  write_entries(path, 7);
  write_entries(path, 7);
  const auto r = verify_with_anchors_file(path, kKey);
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(r.entries_checked, 14U);
  EXPECT_EQ(r.anchors_checked, 1U);
}

TEST(AuditLog, SecondWriterRejected) {
  TempDir dir;
  const auto path = dir.file("a.log");
  auto first = AuditLog::open(path, opts());
  EXPECT_THROW(AuditLog::open(path, opts()), WriterConflict);
}

TEST(AuditLog, SinkDownBuffersAndRecovers) {
  auto sink = std::make_unique<FlakySink>();
  FlakySink* raw = sink.get();
  AuditLogOptions o = opts();
  o.buffer_limit = 3;
  AuditLog log(std::move(sink), o);
  raw->up = false;
  for (int i = 0; i < 5; ++i) log.record("test", "e", std::nullopt, {{"i", i}});
  EXPECT_EQ(log.buffered(), 3U);
  EXPECT_EQ(log.lost_records(), 2U);
  EXPECT_GE(log.degradation_events(), 5U);
  raw->up = true;
  log.record("test", "e", std::nullopt, {{"i", 5}});
  EXPECT_EQ(log.buffered(), 0U);
  EXPECT_EQ(raw->lines.size(), 4U);
}

TEST(AuditLog, TailReturnsLastEntriesInOrder) {
  TempDir dir;
  const auto path = dir.file("a.log");
  write_entries(path, 12);
  const auto t = tail(path, 3);
  ASSERT_EQ(t.size(), 3U);
  EXPECT_EQ(t[0].seq, 9U);
  EXPECT_EQ(t[2].seq, 11U);
}

TEST(AuditLog, ChainDigestIsPureFunctionOfPayloads) {
  auto run = [] {
    auto sink = std::make_unique<FlakySink>();
    FlakySink* raw = sink.get();
    AuditLog log(std::move(sink), opts());
    for (int i = 0; i < 5; ++i) log.append("a", "e", "s", {{"i", i}});
    return raw->lines;
  };
  EXPECT_EQ(run(), run());
}
