#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <stop_token>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "gls/canonical_json.hpp"
#include "gls/crypto.hpp"
#include "gls/device.hpp"
#include "gls/error.hpp"
#include "gls/schedule.hpp"

namespace gls {

inline constexpr std::string_view kLedgerHeader = "psb-ledger v1";

/// A consortium participant; `auth_key` is the shared MAC secret.
struct Member {
  std::string member_id;
  std::string auth_key;
};

enum class TxKind { RegisterDevice, RecordSchedule, RecordUsage };

constexpr std::string_view to_string(TxKind k) noexcept {
  switch (k) {
    case TxKind::RegisterDevice: return "RegisterDevice";
    case TxKind::RecordSchedule: return "RecordSchedule";
    case TxKind::RecordUsage: return "RecordUsage";
  }
  return "";
}

inline TxKind tx_kind_from_string(std::string_view s) {
  if (s == "RegisterDevice") return TxKind::RegisterDevice;
  if (s == "RecordSchedule") return TxKind::RecordSchedule;
  if (s == "RecordUsage") return TxKind::RecordUsage;
  throw Error(ErrorKind::Validation, "unknown transaction kind '" + std::string(s) + "'");
}

struct Transaction {
  Hash tx_id{};
  std::string member_id;
  TxKind kind = TxKind::RecordSchedule;
  Json payload;
  Hash prev_block_hash{};  // chain tip the submitter signed against
  Hash auth_tag{};

  static std::string auth_message(std::string_view member_id, TxKind kind, const Json& payload,
                                  const Hash& prev_block_hash) {
    return canonical_dump(Json{{"member_id", member_id},
                               {"kind", to_string(kind)},
                               {"payload", payload},
                               {"prev_block_hash", to_hex(prev_block_hash)}});
  }

  Hash compute_id() const {
    return sha256(canonical_dump(Json{{"member_id", member_id},
                                      {"kind", to_string(kind)},
                                      {"payload", payload},
                                      {"prev_block_hash", to_hex(prev_block_hash)},
                                      {"auth_tag", to_hex(auth_tag)}}));
  }

  static Transaction sign(const Member& member, TxKind kind, Json payload, const Hash& prev_block_hash) {
    Transaction tx;
    tx.member_id = member.member_id;
    tx.kind = kind;
    tx.payload = std::move(payload);
    tx.prev_block_hash = prev_block_hash;
    tx.auth_tag = hmac_sha256(member.auth_key, auth_message(tx.member_id, kind, tx.payload, prev_block_hash));
    tx.tx_id = tx.compute_id();
    return tx;
  }

  Json to_json() const {
    return Json{{"tx_id", to_hex(tx_id)},
                {"member_id", member_id},
                {"kind", to_string(kind)},
                {"payload", payload},
                {"prev_block_hash", to_hex(prev_block_hash)},
                {"auth_tag", to_hex(auth_tag)}};
  }

  static Transaction from_json(const Json& j) {
    Transaction tx;
    tx.tx_id = detail::require_hash(j, "tx_id");
    tx.member_id = detail::require_string(j, "member_id");
    tx.kind = tx_kind_from_string(detail::require_string(j, "kind"));
    tx.payload = detail::require(j, "payload");
    tx.prev_block_hash = detail::require_hash(j, "prev_block_hash");
    tx.auth_tag = detail::require_hash(j, "auth_tag");
    return tx;
  }
};

struct LedgerBlock {
  std::uint64_t height = 0;
  Hash prev_hash{};
  std::int64_t timestamp = 0;
  std::vector<Transaction> txs;
  Hash state_root{};
  Hash block_hash{};

  Json body_json() const {
    Json txs_json = Json::array();
    for (const auto& tx : txs) txs_json.push_back(tx.to_json());
    return Json{{"height", height},
                {"prev_hash", to_hex(prev_hash)},
                {"timestamp", timestamp},
                {"state_root", to_hex(state_root)},
                {"txs", txs_json}};
  }

  Hash compute_hash() const { return sha256(canonical_dump(body_json())); }

  Json to_json() const {
    Json j = body_json();
    j["block_hash"] = to_hex(block_hash);
    return j;
  }

  static LedgerBlock from_json(const Json& j) {
    LedgerBlock b;
    const Json& height = detail::require(j, "height");
    if (!height.is_number_unsigned()) throw Error(ErrorKind::Validation, "block height must be unsigned");
    b.height = height.get<std::uint64_t>();
    b.prev_hash = detail::require_hash(j, "prev_hash");
    const Json& ts = detail::require(j, "timestamp");
    if (!ts.is_number_integer()) throw Error(ErrorKind::Validation, "block timestamp must be an integer");
    b.timestamp = ts.get<std::int64_t>();
    b.state_root = detail::require_hash(j, "state_root");
    b.block_hash = detail::require_hash(j, "block_hash");
    const Json& txs = detail::require(j, "txs");
    if (!txs.is_array()) throw Error(ErrorKind::Validation, "block txs must be an array");
    for (const auto& tj : txs) b.txs.push_back(Transaction::from_json(tj));
    if (j.size() != 6) throw Error(ErrorKind::Validation, "unexpected fields in block");
    return b;
  }
};

struct ScheduleRecord {
  DailySchedule schedule;
  std::int64_t client_ts = 0;
  Hash tx_id{};
};

/// Replayable contract state. Every mutation goes through apply(), which
/// either fully succeeds or throws without changing anything.
class ContractState {
 public:
  using ScheduleKey = std::pair<std::string, std::string>;                        // building, date
  using UsageKey = std::tuple<std::string, std::string, int, std::string>;        // building, date, hour, device

  void apply(const Transaction& tx) {
    switch (tx.kind) {
      case TxKind::RegisterDevice: {
        DeviceEndpoint d = device_from_json(tx.payload);
        devices_[d.device_id] = std::move(d);
        break;
      }
      case TxKind::RecordSchedule: {
        const auto& p = tx.payload;
        const Json& ts = detail::require(p, "client_ts");
        if (!ts.is_number_integer()) throw Error(ErrorKind::Validation, "client_ts must be an integer");
        ScheduleRecord rec{schedule_from_json(detail::require(p, "schedule")), ts.get<std::int64_t>(), tx.tx_id};
        ScheduleKey key{rec.schedule.building_id, format_date(rec.schedule.date)};
        if (auto it = schedules_.find(key); it != schedules_.end() && rec.client_ts <= it->second.client_ts)
          throw Error(ErrorKind::Conflict, "stale schedule for " + key.first + " on " + key.second +
                                               ": client_ts " + std::to_string(rec.client_ts) +
                                               " is not later than recorded " +
                                               std::to_string(it->second.client_ts));
        schedules_[key] = std::move(rec);
        break;
      }
      case TxKind::RecordUsage: {
        DispatchRecord r = dispatch_record_from_json(tx.payload);
        auto dev = devices_.find(r.device_id);
        if (dev == devices_.end()) throw Error(ErrorKind::Validation, "usage for unregistered device " + r.device_id);
        if (dev->second.building_id != r.building_id)
          throw Error(ErrorKind::Validation, "device " + r.device_id + " does not belong to " + r.building_id);
        usage_[UsageKey{r.building_id, format_date(r.date), r.hour, r.device_id}] = std::move(r);
        break;
      }
    }
  }

  Json to_json() const {
    Json devices = Json::object();
    for (const auto& [id, d] : devices_) devices[id] = gls::to_json(d);
    Json schedules = Json::array();
    for (const auto& [key, rec] : schedules_)
      schedules.push_back(
          Json{{"client_ts", rec.client_ts}, {"schedule", gls::to_json(rec.schedule)}, {"tx_id", to_hex(rec.tx_id)}});
    Json usage = Json::array();
    for (const auto& [key, r] : usage_) usage.push_back(gls::to_json(r));
    return Json{{"devices", devices}, {"schedules", schedules}, {"usage", usage}};
  }

  Hash root() const { return sha256(canonical_dump(to_json())); }

  const std::map<std::string, DeviceEndpoint>& devices() const noexcept { return devices_; }
  const std::map<ScheduleKey, ScheduleRecord>& schedules() const noexcept { return schedules_; }
  const std::map<UsageKey, DispatchRecord>& usage() const noexcept { return usage_; }

 private:
  std::map<std::string, DeviceEndpoint> devices_;
  std::map<ScheduleKey, ScheduleRecord> schedules_;
  std::map<UsageKey, DispatchRecord> usage_;
};

struct Receipt {
  std::uint64_t height = 0;
  std::size_t tx_index = 0;
  Hash tx_id{};
};

struct Divergence {
  std::uint64_t height = 0;
  std::string reason;
};

struct VerificationReport {
  bool intact = false;
  std::uint64_t blocks_checked = 0;
  std::optional<Divergence> first_divergence;
  Hash replayed_state_root{};
  std::optional<Hash> stored_state_root;

  Json to_json() const {
    Json j{{"status", intact ? "intact" : "corrupted"},
           {"intact", intact},
           {"blocks_checked", blocks_checked},
           {"replayed_state_root", to_hex(replayed_state_root)},
           {"stored_state_root", stored_state_root ? Json(to_hex(*stored_state_root)) : Json(nullptr)}};
    if (first_divergence)
      j["first_divergence"] = Json{{"height", first_divergence->height}, {"reason", first_divergence->reason}};
    else
      j["first_divergence"] = nullptr;
    return j;
  }
};

/// Schedule record plus hour-ordered usage acknowledgments for one building-day.
struct MetricsInputs {
  ScheduleRecord schedule;
  std::vector<DispatchRecord> usage;
};

namespace detail {

struct ReplayResult {
  VerificationReport report;
  std::vector<LedgerBlock> blocks;
  ContractState state;
  std::set<Hash> tx_ids;
};

inline std::map<std::string, std::string> key_table(const std::vector<Member>& members) {
  std::map<std::string, std::string> keys;
  for (const auto& m : members) keys[m.member_id] = m.auth_key;
  return keys;
}

/// Checks one transaction against the chain context. Returns an empty
/// string when valid, otherwise the reason.
inline std::string check_transaction(const Transaction& tx, const std::map<std::string, std::string>& keys,
                                     const Hash& expected_prev) {
  auto key = keys.find(tx.member_id);
  if (key == keys.end()) return "unknown member " + tx.member_id;
  Hash tag = hmac_sha256(key->second, Transaction::auth_message(tx.member_id, tx.kind, tx.payload, tx.prev_block_hash));
  if (!equal_tags(tag, tx.auth_tag)) return "authentication tag mismatch";
  if (tx.prev_block_hash != expected_prev) return "transaction anchored to a different block";
  if (tx.compute_id() != tx.tx_id) return "tx_id mismatch";
  return {};
}

/// Replays a persisted ledger image from the genesis line. Stops at the first
/// divergence; `blocks` and `state` then hold everything before it.
inline ReplayResult replay_bytes(std::string_view bytes, const std::vector<Member>& members) {
  ReplayResult out;
  auto& report = out.report;
  auto diverge = [&](std::uint64_t h, std::string why) {
    report.intact = false;
    report.first_divergence = Divergence{h, std::move(why)};
    report.replayed_state_root = out.state.root();
    return out;
  };
  const auto keys = key_table(members);

  const std::string header = std::string(kLedgerHeader) + "\n";
  if (bytes.substr(0, header.size()) != header) return diverge(0, "missing or altered file header");
  bytes.remove_prefix(header.size());
  if (bytes.empty()) return diverge(0, "missing genesis block");

  Hash prev{};
  std::uint64_t height = 0;
  while (!bytes.empty()) {
    auto eol = bytes.find('\n');
    if (eol == std::string_view::npos) return diverge(height, "truncated block record (no line terminator)");
    std::string_view line = bytes.substr(0, eol);
    bytes.remove_prefix(eol + 1);

    Json j;
    try {
      j = Json::parse(line);
    } catch (const std::exception&) {
      return diverge(height, "block record is not valid JSON");
    }
    std::string canonical;
    try {
      canonical = canonical_dump(j);
    } catch (const std::exception&) {
      return diverge(height, "block record contains non-canonical values");
    }
    if (canonical != line) return diverge(height, "block record is not canonically encoded");

    LedgerBlock block;
    try {
      block = LedgerBlock::from_json(j);
    } catch (const std::exception& e) {
      return diverge(height, std::string("malformed block: ") + e.what());
    }
    if (block.height != height) return diverge(height, "height field does not match position");
    if (block.prev_hash != prev) return diverge(height, "prev_hash does not link to predecessor");
    if (block.compute_hash() != block.block_hash) return diverge(height, "block_hash does not match contents");
    if (height == 0 && !block.txs.empty()) return diverge(height, "genesis block carries transactions");

    ContractState next = out.state;
    for (std::size_t i = 0; i < block.txs.size(); ++i) {
      const auto& tx = block.txs[i];
      if (out.tx_ids.count(tx.tx_id)) return diverge(height, "duplicate tx_id at index " + std::to_string(i));
      if (auto why = check_transaction(tx, keys, prev); !why.empty())
        return diverge(height, "tx " + std::to_string(i) + ": " + why);
      try {
        next.apply(tx);
      } catch (const std::exception& e) {
        return diverge(height, "tx " + std::to_string(i) + " rejected on replay: " + e.what());
      }
      out.tx_ids.insert(tx.tx_id);
    }
    Hash root = next.root();
    if (root != block.state_root) return diverge(height, "state root does not match replayed state");
    out.state = std::move(next);
    report.stored_state_root = block.state_root;
    prev = block.block_hash;
    out.blocks.push_back(std::move(block));
    ++height;
    report.blocks_checked = height;
  }
  report.intact = true;
  report.replayed_state_root = out.state.root();
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

struct LedgerOptions {
  // Append-only block file. Empty keeps the chain in memory only.
  std::filesystem::path path;
  // 0 seals one block per transaction; otherwise pending transactions are
  // sealed together every interval.
  std::chrono::milliseconds block_interval{0};
  std::function<std::int64_t()> clock = [] {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
};

/// Single-sequencer permissioned ledger. All writes are serialized under one
/// exclusive lock; reads share it.
class Ledger {
 public:
  Ledger(std::vector<Member> members, LedgerOptions options = {})
      : members_(std::move(members)), keys_(detail::key_table(members_)), options_(std::move(options)) {
    if (keys_.size() != members_.size()) throw Error(ErrorKind::Configuration, "duplicate ledger member id");
    if (!options_.path.empty() && std::filesystem::exists(options_.path) &&
        std::filesystem::file_size(options_.path) > 0) {
      auto replay = detail::replay_bytes(detail::read_file(options_.path), members_);
      if (!replay.report.intact)
        throw Error(ErrorKind::Integrity, "ledger " + options_.path.string() + " is corrupted at height " +
                                              std::to_string(replay.report.first_divergence->height) + ": " +
                                              replay.report.first_divergence->reason);
      blocks_ = std::move(replay.blocks);
      state_ = std::move(replay.state);
      tx_ids_ = std::move(replay.tx_ids);
    } else {
      LedgerBlock genesis;
      genesis.timestamp = options_.clock();
      genesis.state_root = state_.root();
      genesis.block_hash = genesis.compute_hash();
      if (!options_.path.empty()) {
        if (options_.path.has_parent_path()) std::filesystem::create_directories(options_.path.parent_path());
        std::ofstream out(options_.path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot create ledger file " + options_.path.string());
        out << kLedgerHeader << '\n';
      }
      persist(genesis);
      blocks_.push_back(std::move(genesis));
    }
    if (options_.block_interval.count() > 0)
      sealer_ = std::jthread([this](std::stop_token st) { seal_loop(st); });
  }

  Ledger(const Ledger&) = delete;
  Ledger& operator=(const Ledger&) = delete;

  ~Ledger() {
    if (sealer_.joinable()) {
      sealer_.request_stop();
      cv_.notify_all();
      sealer_.join();
    }
    try {
      flush();
    } catch (...) {
    }
  }

  /// Validates, applies and sequences a pre-signed transaction.
  Receipt submit(const Transaction& tx) {
    std::unique_lock lock(mutex_);
    return submit_locked(tx);
  }

  /// Signs `payload` against the current tip and submits it atomically.
  Receipt submit_as(const std::string& member_id, TxKind kind, Json payload) {
    std::unique_lock lock(mutex_);
    auto key = keys_.find(member_id);
    if (key == keys_.end()) throw Error(ErrorKind::Authorization, "unknown member " + member_id);
    Transaction tx = Transaction::sign(Member{member_id, key->second}, kind, std::move(payload), sealed_tip());
    return submit_locked(tx);
  }

  /// Seals pending transactions now (no-op without batching).
  void flush() {
    std::unique_lock lock(mutex_);
    seal_locked();
  }

  Hash tip_hash() const {
    std::shared_lock lock(mutex_);
    return sealed_tip();
  }

  std::uint64_t height() const {
    std::shared_lock lock(mutex_);
    return blocks_.back().height;
  }

  Hash state_root() const {
    std::shared_lock lock(mutex_);
    return state_.root();
  }

  /// Sealed blocks with height in [from, to].
  std::vector<LedgerBlock> blocks(std::uint64_t from = 0, std::uint64_t to = UINT64_MAX) const {
    std::shared_lock lock(mutex_);
    std::vector<LedgerBlock> out;
    for (const auto& b : blocks_)
      if (b.height >= from && b.height <= to) out.push_back(b);
    return out;
  }

  /// Verifies the persisted file when there is one, otherwise the in-memory
  /// chain, by full replay.
  VerificationReport verify_chain() const {
    std::shared_lock lock(mutex_);
    if (!options_.path.empty()) return verify_file(options_.path, members_);
    std::string image = std::string(kLedgerHeader) + "\n";
    for (const auto& b : blocks_) image += canonical_dump(b.to_json()) + "\n";
    return detail::replay_bytes(image, members_).report;
  }

  static VerificationReport verify_file(const std::filesystem::path& path, const std::vector<Member>& members) {
    std::string bytes;
    try {
      bytes = detail::read_file(path);
    } catch (const Error& e) {
      VerificationReport r;
      r.first_divergence = Divergence{0, e.what()};
      return r;
    }
    return detail::replay_bytes(bytes, members).report;
  }

  static VerificationReport verify_bytes(std::string_view bytes, const std::vector<Member>& members) {
    return detail::replay_bytes(bytes, members).report;
  }

  std::optional<DeviceEndpoint> device(const std::string& device_id) const {
    std::shared_lock lock(mutex_);
    auto it = state_.devices().find(device_id);
    if (it == state_.devices().end()) return std::nullopt;
    return it->second;
  }

  std::vector<DeviceEndpoint> devices_for_building(const std::string& building_id) const {
    std::shared_lock lock(mutex_);
    std::vector<DeviceEndpoint> out;
    for (const auto& [id, d] : state_.devices())
      if (d.building_id == building_id) out.push_back(d);
    return out;
  }

  std::optional<ScheduleRecord> schedule(const std::string& building_id, Date date) const {
    std::shared_lock lock(mutex_);
    auto it = state_.schedules().find({building_id, format_date(date)});
    if (it == state_.schedules().end()) return std::nullopt;
    return it->second;
  }

  MetricsInputs query_metrics(const std::string& building_id, Date date) const {
    std::shared_lock lock(mutex_);
    const std::string day = format_date(date);
    auto it = state_.schedules().find({building_id, day});
    if (it == state_.schedules().end())
      throw Error(ErrorKind::NotFound, "no schedule recorded for " + building_id + " on " + day);
    MetricsInputs out{it->second, {}};
    // UsageKey orders by (building, date, hour, device), so this is hour order.
    for (auto u = state_.usage().lower_bound({building_id, day, 0, std::string{}});
         u != state_.usage().end() && std::get<0>(u->first) == building_id && std::get<1>(u->first) == day; ++u)
      out.usage.push_back(u->second);
    return out;
  }

  const std::vector<Member>& members() const noexcept { return members_; }
  const LedgerOptions& options() const noexcept { return options_; }

 private:
  Hash sealed_tip() const { return blocks_.back().block_hash; }

  Receipt submit_locked(const Transaction& tx) {
    if (tx_ids_.count(tx.tx_id) || pending_ids_.count(tx.tx_id))
      throw Error(ErrorKind::Conflict, "duplicate transaction " + to_hex(tx.tx_id));
    auto key = keys_.find(tx.member_id);
    if (key == keys_.end()) throw Error(ErrorKind::Authorization, "unknown member " + tx.member_id);
    Hash tag = hmac_sha256(key->second, Transaction::auth_message(tx.member_id, tx.kind, tx.payload, tx.prev_block_hash));
    if (!equal_tags(tag, tx.auth_tag)) throw Error(ErrorKind::Authentication, "authentication tag does not verify");
    if (tx.compute_id() != tx.tx_id) throw Error(ErrorKind::Validation, "tx_id does not match transaction contents");
    if (tx.prev_block_hash != sealed_tip())
      throw Error(ErrorKind::Conflict, "transaction is anchored to a stale chain tip");

    ContractState next = state_;
    next.apply(tx);
    state_ = std::move(next);
    pending_.push_back(tx);
    pending_ids_.insert(tx.tx_id);
    Receipt receipt{blocks_.back().height + 1, pending_.size() - 1, tx.tx_id};
    if (options_.block_interval.count() == 0) seal_locked();
    return receipt;
  }

  void seal_locked() {
    if (pending_.empty()) return;
    LedgerBlock block;
    block.height = blocks_.back().height + 1;
    block.prev_hash = sealed_tip();
    block.timestamp = options_.clock();
    block.txs = std::move(pending_);
    block.state_root = state_.root();
    block.block_hash = block.compute_hash();
    persist(block);
    for (const auto& tx : block.txs) tx_ids_.insert(tx.tx_id);
    pending_.clear();
    pending_ids_.clear();
    blocks_.push_back(std::move(block));
  }

  void persist(const LedgerBlock& block) {
    if (options_.path.empty()) return;
    std::ofstream out(options_.path, std::ios::binary | std::ios::app);
    if (!out) throw Error(ErrorKind::Io, "cannot append to ledger file " + options_.path.string());
    out << canonical_dump(block.to_json()) << '\n';
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write to ledger file failed");
  }

  void seal_loop(std::stop_token st) {
    std::unique_lock lock(mutex_);
    while (!st.stop_requested()) {
      cv_.wait_for(lock, st, options_.block_interval, [] { return false; });
      if (st.stop_requested()) break;
      seal_locked();
    }
  }

  std::vector<Member> members_;
  std::map<std::string, std::string> keys_;
  LedgerOptions options_;

  mutable std::shared_mutex mutex_;
  std::condition_variable_any cv_;
  std::vector<LedgerBlock> blocks_;
  ContractState state_;
  std::set<Hash> tx_ids_;
  std::vector<Transaction> pending_;
  std::set<Hash> pending_ids_;
  std::jthread sealer_;
};

}  // namespace gls
