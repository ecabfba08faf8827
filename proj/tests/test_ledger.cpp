#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "gls/ledger.hpp"

using namespace gls;

namespace {

const std::vector<Member> kMembers{{"city", "city-secret"}, {"utility", "utility-secret"}};

ForecastDay flat_day(const std::string& date) {
  std::array<ForecastHour, 24> hours{};
  for (int h = 0; h < 24; ++h)
    hours[static_cast<std::size_t>(h)] = {h, 10 * kMicroPerMwh, (h % 5) * kMicroPerMwh, 100 * kMicroPerMwh};
  return make_forecast_day(parse_date(date), hours);
}

DailySchedule schedule_for(const std::string& building, const std::string& date, double temp = 10.0) {
  BuildingProfile p{{building}, 0.5};
  return build_schedule(p, {temp}, flat_day(date), SchedulerConfig{});
}

Json schedule_payload(const DailySchedule& s, std::int64_t client_ts) {
  return Json{{"schedule", to_json(s)}, {"client_ts", client_ts}};
}

DeviceEndpoint device(const std::string& id, const std::string& building) {
  return {id, building, "http://127.0.0.1:9", "ehp_on", "ehp_off", "k"};
}

DispatchRecord usage(const std::string& building, const std::string& dev, const std::string& date, int hour) {
  return {building, dev, parse_date(date), hour, hour % 2 ? SwitchAction::Off : SwitchAction::On, 1,
          DispatchOutcome::Acked, 3};
}

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gls-ledger-test-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  auto p = dir / name;
  std::filesystem::remove(p);
  return p;
}

ErrorKind kind_of(auto fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::Io;
}

}  // namespace

TEST(Ledger, GenesisOnlyChainVerifies) {
  Ledger ledger(kMembers);
  EXPECT_EQ(ledger.height(), 0u);
  auto r = ledger.verify_chain();
  EXPECT_TRUE(r.intact);
  EXPECT_EQ(r.blocks_checked, 1u);
}

TEST(Ledger, RecordScheduleHappyPath) {
  Ledger ledger(kMembers);
  auto s = schedule_for("b1", "2022-03-01");
  auto receipt = ledger.submit_as("city", TxKind::RecordSchedule, schedule_payload(s, 1));
  EXPECT_GE(receipt.height, 1u);
  auto rec = ledger.schedule("b1", parse_date("2022-03-01"));
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->schedule, s);
  EXPECT_EQ(rec->tx_id, receipt.tx_id);
  EXPECT_TRUE(ledger.verify_chain().intact);
}

TEST(Ledger, DuplicateTransactionIsConflict) {
  Ledger ledger(kMembers);
  auto tx = Transaction::sign(kMembers[0], TxKind::RegisterDevice, to_json(device("d1", "b1")), ledger.tip_hash());
  ledger.submit(tx);
  EXPECT_EQ(kind_of([&] { ledger.submit(tx); }), ErrorKind::Conflict);
  EXPECT_EQ(ledger.height(), 1u);
}

TEST(Ledger, WrongKeyIsRejectedWithoutStateChange) {
  Ledger ledger(kMembers);
  const Hash before = ledger.state_root();
  auto tx = Transaction::sign(Member{"city", "not-the-key"}, TxKind::RegisterDevice, to_json(device("d1", "b1")),
                              ledger.tip_hash());
  EXPECT_EQ(kind_of([&] { ledger.submit(tx); }), ErrorKind::Authentication);
  EXPECT_EQ(ledger.state_root(), before);
  EXPECT_EQ(ledger.height(), 0u);
}

TEST(Ledger, UnknownMemberIsUnauthorized) {
  Ledger ledger(kMembers);
  auto tx = Transaction::sign(Member{"mallory", "x"}, TxKind::RegisterDevice, to_json(device("d1", "b1")),
                              ledger.tip_hash());
  EXPECT_EQ(kind_of([&] { ledger.submit(tx); }), ErrorKind::Authorization);
  EXPECT_EQ(kind_of([&] { ledger.submit_as("mallory", TxKind::RegisterDevice, to_json(device("d1", "b1"))); }),
            ErrorKind::Authorization);
}

TEST(Ledger, TamperedTransactionIdIsRejected) {
  Ledger ledger(kMembers);
  auto tx = Transaction::sign(kMembers[0], TxKind::RegisterDevice, to_json(device("d1", "b1")), ledger.tip_hash());
  tx.tx_id[0] ^= 1;
  EXPECT_EQ(kind_of([&] { ledger.submit(tx); }), ErrorKind::Validation);
}

TEST(Ledger, StaleAnchorIsConflict) {
  Ledger ledger(kMembers);
  const Hash old_tip = ledger.tip_hash();
  ledger.submit_as("city", TxKind::RegisterDevice, to_json(device("d1", "b1")));
  auto tx = Transaction::sign(kMembers[1], TxKind::RegisterDevice, to_json(device("d2", "b1")), old_tip);
  EXPECT_EQ(kind_of([&] { ledger.submit(tx); }), ErrorKind::Conflict);
}

TEST(Ledger, MalformedPayloadLeavesStateUnchanged) {
  Ledger ledger(kMembers);
  const Hash before = ledger.state_root();
  EXPECT_EQ(kind_of([&] { ledger.submit_as("city", TxKind::RecordSchedule, Json{{"schedule", 3}}); }),
            ErrorKind::Validation);
  EXPECT_EQ(kind_of([&] { ledger.submit_as("city", TxKind::RegisterDevice, Json{{"device_id", "x"}}); }),
            ErrorKind::Validation);
  EXPECT_EQ(kind_of([&] {
              ledger.submit_as("city", TxKind::RecordUsage, to_json(usage("b1", "ghost", "2022-03-01", 4)));
            }),
            ErrorKind::Validation);
  EXPECT_EQ(ledger.state_root(), before);
  EXPECT_EQ(ledger.height(), 0u);
}

TEST(Ledger, ScheduleReplacementRequiresLaterClientTimestamp) {
  Ledger ledger(kMembers);
  auto first = schedule_for("b1", "2022-03-01", 10.0);
  auto second = schedule_for("b1", "2022-03-01", 2.0);
  ledger.submit_as("city", TxKind::RecordSchedule, schedule_payload(first, 100));
  EXPECT_EQ(kind_of([&] { ledger.submit_as("city", TxKind::RecordSchedule, schedule_payload(second, 100)); }),
            ErrorKind::Conflict);
  EXPECT_EQ(kind_of([&] { ledger.submit_as("city", TxKind::RecordSchedule, schedule_payload(second, 50)); }),
            ErrorKind::Conflict);
  EXPECT_EQ(ledger.schedule("b1", parse_date("2022-03-01"))->schedule, first);
  ledger.submit_as("utility", TxKind::RecordSchedule, schedule_payload(second, 101));
  EXPECT_EQ(ledger.schedule("b1", parse_date("2022-03-01"))->schedule, second);
}

TEST(Ledger, QueryMetricsReturnsUsageInHourOrder) {
  Ledger ledger(kMembers);
  ledger.submit_as("city", TxKind::RegisterDevice, to_json(device("d1", "b1")));
  ledger.submit_as("city", TxKind::RecordSchedule, schedule_payload(schedule_for("b1", "2022-03-01"), 1));
  std::vector<int> hours{24, 3, 17, 0, 9, 12};
  std::mt19937 rng(5);
  std::shuffle(hours.begin(), hours.end(), rng);
  for (int h : hours) ledger.submit_as("utility", TxKind::RecordUsage, to_json(usage("b1", "d1", "2022-03-01", h)));
  // Noise on another day must not leak in.
  ledger.submit_as("utility", TxKind::RecordUsage, to_json(usage("b1", "d1", "2022-03-02", 5)));

  auto m = ledger.query_metrics("b1", parse_date("2022-03-01"));
  ASSERT_EQ(m.usage.size(), hours.size());
  for (std::size_t i = 1; i < m.usage.size(); ++i) EXPECT_LT(m.usage[i - 1].hour, m.usage[i].hour);
  EXPECT_EQ(m.usage.back().hour, 24);
  EXPECT_EQ(kind_of([&] { ledger.query_metrics("b1", parse_date("2022-03-02")); }), ErrorKind::NotFound);
  EXPECT_EQ(kind_of([&] { ledger.query_metrics("nobody", parse_date("2022-03-01")); }), ErrorKind::NotFound);
}

TEST(Ledger, UsageForAnotherBuildingsDeviceIsRejected) {
  Ledger ledger(kMembers);
  ledger.submit_as("city", TxKind::RegisterDevice, to_json(device("d1", "b1")));
  EXPECT_EQ(kind_of([&] {
              ledger.submit_as("city", TxKind::RecordUsage, to_json(usage("b2", "d1", "2022-03-01", 1)));
            }),
            ErrorKind::Validation);
}

TEST(Ledger, PersistedChainReopensWithSameState) {
  auto path = temp_path("reopen.psb");
  Hash root, tip;
  {
    Ledger ledger(kMembers, {path});
    ledger.submit_as("city", TxKind::RegisterDevice, to_json(device("d1", "b1")));
    ledger.submit_as("city", TxKind::RecordSchedule, schedule_payload(schedule_for("b1", "2022-03-01"), 1));
    root = ledger.state_root();
    tip = ledger.tip_hash();
    EXPECT_TRUE(ledger.verify_chain().intact);
  }
  std::ifstream in(path);
  std::string first_line;
  std::getline(in, first_line);
  EXPECT_EQ(first_line, kLedgerHeader);

  Ledger reopened(kMembers, {path});
  EXPECT_EQ(reopened.height(), 2u);
  EXPECT_EQ(reopened.state_root(), root);
  EXPECT_EQ(reopened.tip_hash(), tip);
  EXPECT_TRUE(reopened.schedule("b1", parse_date("2022-03-01")));
  reopened.submit_as("utility", TxKind::RecordUsage, to_json(usage("b1", "d1", "2022-03-01", 3)));
  EXPECT_TRUE(Ledger::verify_file(path, kMembers).intact);
}

TEST(Ledger, CorruptFileRefusesToOpenAndVerifyLocatesIt) {
  auto path = temp_path("corrupt.psb");
  {
    Ledger ledger(kMembers, {path});
    for (int i = 0; i < 4; ++i) ledger.submit_as("city", TxKind::RegisterDevice, to_json(device("d" + std::to_string(i), "b1")));
  }
  std::string bytes = detail::read_file(path);
  // Flip a byte inside the third block's line.
  std::size_t line_start = 0;
  for (int i = 0; i < 4; ++i) line_start = bytes.find('\n', line_start) + 1;
  const std::size_t pos = bytes.find("\"d2\"", line_start);
  ASSERT_NE(pos, std::string::npos);
  bytes[pos + 2] = '9';
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;

  auto r = Ledger::verify_file(path, kMembers);
  EXPECT_FALSE(r.intact);
  ASSERT_TRUE(r.first_divergence);
  EXPECT_EQ(r.first_divergence->height, 3u);
  EXPECT_EQ(r.blocks_checked, 3u);
  EXPECT_EQ(kind_of([&] { Ledger reopened(kMembers, {path}); }), ErrorKind::Integrity);
  EXPECT_EQ(r.to_json().at("status"), "corrupted");
}

TEST(Ledger, MissingFileVerifiesAsCorrupted) {
  auto r = Ledger::verify_file(temp_path("never-written.psb"), kMembers);
  EXPECT_FALSE(r.intact);
}

TEST(Ledger, WrongMemberSetFailsVerification) {
  Ledger ledger(kMembers);
  ledger.submit_as("utility", TxKind::RegisterDevice, to_json(device("d1", "b1")));
  std::string image = std::string(kLedgerHeader) + "\n";
  for (const auto& b : ledger.blocks()) image += canonical_dump(b.to_json()) + "\n";
  EXPECT_TRUE(Ledger::verify_bytes(image, kMembers).intact);
  auto r = Ledger::verify_bytes(image, {{"city", "city-secret"}, {"utility", "rotated"}});
  EXPECT_FALSE(r.intact);
  EXPECT_EQ(r.first_divergence->height, 1u);
}

// Property: the root computed by replaying the chain equals the incrementally
// maintained root, for random valid sequences interleaved with rejected ones.
TEST(Ledger, ReplayRootEqualsIncrementalRoot) {
  std::mt19937_64 rng(31337);
  for (int iter = 0; iter < 20; ++iter) {
    Ledger ledger(kMembers);
    int ts = 0;
    for (int step = 0; step < 40; ++step) {
      const std::string b = "b" + std::to_string(rng() % 3);
      const std::string dev = b + "-ehp";
      const std::string date = "2022-04-0" + std::to_string(1 + rng() % 3);
      const std::string who = kMembers[rng() % 2].member_id;
      try {
        switch (rng() % 3) {
          case 0: ledger.submit_as(who, TxKind::RegisterDevice, to_json(device(dev, b))); break;
          case 1:
            ledger.submit_as(who, TxKind::RecordSchedule,
                             schedule_payload(schedule_for(b, date, static_cast<double>(rng() % 40)),
                                              rng() % 4 ? ++ts : 0));
            break;
          default:
            ledger.submit_as(who, TxKind::RecordUsage, to_json(usage(b, dev, date, static_cast<int>(rng() % 25))));
        }
      } catch (const Error&) {
      }
    }
    auto report = ledger.verify_chain();
    ASSERT_TRUE(report.intact);
    EXPECT_EQ(report.replayed_state_root, ledger.state_root());
    ASSERT_TRUE(report.stored_state_root);
    EXPECT_EQ(*report.stored_state_root, ledger.state_root());
  }
}

TEST(Ledger, BatchedModeSealsSeveralTransactionsPerBlock) {
  auto path = temp_path("batched.psb");
  LedgerOptions opts{path};
  opts.block_interval = std::chrono::hours(1);  // only explicit flushes seal
  Ledger ledger(kMembers, opts);
  const Hash anchor = ledger.tip_hash();
  auto r1 = ledger.submit(Transaction::sign(kMembers[0], TxKind::RegisterDevice, to_json(device("d1", "b1")), anchor));
  auto r2 = ledger.submit(Transaction::sign(kMembers[1], TxKind::RegisterDevice, to_json(device("d2", "b1")), anchor));
  EXPECT_EQ(r1.height, 1u);
  EXPECT_EQ(r2.height, 1u);
  EXPECT_EQ(r2.tx_index, 1u);
  EXPECT_EQ(ledger.height(), 0u);
  EXPECT_TRUE(ledger.device("d2"));
  ledger.flush();
  EXPECT_EQ(ledger.height(), 1u);
  ASSERT_EQ(ledger.blocks(1, 1).at(0).txs.size(), 2u);
  EXPECT_TRUE(Ledger::verify_file(path, kMembers).intact);
}

TEST(Ledger, TimedSealerSealsPendingTransactions) {
  LedgerOptions opts;
  opts.block_interval = std::chrono::milliseconds(20);
  Ledger ledger(kMembers, opts);
  ledger.submit_as("city", TxKind::RegisterDevice, to_json(device("d1", "b1")));
  for (int i = 0; i < 200 && ledger.height() == 0; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  EXPECT_EQ(ledger.height(), 1u);
  EXPECT_TRUE(ledger.verify_chain().intact);
}

TEST(Ledger, BlockRangeQuery) {
  Ledger ledger(kMembers);
  for (int i = 0; i < 5; ++i)
    ledger.submit_as("city", TxKind::RegisterDevice, to_json(device("d" + std::to_string(i), "b1")));
  auto range = ledger.blocks(2, 4);
  ASSERT_EQ(range.size(), 3u);
  EXPECT_EQ(range.front().height, 2u);
  EXPECT_EQ(range[1].prev_hash, range[0].block_hash);
  EXPECT_EQ(LedgerBlock::from_json(range[0].to_json()).block_hash, range[0].block_hash);
}
