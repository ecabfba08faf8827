#include <gtest/gtest.h>

#include <random>
#include <set>

#include "gls/dispatch.hpp"
#include "gls/mock_device.hpp"
#include "oracles.hpp"

using namespace gls;

namespace {

const std::vector<Member> kMembers{{"city", "city-secret"}};

HourSlots slots_of(std::initializer_list<int> hours) {
  HourSlots s{};
  for (int h : hours) s[static_cast<std::size_t>(h)] = true;
  return s;
}

DailySchedule schedule_with(const HourSlots& slots, const std::string& building = "b1") {
  DailySchedule s;
  s.building_id = building;
  s.date = parse_date("2022-03-15");
  s.slots = slots;
  s.ehp_hours = count_on(slots);
  s.config_snapshot = SchedulerConfig{0.5, 0.5, 20.0, 0, 24};
  return s;
}

std::vector<std::pair<int, bool>> as_edges(const std::vector<Transition>& ts) {
  std::vector<std::pair<int, bool>> out;
  for (const auto& t : ts) out.emplace_back(t.hour, t.action == SwitchAction::On);
  return out;
}

struct Rig {
  MockDeviceServer mock{"hook-key"};
  Ledger ledger{kMembers};
  DeviceEndpoint endpoint{"b1-ehp", "b1", mock.base_url(), "ehp_on", "ehp_off", "hook-key"};
  SimulatedClock clock{0};
  HttpWebhookTransport transport;
  LedgerUsageSink sink{ledger, "city"};
  RetryPolicy fast{};

  Rig() {
    ledger.submit_as("city", TxKind::RegisterDevice, to_json(endpoint));
    fast.request_timeout = std::chrono::milliseconds(2000);
  }

  std::vector<DispatchRecord> recorded_usage(const DailySchedule& s) {
    if (!ledger.schedule(s.building_id, s.date))
      ledger.submit_as("city", TxKind::RecordSchedule, Json{{"schedule", to_json(s)}, {"client_ts", 1}});
    return ledger.query_metrics(s.building_id, s.date).usage;
  }
};

}  // namespace

TEST(PlanTransitions, Examples) {
  using E = std::vector<std::pair<int, bool>>;
  EXPECT_EQ(as_edges(plan_transitions(slots_of({8, 9, 10, 11, 15}))),
            (E{{8, true}, {12, false}, {15, true}, {16, false}}));
  EXPECT_TRUE(plan_transitions(slots_of({})).empty());
  EXPECT_EQ(as_edges(plan_transitions(slots_of({0, 23}))), (E{{0, true}, {1, false}, {23, true}, {24, false}}));
  HourSlots all;
  all.fill(true);
  EXPECT_EQ(as_edges(plan_transitions(all)), (E{{0, true}, {24, false}}));
}

// Property: transitions match the run-edge oracle, alternate ON/OFF, and
// replaying them reconstructs the slots.
TEST(PlanTransitions, RandomSlotsRoundTrip) {
  std::mt19937 rng(11);
  for (int iter = 0; iter < 2000; ++iter) {
    HourSlots s{};
    for (auto&& b : s) b = rng() % 2;
    auto ts = plan_transitions(s);
    ASSERT_EQ(as_edges(ts), oracle::run_edges(s));
    HourSlots rebuilt{};
    bool on = false;
    int from = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      ASSERT_EQ(ts[i].action == SwitchAction::On, i % 2 == 0);
      for (int h = from; h < ts[i].hour; ++h) rebuilt[static_cast<std::size_t>(h)] = on;
      on = ts[i].action == SwitchAction::On;
      from = ts[i].hour;
    }
    for (int h = from; h < 24; ++h) rebuilt[static_cast<std::size_t>(h)] = on;
    ASSERT_EQ(rebuilt, s);
  }
}

TEST(Dispatch, EveryTransitionIsAcknowledgedAndRecorded) {
  Rig rig;
  auto sched = schedule_with(slots_of({2, 3, 9, 14, 15, 16}));
  auto records = execute_day(sched, rig.endpoint, rig.clock, rig.transport, rig.sink, rig.fast);
  const auto expected = oracle::run_edges(sched.slots);
  ASSERT_EQ(records.size(), expected.size());
  auto reqs = rig.mock.requests();
  EXPECT_EQ(reqs.size(), expected.size());
  std::set<std::string> keys;
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    EXPECT_EQ(reqs[i].event, expected[i].second ? "ehp_on" : "ehp_off");
    EXPECT_EQ(reqs[i].key, "hook-key");
    auto body = Json::parse(reqs[i].body);
    EXPECT_EQ(body.at("value1"), "b1");
    EXPECT_EQ(body.at("value2"), "2022-03-15");
    EXPECT_EQ(body.at("value3"), expected[i].first);
    keys.insert(reqs[i].idempotency_key);
    EXPECT_EQ(records[i].outcome, DispatchOutcome::Acked);
    EXPECT_EQ(records[i].attempt_count, 1);
  }
  EXPECT_EQ(keys.size(), reqs.size());
  EXPECT_EQ(rig.mock.duplicate_successes(), 0);
  auto usage = rig.recorded_usage(sched);
  ASSERT_EQ(usage.size(), records.size());
  for (std::size_t i = 0; i < usage.size(); ++i) EXPECT_EQ(usage[i], records[i]);
}

TEST(Dispatch, TransientFailuresAreRetriedWithBackoff) {
  Rig rig;
  rig.mock.script({500, 500, 200});
  auto sched = schedule_with(slots_of({6}));
  auto records = execute_day(sched, rig.endpoint, rig.clock, rig.transport, rig.sink, rig.fast);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].outcome, DispatchOutcome::Acked);
  EXPECT_EQ(records[0].attempt_count, 3);
  EXPECT_EQ(records[1].attempt_count, 1);
  EXPECT_EQ(rig.mock.requests().size(), 4u);
  // Two backoffs (1 s, 2 s) on top of the jump to 07:00 on the day.
  EXPECT_EQ(rig.clock.now_ms(), epoch_seconds(sched.date, 7) * 1000);
  EXPECT_EQ(rig.clock.total_slept_ms(), epoch_seconds(sched.date, 7) * 1000);
  EXPECT_EQ(rig.recorded_usage(sched).at(0).attempt_count, 3);
}

TEST(Dispatch, ExhaustedRetriesRecordFailureAndContinue) {
  Rig rig;
  rig.mock.set_default_status(503);
  SimulatedClock clock(epoch_seconds(parse_date("2022-03-15"), 23) * 1000);
  auto sched = schedule_with(slots_of({23}));
  auto records = execute_day(sched, rig.endpoint, clock, rig.transport, rig.sink, rig.fast);
  ASSERT_EQ(records.size(), 2u);
  for (const auto& r : records) {
    EXPECT_EQ(r.outcome, DispatchOutcome::Failed);
    EXPECT_EQ(r.attempt_count, 4);
  }
  EXPECT_EQ(records[1].hour, 24);
  EXPECT_EQ(rig.mock.requests().size(), 8u);
  // 1+2+4 s of backoff for the first call; the OFF deadline (24:00) lies past it.
  EXPECT_EQ(clock.total_slept_ms(), 3600 * 1000 + 7000);
  auto usage = rig.recorded_usage(sched);
  ASSERT_EQ(usage.size(), 2u);
  EXPECT_EQ(usage[1].outcome, DispatchOutcome::Failed);
}

TEST(Dispatch, ConnectionFailureCountsAsFailedAttempt) {
  Rig rig;
  DeviceEndpoint dead = rig.endpoint;
  dead.device_id = "b1-dead";
  {
    MockDeviceServer closed;
    dead.base_url = closed.base_url();
  }
  rig.ledger.submit_as("city", TxKind::RegisterDevice, to_json(dead));
  auto records = execute_day(schedule_with(slots_of({4})), dead, rig.clock, rig.transport, rig.sink, rig.fast);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].outcome, DispatchOutcome::Failed);
  EXPECT_EQ(records[0].attempt_count, 4);
}

TEST(Dispatch, UnregisteredDeviceIsRefused) {
  Rig rig;
  DeviceEndpoint rogue = rig.endpoint;
  rogue.device_id = "b1-rogue";
  try {
    execute_day(schedule_with(slots_of({1})), rogue, rig.clock, rig.transport, rig.sink, rig.fast);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Authorization);
  }
  DeviceEndpoint altered = rig.endpoint;
  altered.key = "other";
  EXPECT_THROW(execute_day(schedule_with(slots_of({1})), altered, rig.clock, rig.transport, rig.sink, rig.fast), Error);
  EXPECT_THROW(execute_day(schedule_with(slots_of({1}), "b2"), rig.endpoint, rig.clock, rig.transport, rig.sink, rig.fast),
               Error);
  EXPECT_TRUE(rig.mock.requests().empty());
}

TEST(Dispatch, MockRejectsWrongKeyAndRepeatedSuccess) {
  MockDeviceServer mock("right");
  HttpWebhookTransport t;
  auto url = [&](const std::string& key) { return mock.base_url() + "/trigger/ehp_on/with/key/" + key; };
  EXPECT_EQ(t.post({url("wrong"), "{}", "a"}).status, 401);
  EXPECT_EQ(t.post({url("right"), "{}", "a"}).status, 200);
  EXPECT_EQ(t.post({url("right"), "{}", "a"}).status, 409);
  EXPECT_EQ(mock.duplicate_successes(), 1);
  EXPECT_EQ(mock.successes_by_key().at("a"), 1);
}

TEST(Dispatch, IdempotencyKeysAreUniquePerTransition) {
  DeviceEndpoint ep{"dev", "b", "http://x", "on", "off", "k"};
  std::set<std::string> keys;
  for (int h = 0; h <= 24; ++h)
    for (auto a : {SwitchAction::On, SwitchAction::Off}) {
      keys.insert(idempotency_key(ep, parse_date("2022-01-01"), h, a));
      keys.insert(idempotency_key(ep, parse_date("2022-01-02"), h, a));
    }
  EXPECT_EQ(keys.size(), 25u * 2 * 2);
  EXPECT_EQ(idempotency_key(ep, parse_date("2022-01-01"), 8, SwitchAction::On), "dev:2022-01-01:8:ON");
}

TEST(Dispatch, SystemClockSleepIsCancellable) {
  std::stop_source src;
  SystemClock clock(src.get_token());
  std::thread stopper([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    src.request_stop();
  });
  auto started = std::chrono::steady_clock::now();
  EXPECT_THROW(clock.sleep_for_ms(60'000), Error);
  stopper.join();
  EXPECT_LT(std::chrono::steady_clock::now() - started, std::chrono::seconds(5));
}
