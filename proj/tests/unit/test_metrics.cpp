#include <gtest/gtest.h>

#include "qkdnet/metrics.hpp"
#include "support.hpp"

using namespace qkdnet;

namespace {

RunResult fig3_local() {
  auto s = testkit::load_reference("fig3_hierarchical");
  s.requests = {s.requests.at(2)};
  return run_scenario(s);
}

}  // namespace

TEST(Summarize, EmptyTrace) {
  const auto rep = summarize({});
  EXPECT_TRUE(rep.requests.empty());
  EXPECT_EQ(rep.success_ratio, 0.0);
  EXPECT_FALSE(rep.p50_latency_ms);
  EXPECT_FALSE(rep.truncated);
}

TEST(Summarize, LocalRequestCountedByHand) {
  const auto run = fig3_local();
  const auto rep = summarize(run.trace());
  ASSERT_EQ(rep.requests.size(), 1u);
  const auto& r = rep.requests[0];
  std::uint64_t by_hand = 0;
  for (const auto& rec : run.trace()) {
    if (rec.request_id == r.request_id && rec.plane != Plane::DP) ++by_hand;
  }
  EXPECT_EQ(r.control_messages, by_hand);
  EXPECT_EQ(r.control_messages, 9u);
  EXPECT_EQ(r.outcome, Outcome::Delivered);
  EXPECT_EQ(rep.delivered_key_bits, r.bits);
  EXPECT_EQ(rep.p50_latency_ms, r.setup_latency_ms);
  EXPECT_GT(r.relay_hops, 0u);
}

TEST(Summarize, RecomputedFromPersistedTrace) {
  const auto run = run_scenario(testkit::load_reference("fig5_distributed"));
  const auto text = write_trace(run.trace());
  EXPECT_EQ(read_trace(text), run.trace());
  EXPECT_EQ(summarize(read_trace(text)), summarize(run.trace()));
}

TEST(Summarize, TruncatedRunLeavesSessionsUnfinished) {
  auto s = testkit::load_reference("l3_failover");
  s.duration = seconds(3);
  const auto rep = summarize(run_scenario(s).trace());
  EXPECT_TRUE(rep.truncated);
  EXPECT_GE(rep.unfinished, 1u);
  EXPECT_EQ(rep.delivered + rep.failed + rep.unfinished, rep.requests.size());
}

TEST(ReportJson, RoundTrip) {
  const auto run = run_scenario(testkit::load_reference("contention"));
  auto rep = summarize(run.trace());
  rep.model = "distributed";
  rep.seed = run.seed;
  rep.fingerprint = run.fingerprint;
  EXPECT_EQ(report_from_json(report_to_json(rep)), rep);
}

TEST(Percentile, NearestRank) {
  EXPECT_EQ(percentile({5.0}, 95), 5.0);
  EXPECT_EQ(percentile({4, 1, 3, 2}, 50), 2.0);
  EXPECT_EQ(percentile({4, 1, 3, 2}, 95), 4.0);
  std::vector<double> hundred;
  for (int i = 1; i <= 100; ++i) hundred.push_back(i);
  EXPECT_EQ(percentile(hundred, 95), 95.0);
}

TEST(Compare, IdenticalRunsHaveZeroDeltas) {
  const auto s = testkit::load_reference("fig3_hierarchical");
  auto a = summarize(run_scenario(s).trace());
  a.fingerprint = fingerprint(s, 7);
  const auto cmp = compare(a, a);
  for (const auto& row : cmp.rows) {
    if (row.delta()) EXPECT_EQ(*row.delta(), 0.0) << row.metric;
  }
  ASSERT_NE(cmp.row("control_messages[r1]"), nullptr);
  EXPECT_EQ(*cmp.row("control_messages[r1]")->a, 18.0);
  EXPECT_FALSE(format_table(cmp).empty());
}

TEST(Compare, DifferentFingerprintsAreIncomparable) {
  RunReport a;
  RunReport b;
  a.fingerprint = "0000000000000001";
  b.fingerprint = "0000000000000002";
  try {
    compare(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IncomparableRuns);
  }
}

TEST(Compare, ModelsOnSameScenario) {
  const auto s = testkit::load_reference("fig5_distributed");
  RunReport reps[2];
  const Model models[2] = {Model::Hierarchical, Model::Distributed};
  for (int i = 0; i < 2; ++i) {
    const auto run = run_scenario(s, RunOptions{std::nullopt, models[i]});
    reps[i] = summarize(run.trace());
    reps[i].fingerprint = run.fingerprint;
    reps[i].model = std::string(to_string(models[i]));
  }
  const auto cmp = compare(reps[0], reps[1]);
  EXPECT_EQ(cmp.label_a, "hierarchical");
  EXPECT_EQ(*cmp.row("requests")->a, *cmp.row("requests")->b);
  EXPECT_GT(*cmp.row("controllers")->a, 0.0);
}

TEST(Session, FormatListsRecordsAndView) {
  const auto run = fig3_local();
  const auto text = format_session(run.trace(), RequestId{1});
  EXPECT_NE(text.find("KeyServiceRequest"), std::string::npos);
  EXPECT_NE(text.find("key establishment"), std::string::npos);
  EXPECT_TRUE(session_records(run.trace(), RequestId{42}).empty());
}
