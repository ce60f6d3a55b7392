#include <gtest/gtest.h>

#include "qkdnet/hier_integration.hpp"
#include "qkdnet/metrics.hpp"
#include "support.hpp"

using namespace qkdnet;

namespace {

const RequestReport& req(const RunReport& r, std::uint64_t id) {
  for (const auto& x : r.requests) {
    if (x.request_id.value == id) return x;
  }
  throw std::runtime_error("no request " + std::to_string(id));
}

Scenario only_request(Scenario s, std::size_t index) {
  s.requests = {s.requests.at(index)};
  return s;
}

}  // namespace

class ThreeLevelTree : public ::testing::Test {
 protected:
  void SetUp() override {
    scenario = testkit::load_reference("fig3_hierarchical");
    run = prepare_run(scenario);
    proto = dynamic_cast<HierarchicalProtocol*>(&run.engine->protocol());
    ASSERT_NE(proto, nullptr);
  }
  ControllerId id(const char* name) { return *run.engine->controller_by_name(name); }

  Scenario scenario;
  RunResult run;
  HierarchicalProtocol* proto = nullptr;
};

TEST_F(ThreeLevelTree, TreeQueries) {
  const auto& h = proto->hierarchy();
  EXPECT_EQ(h.root, id("L3"));
  EXPECT_EQ(h.lca(id("L1-d1"), id("L1-d2")), id("L2-west"));
  EXPECT_EQ(h.lca(id("L1-d1"), id("L1-d4")), id("L3"));
  EXPECT_EQ(h.depth(id("L1-d3")), 2u);
  EXPECT_EQ(h.tree_path(id("L1-d1"), id("L1-d3")),
            (std::vector<ControllerId>{id("L1-d1"), id("L2-west"), id("L3"), id("L2-east"), id("L1-d3")}));
  EXPECT_EQ(h.next_hop(id("L3"), id("L1-d4")), id("L2-east"));
  EXPECT_TRUE(h.in_subtree(id("L1-d2"), id("L2-west")));
  EXPECT_FALSE(h.in_subtree(id("L1-d3"), id("L2-west")));
  EXPECT_EQ(h.l1(DomainId{4}), id("L1-d4"));
}

TEST_F(ThreeLevelTree, ControllerScopes) {
  const auto& e = *run.engine;
  const auto& west = e.controller(id("L2-west")).view;
  const auto& topo = e.topology();
  ASSERT_TRUE(west.scope);
  for (LinkId l : topo.domain_scope(DomainId{1})) EXPECT_TRUE(west.in_scope(l));
  for (LinkId l : topo.domains[2].links) EXPECT_FALSE(west.in_scope(l));
  EXPECT_FALSE(e.controller(id("L3")).view.scope);
  EXPECT_EQ(e.controller(id("L1-d1")).view.scope, topo.domain_scope(DomainId{1}));
}

TEST_F(ThreeLevelTree, EscalateFindsLowestCommonAncestor) {
  const auto& h = proto->hierarchy();
  KeyServiceRequest r{AppId{make_node_id(DomainId{1}, 1)}, AppId{make_node_id(DomainId{2}, 3)}, 64, RequestId{9}, 0};
  EXPECT_EQ(escalate(h, *run.engine, id("L1-d1"), r), id("L2-west"));
  r.app_dst = AppId{make_node_id(DomainId{4}, 1)};
  EXPECT_EQ(escalate(h, *run.engine, id("L1-d1"), r), id("L3"));
  r.app_dst = AppId{make_node_id(DomainId{1}, 2)};
  EXPECT_THROW(escalate(h, *run.engine, id("L1-d1"), r), Error);
  run.engine->controller(id("L3")).down_count = 1;
  r.app_dst = AppId{make_node_id(DomainId{4}, 1)};
  try {
    escalate(h, *run.engine, id("L1-d1"), r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CoordinatorUnavailable);
  }
}

TEST(Hierarchy, StructuralChecks) {
  const auto s = testkit::load_reference("fig3_hierarchical");
  const auto topo = build_scenario_topology(s);
  auto spec = *s.hierarchy;
  EXPECT_TRUE(check_hierarchy(spec, topo).empty());
  auto two_roots = spec;
  two_roots.controllers[1].parent.reset();
  EXPECT_FALSE(check_hierarchy(two_roots, topo).empty());
  auto missing = spec;
  missing.controllers.pop_back();
  EXPECT_FALSE(check_hierarchy(missing, topo).empty());
  auto orphan = spec;
  orphan.controllers[3].parent = "nowhere";
  EXPECT_FALSE(check_hierarchy(orphan, topo).empty());
  auto under_l1 = spec;
  under_l1.controllers[4].parent = "L1-d1";
  EXPECT_FALSE(check_hierarchy(under_l1, topo).empty());
  EXPECT_TRUE(check_hierarchy(default_hierarchy(topo), topo).empty());
}

TEST(HierarchicalFlow, SequenceUnderSharedL2) {
  const auto s = only_request(testkit::load_reference("fig3_hierarchical"), 0);
  const auto run = run_scenario(s);
  const std::vector<std::string> want{
      "KeyServiceRequest(App1->L1(1))",   "AvailabilityQuery(L1(1)->QN1)",      "AvailabilityReply(QN1->L1(1))",
      "Escalate(L1(1)->L2-west)",         "Escalate(L2-west->L1(2))",           "AvailabilityQuery(L1(2)->QN2)",
      "AvailabilityReply(QN2->L1(2))",    "InterdomainRoute(L2-west->L1(1))",   "InterdomainRoute(L2-west->L1(2))",
      "IntradomainRouteSet(L1(1)->L2-west)", "IntradomainRouteSet(L1(2)->L2-west)", "key establishment",
      "KeyReady(QN1->App1)",              "KeyReady(QN2->App2)",                "ConnectionEnd(L1(1)->L2-west)",
      "ConnectionEnd(L2-west->L1(2))"};
  EXPECT_EQ(hierarchical_projection(run.trace(), RequestId{1}), want);
  EXPECT_EQ(run.engine->session(RequestId{1}).state, SessionState::Closed);
  EXPECT_TRUE(testkit::audit_keys(*run.engine).ok);
}

// Control messages of an interdomain request: 9 fixed plus 4 per tree edge
// travelled, plus one availability confirmation per edge on the way down.
TEST(HierarchicalFlow, MessageCountIsFunctionOfDepth) {
  const auto s = testkit::load_reference("fig3_hierarchical");
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const auto run = run_scenario(s, RunOptions{seed, std::nullopt});
    const auto rep = summarize(run.trace());
    EXPECT_EQ(req(rep, 1).control_messages, 9u + 4 * (1 + 1) + 1);  // d1 -> d2 under L2-west
    EXPECT_EQ(req(rep, 2).control_messages, 9u + 4 * (2 + 2) + 2);  // d1 -> d4 over L3
    EXPECT_EQ(req(rep, 3).control_messages, 9u);                    // local
    EXPECT_EQ(req(rep, 4).control_messages, 9u + 4 * (2 + 2) + 2);
  }
}

TEST(HierarchicalFlow, TeardownOnlyWhileDelivering) {
  const auto s = only_request(testkit::load_reference("fig3_hierarchical"), 0);
  auto run = run_scenario(s);
  auto& proto = dynamic_cast<HierarchicalProtocol&>(run.engine->protocol());
  try {
    proto.teardown(*run.engine, RequestId{1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidState);
  }
}

TEST(HierarchicalFlow, PeriodicSyncConvergesRootView) {
  auto s = testkit::load_reference("fig3_hierarchical");
  s.requests.clear();
  s.duration = seconds(25);
  const auto run = run_scenario(s);
  const auto& e = *run.engine;
  const auto& root = e.controller(*e.controller_by_name("L3")).view;
  // Synced at t=20 s; the root view equals ground truth as of then.
  for (const auto& [id, st] : root.link_states) {
    EXPECT_EQ(st.last_updated, seconds(20)) << to_string(id);
  }
}

TEST(Failover, StandbyTakesOverAfterThreeHeartbeats) {
  const auto s = testkit::load_reference("l3_failover");
  const auto run = run_scenario(s);
  const auto rep = summarize(run.trace());
  EXPECT_EQ(rep.success_ratio, 1.0);
  const SimTime takeover = seconds(1) + 3 * s.heartbeat;
  for (const auto& rec : run.trace()) {
    if (rec.type == "KeyReady" && rec.request_id == RequestId{1}) EXPECT_GE(rec.time, takeover);
  }
  // Issued at 2 s, retried once at takeover.
  EXPECT_GE(*req(rep, 1).setup_latency_ms, to_seconds(takeover - seconds(2)) * 1000);
  EXPECT_LT(*req(rep, 1).setup_latency_ms, to_seconds(takeover - seconds(2)) * 1000 + 500);
  EXPECT_EQ(run.engine->session(RequestId{1}).attempt, 2u);
}

TEST(Failover, WithoutStandbyCrossL2FailsIntraL2Survives) {
  auto s = testkit::load_reference("l3_failover");
  for (auto& c : s.hierarchy->controllers) c.standby = false;
  const auto run = run_scenario(s);
  const auto rep = summarize(run.trace());
  for (std::uint64_t cross : {1u, 3u, 4u}) {
    EXPECT_EQ(req(rep, cross).outcome, Outcome::Failed) << cross;
    EXPECT_EQ(req(rep, cross).error, "CoordinatorUnavailable");
  }
  for (std::uint64_t intra : {2u, 5u}) EXPECT_EQ(req(rep, intra).outcome, Outcome::Delivered) << intra;
}

TEST(Failover, RecoveryBeforeTakeoverRetries) {
  auto s = testkit::load_reference("l3_failover");
  s.faults.entries.push_back(FaultEntry{seconds(4), FaultAction::ControllerUp, "L3"});
  const auto run = run_scenario(s);
  const auto rep = summarize(run.trace());
  EXPECT_EQ(rep.success_ratio, 1.0);
  EXPECT_LT(*req(rep, 1).setup_latency_ms, 3000.0);
}

TEST(Failover, L2DownWithoutStandbyOnlyHitsItsSubtree) {
  auto s = testkit::load_reference("l3_failover");
  s.faults.entries = {FaultEntry{seconds(1), FaultAction::ControllerDown, "L2-b"}};
  for (auto& c : s.hierarchy->controllers) c.standby = false;
  const auto run = run_scenario(s);
  const auto rep = summarize(run.trace());
  EXPECT_EQ(req(rep, 2).outcome, Outcome::Delivered);  // d1 -> d2 under L2-a
  EXPECT_EQ(req(rep, 1).outcome, Outcome::Failed);     // d1 -> d3 needs L2-b
}
