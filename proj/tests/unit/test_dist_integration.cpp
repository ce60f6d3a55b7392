#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "qkdnet/dist_integration.hpp"
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

Reservation make_res(std::uint64_t id, std::uint64_t bits, SimTime at, std::uint32_t origin, LinkId link) {
  Reservation r;
  r.request_id = RequestId{id};
  r.links = {link};
  r.bits = bits;
  r.priority = Priority{at, DomainId{origin}};
  return r;
}

}  // namespace

TEST(PeerTable, MirrorsDomainGraphAndAvoidsDownPeers) {
  const auto s = testkit::load_reference("fig5_distributed");
  auto run = prepare_run(s);
  const auto& table = dynamic_cast<DistributedProtocol&>(run.engine->protocol()).table();
  const auto p = [&](std::uint32_t d) { return table.peer(DomainId{d}); };
  EXPECT_EQ(table.neighbours(p(2)), (std::vector<ControllerId>{p(1), p(3), p(4)}));
  EXPECT_EQ(table.neighbours(p(4)), (std::vector<ControllerId>{p(2)}));
  auto all = [](ControllerId) { return true; };
  EXPECT_EQ(*table.next_hop(p(1), p(3), all), p(2));
  EXPECT_EQ(*table.next_hop(p(1), p(2), all), p(2));
  auto no2 = [&](ControllerId c) { return c != p(2); };
  EXPECT_FALSE(table.next_hop(p(1), p(3), no2));
  EXPECT_EQ(link_owner(run.engine->topology(), run.engine->topology().backbone_links[1]), DomainId{2});
}

TEST(Arbiter, ExhaustiveInterleavingsGrantGreedyPrefix) {
  std::mt19937_64 rng(17);
  const LinkId link{100000000};
  for (int round = 0; round < 300; ++round) {
    const std::size_t k = 1 + rng() % 4;
    std::vector<Reservation> rs;
    for (std::size_t i = 0; i < k; ++i) {
      rs.push_back(make_res(i + 1, 1 + rng() % 500, static_cast<SimTime>(rng() % 3), static_cast<std::uint32_t>(1 + rng() % 3), link));
    }
    const std::uint64_t buffer = rng() % 1200;
    std::vector<Reservation> by_priority = rs;
    std::sort(by_priority.begin(), by_priority.end(), [](const Reservation& a, const Reservation& b) {
      return std::tie(a.priority, a.request_id) < std::tie(b.priority, b.request_id);
    });
    std::vector<std::uint64_t> bits;
    for (const auto& r : by_priority) bits.push_back(r.bits);
    std::set<RequestId> want;
    for (std::size_t i : testkit::greedy_prefix(bits, buffer)) want.insert(by_priority[i].request_id);

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    do {
      ReservationArbiter arb;
      for (std::size_t i : order) arb.submit(rs[i]);
      std::set<RequestId> granted;
      std::uint64_t total = 0;
      for (const auto& d : arb.decide([&](LinkId) { return buffer; })) {
        if (d.state == ReservationState::Granted) {
          granted.insert(d.request_id);
          total += d.bits;
        }
      }
      ASSERT_EQ(granted, want) << "round " << round;
      ASSERT_LE(total, buffer);
      EXPECT_EQ(arb.outstanding(link), total);
    } while (std::next_permutation(order.begin(), order.end()));
  }
}

TEST(Arbiter, OutstandingGrantsReduceLaterBatchesUntilReleased) {
  const LinkId link{100000000};
  ReservationArbiter arb;
  arb.submit(make_res(1, 600, 0, 1, link));
  auto first = arb.decide([](LinkId) { return 1000; });
  ASSERT_EQ(first.at(0).state, ReservationState::Granted);
  arb.submit(make_res(2, 600, 1, 1, link));
  EXPECT_EQ(arb.decide([](LinkId) { return 1000; }).at(0).state, ReservationState::Denied);
  arb.release(RequestId{1});
  EXPECT_EQ(arb.outstanding(link), 0u);
  arb.submit(make_res(3, 600, 2, 1, link));
  EXPECT_EQ(arb.decide([](LinkId) { return 1000; }).at(0).state, ReservationState::Granted);
}

TEST(Negotiation, FresherWinsTieGoesToSource) {
  const NodeId a = make_node_id(DomainId{1}, 0);
  const NodeId b = make_node_id(DomainId{2}, 0);
  const NodeId c = make_node_id(DomainId{3}, 0);
  const Proposal src{{a, b}, 10};
  EXPECT_EQ(peer_negotiate(src, src), (Path{a, b}));
  EXPECT_EQ(peer_negotiate(src, Proposal{{a, c, b}, 20}), (Path{a, c, b}));
  EXPECT_EQ(peer_negotiate(src, Proposal{{a, c, b}, 5}), (Path{a, b}));
  EXPECT_EQ(peer_negotiate(src, Proposal{{a, c, b}, 10}), (Path{a, b}));
  EXPECT_EQ(peer_negotiate(Proposal{{}, 50}, Proposal{{a, c, b}, 1}), (Path{a, c, b}));
  EXPECT_EQ(peer_negotiate(src, Proposal{{}, 50}), (Path{a, b}));
  try {
    peer_negotiate(Proposal{}, Proposal{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NegotiationFailed);
  }
}

TEST(Negotiation, SymmetricUnderIdenticalViews) {
  const auto s = testkit::load_reference("fig5_distributed");
  auto run = prepare_run(s);
  const auto& e = *run.engine;
  const auto& view = e.controller(ControllerId{0}).view;
  const NodeId x = make_node_id(DomainId{1}, 1);
  const NodeId y = make_node_id(DomainId{3}, 3);
  const auto forward = propose(e.topology(), view, x, y, 64, 0);
  auto backward = propose(e.topology(), view, y, x, 64, 0);
  std::reverse(backward.backbone.begin(), backward.backbone.end());
  EXPECT_EQ(peer_negotiate(forward, backward), forward.backbone);
  EXPECT_EQ(peer_negotiate(backward, forward), forward.backbone);
}

TEST(DistributedFlow, NarrativeSequence) {
  auto s = testkit::load_reference("fig5_distributed");
  s.requests.resize(1);
  const auto run = run_scenario(s);
  const std::vector<std::string> want{"KeyServiceRequest",        "Availability(1)",     "EWBI coordinate",
                                      "Availability(2)",          "agreed interdomain route", "IntradomainRouteSet",
                                      "key establishment",        "ConnectionEnd agreement",  "KeyReady"};
  EXPECT_EQ(distributed_projection(run.trace(), RequestId{1}), want);
  EXPECT_EQ(run.engine->session(RequestId{1}).state, SessionState::Closed);
}

TEST(DistributedFlow, TransitRequestsDeliverAndConserveKeys) {
  const auto run = run_scenario(testkit::load_reference("fig5_distributed"));
  const auto rep = summarize(run.trace());
  EXPECT_EQ(rep.success_ratio, 1.0);
  const auto audit = testkit::audit_keys(*run.engine);
  EXPECT_TRUE(audit.ok) << audit.problem;
  EXPECT_EQ(audit.deliveries, 4u);
}

TEST(DistributedFlow, ContentionGrantsByPriority) {
  const auto run = run_scenario(testkit::load_reference("contention"));
  const auto rep = summarize(run.trace());
  // All issued together: domain 1 outranks domain 2.
  EXPECT_EQ(req(rep, 1).outcome, Outcome::Delivered);
  EXPECT_EQ(req(rep, 3).outcome, Outcome::Delivered);
  EXPECT_EQ(req(rep, 2).error, "ReservationDenied");
  EXPECT_EQ(req(rep, 4).error, "ReservationDenied");
}

TEST(DistributedFlow, OutcomeIndependentOfSubmissionOrder) {
  const auto s = testkit::load_reference("contention");
  std::vector<std::string> reference;
  std::vector<std::size_t> order{0, 1, 2, 3};
  do {
    auto run = prepare_run(s);
    // Rebuild with the requests scheduled in this order; ids stay the same.
    auto fresh = std::make_unique<Engine>(run.engine->topology(), run.engine->config());
    install_distributed(*fresh, s.peers);
    for (std::size_t i : order) fresh->schedule_request(run.requests[i]);
    fresh->run_until(s.duration);
    std::vector<std::string> outcomes;
    for (const auto& r : summarize(fresh->trace()).requests) outcomes.emplace_back(to_string(r.outcome));
    if (reference.empty()) reference = outcomes;
    EXPECT_EQ(outcomes, reference);
  } while (std::next_permutation(order.begin(), order.end()));
}

TEST(DistributedFlow, GossipConvergesWithinOnePeriod) {
  auto s = testkit::load_reference("fig5_distributed");
  s.duration = seconds(25);
  const auto run = run_scenario(s);
  const auto& e = *run.engine;
  const auto& topo = e.topology();
  for (LinkId l : topo.backbone_links) {
    std::optional<LinkState> first;
    for (const auto& c : e.controllers()) {
      const auto& st = c.view.link_states.at(l);
      if (!first) first = st;
      EXPECT_EQ(st, *first) << c.name << " " << to_string(l);
    }
  }
}

// No route on either peer's view: the peers cannot agree.
TEST(DistributedFlow, BackboneLinkDownFailsNegotiation) {
  auto s = testkit::load_reference("fig5_distributed");
  s.requests.resize(1);
  const auto topo = build_scenario_topology(s);
  s.faults.entries = {FaultEntry{millis(500), FaultAction::LinkDown, to_string(topo.backbone_links[0])}};
  const auto run = run_scenario(s);
  EXPECT_EQ(req(summarize(run.trace()), 1).error, "NegotiationFailed");
  const auto hier = run_scenario(s, RunOptions{std::nullopt, Model::Hierarchical});
  EXPECT_EQ(req(summarize(hier.trace()), 1).error, "NoRoute");
}

TEST(DistributedFlow, NonParticipantDomainFaultHasNoEffect) {
  auto s = testkit::load_reference("fig5_distributed");
  s.requests.resize(3);
  const auto base = run_scenario(s);
  s.faults.entries = {FaultEntry{millis(500), FaultAction::DomainIsolate, "d4"}};
  const auto faulted = run_scenario(s);
  for (std::uint64_t id = 1; id <= 3; ++id) {
    EXPECT_EQ(session_records(base.trace(), RequestId{id}), session_records(faulted.trace(), RequestId{id})) << id;
  }
}
