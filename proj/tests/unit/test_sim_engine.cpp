#include <gtest/gtest.h>

#include <algorithm>

#include "qkdnet/hier_integration.hpp"
#include "qkdnet/metrics.hpp"
#include "qkdnet/sim_engine.hpp"

using namespace qkdnet;

namespace {

NodeId n1(std::uint32_t i) { return make_node_id(DomainId{1}, i); }
NodeId n2(std::uint32_t i) { return make_node_id(DomainId{2}, i); }

Topology two_rings() {
  std::vector<Domain> d{build_topology(TopologyKind::Ring, 4, DomainId{1}), build_topology(TopologyKind::Ring, 4, DomainId{2})};
  return compose(std::move(d), {BackboneSpec{n1(0), n2(0), Medium::Fiber, 45}});
}

// Records what the engine hands to the protocol.
class Probe : public Protocol {
 public:
  std::vector<std::string> log;

  std::string_view name() const override { return "probe"; }
  void start(Engine&) override { log.push_back("start"); }
  ControllerId entry_controller(const Engine&, DomainId) const override { return ControllerId{0}; }
  void on_message(Engine& e, const Message& m) override {
    log.push_back(std::string(message_type(m.body)) + "@" + std::to_string(e.now()));
  }
  void on_timer(Engine& e, const Timer& t) override { log.push_back("timer" + std::to_string(t.tag) + "@" + std::to_string(e.now())); }
  void on_fault(Engine&, const FaultEntry& f) override { log.push_back("fault:" + f.target); }
  void on_relay_complete(Engine&, RequestId id) override { log.push_back("relay" + std::to_string(id.value)); }
  void on_links_consumed(Engine&, const std::vector<LinkId>&, RequestId) override {}
};

struct Rig {
  Engine engine;
  Probe* probe;
  ControllerId c0;
  ControllerId c1;

  explicit Rig(bool standby = false, EngineConfig cfg = {}) : engine(two_rings(), cfg) {
    c0 = engine.add_controller("A", ControllerRole{Level::L1, std::nullopt}, DomainId{1}, std::nullopt, standby);
    c1 = engine.add_controller("B", ControllerRole{Level::L1, std::nullopt}, DomainId{2}, std::nullopt, false);
    auto p = std::make_unique<Probe>();
    probe = p.get();
    engine.set_protocol(std::move(p));
  }
};

}  // namespace

TEST(Latency, BaseDistanceAndFloor) {
  LatencyModel m;
  EXPECT_EQ(m.delay(Channel::Controller, 0), 5000);
  EXPECT_EQ(m.delay(Channel::DataPlane, 45), 5225);
  LatencyModel zero{{0, 0}, {0, 0}, {0, 0}, {0, 0}};
  EXPECT_EQ(zero.delay(Channel::Nbi, 0), 1);
}

TEST(Engine, EventsRunInTimeThenInsertionOrder) {
  Rig r;
  r.engine.schedule_timer(20, Timer{TimerKind::PeriodicSync, r.c0, 2});
  r.engine.schedule_timer(10, Timer{TimerKind::PeriodicSync, r.c0, 1});
  r.engine.schedule_timer(20, Timer{TimerKind::PeriodicSync, r.c0, 3});
  r.engine.run_until(100);
  EXPECT_EQ(r.probe->log, (std::vector<std::string>{"start", "timer1@10", "timer2@20", "timer3@20"}));
  EXPECT_EQ(r.engine.now(), 100);
  EXPECT_THROW(r.engine.schedule_timer(50, Timer{}), Error);
  EXPECT_THROW(r.engine.run_until(50), Error);
}

TEST(Engine, MessagesAreTracedOnDeliveryWithPlanes) {
  Rig r;
  r.engine.send(r.c0, r.c1, ConnectionEnd{RequestId{1}});
  r.engine.send(r.c0, n1(1), AvailabilityQuery{RequestId{1}, n1(1)});
  r.engine.send(n1(1), n1(0), KeyRelay{RequestId{1}, "k", {}, 1, {}}, std::nullopt, 10);
  r.engine.send(n1(1), AppId{n1(1)}, KeyReady{RequestId{1}, "k"});
  r.engine.run_until(seconds(1));
  const auto& t = r.engine.trace();
  // The node answers the query itself.
  ASSERT_EQ(t.size(), 5u);
  EXPECT_EQ(r.engine.delivered_messages(), t.size());
  EXPECT_EQ(std::count_if(t.begin(), t.end(), [](const TraceRecord& x) { return x.type == "AvailabilityReply"; }), 1);
  EXPECT_EQ(t[0].plane, Plane::CP);
  EXPECT_EQ(t[0].sender, "A");
  EXPECT_EQ(t[0].receiver, "B");
  EXPECT_EQ(t[0].time, 5000);
  const auto dp = std::find_if(t.begin(), t.end(), [](const TraceRecord& x) { return x.type == "KeyRelay"; });
  EXPECT_EQ(dp->plane, Plane::DP);
  EXPECT_EQ(dp->time, 5050);
  const auto ap = std::find_if(t.begin(), t.end(), [](const TraceRecord& x) { return x.type == "KeyReady"; });
  EXPECT_EQ(ap->plane, Plane::AP);
}

TEST(Engine, DownControllerWithoutStandbyIsUnreachable) {
  Rig r;
  r.engine.inject_fault(FaultEntry{10, FaultAction::ControllerDown, "B"});
  r.engine.run_until(20);
  EXPECT_EQ(r.engine.send(r.c0, r.c1, ConnectionEnd{RequestId{1}}), SendStatus::Unreachable);
  r.engine.run_until(seconds(1));
  EXPECT_TRUE(r.engine.trace().empty());
}

TEST(Engine, DownControllerWithStandbyDropsUntilTakeover) {
  Rig r(true);
  r.engine.inject_fault(FaultEntry{10, FaultAction::ControllerDown, "A"});
  r.engine.run_until(20);
  EXPECT_EQ(r.engine.send(r.c1, r.c0, ConnectionEnd{RequestId{1}}), SendStatus::Sent);
  r.engine.run_until(seconds(1));
  EXPECT_TRUE(r.engine.trace().empty());
  EXPECT_EQ(r.engine.dropped_messages(), 1u);
  r.engine.controller(r.c0).standby_active = true;
  r.engine.send(r.c1, r.c0, ConnectionEnd{RequestId{1}});
  r.engine.run_until(seconds(2));
  EXPECT_EQ(r.engine.trace().size(), 1u);
}

TEST(Engine, FaultTargetsAreChecked) {
  Rig r;
  auto code = [&](FaultEntry f) {
    try {
      r.engine.inject_fault(f);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::ScenarioError;
  };
  EXPECT_EQ(code({10, FaultAction::ControllerDown, "Z"}), Errc::UnknownEntity);
  EXPECT_EQ(code({10, FaultAction::LinkDown, "l999"}), Errc::UnknownEntity);
  EXPECT_EQ(code({10, FaultAction::DomainIsolate, "d9"}), Errc::UnknownEntity);
  EXPECT_EQ(code({10, FaultAction::LinkDown, "x"}), Errc::UnknownEntity);
  r.engine.run_until(100);
  EXPECT_EQ(code({50, FaultAction::ControllerDown, "A"}), Errc::SchedulingError);
}

TEST(Engine, LinkAndDomainFaultsAreReferenceCounted) {
  Rig r;
  const LinkId bb = r.engine.topology().backbone_links[0];
  const std::string name = to_string(bb);
  r.engine.inject_fault({10, FaultAction::LinkDown, name});
  r.engine.inject_fault({20, FaultAction::DomainIsolate, "d1"});
  r.engine.inject_fault({30, FaultAction::LinkUp, name});
  r.engine.run_until(35);
  EXPECT_FALSE(r.engine.store().link_up(bb));
  EXPECT_TRUE(r.engine.domain_isolated(DomainId{1}));
  EXPECT_FALSE(r.engine.controller(r.c0).up());
  EXPECT_TRUE(r.engine.controller(r.c1).up());
  r.engine.inject_fault({40, FaultAction::DomainRestore, "d1"});
  r.engine.run_until(50);
  EXPECT_TRUE(r.engine.store().link_up(bb));
  EXPECT_TRUE(r.engine.controller(r.c0).up());
  EXPECT_EQ(std::count(r.probe->log.begin(), r.probe->log.end(), "fault:d1"), 2);
}

TEST(Engine, DirectViewsRefreshOnLinkFault) {
  Rig r;
  const LinkId bb = r.engine.topology().backbone_links[0];
  r.engine.inject_fault({10, FaultAction::LinkDown, to_string(bb)});
  r.engine.run_until(20);
  EXPECT_FALSE(r.engine.controller(r.c0).view.link_states.at(bb).up);
  EXPECT_FALSE(r.engine.controller(r.c1).view.link_states.at(bb).up);
}

TEST(Engine, ZeroBitRequestRejectedBeforeAnyMessage) {
  Rig r;
  try {
    r.engine.schedule_request(KeyServiceRequest{AppId{n1(1)}, AppId{n1(2)}, 0, RequestId{1}, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidRequest);
  }
  r.engine.run_until(seconds(1));
  EXPECT_TRUE(r.engine.trace().empty());
}

TEST(Engine, RelayConsumesAtOrderAndDeliversIdenticalBlocks) {
  EngineConfig cfg;
  cfg.initial_bits = 1000;
  Rig r(false, cfg);
  auto& e = r.engine;
  const KeyServiceRequest req{AppId{n1(1)}, AppId{n2(3)}, 200, RequestId{1}, 0};
  e.open_session(req);
  const Path path{n1(1), n1(0), n2(0), n2(3)};
  ASSERT_FALSE(e.start_relay(RequestId{1}, r.c0, path));
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const auto l = *e.store().link_between(path[i], path[i + 1], 0, 0);
    EXPECT_EQ(e.store().account(l).consumed, 200u);
    EXPECT_EQ(e.relay_consumption().at(l), 200u);
  }
  e.run_until(seconds(1));
  ASSERT_EQ(e.deliveries().size(), 1u);
  const auto& d = e.deliveries()[0];
  EXPECT_EQ(d.at_src, d.at_dst);
  EXPECT_EQ(d.key_id, "k1.1");
  EXPECT_EQ(r.probe->log.back(), "relay1");
  EXPECT_EQ(std::count_if(e.trace().begin(), e.trace().end(),
                          [](const TraceRecord& x) { return x.type == "KeyRelay" && x.plane == Plane::DP; }),
            3);
}

TEST(Engine, RelayOnDepletedPathFailsWithoutConsuming) {
  EngineConfig cfg;
  cfg.initial_bits = 100;
  Engine e(two_rings(), cfg);
  install_hierarchical(e, default_hierarchy(e.topology()));
  e.open_session(KeyServiceRequest{AppId{n1(1)}, AppId{n2(3)}, 200, RequestId{1}, 0});
  std::string hop;
  const auto err = e.start_relay(RequestId{1}, *e.controller_by_name("L3"), Path{n1(1), n1(0), n2(0)}, &hop);
  ASSERT_TRUE(err);
  EXPECT_EQ(*err, Errc::KeyDepleted);
  EXPECT_EQ(hop, "qn1.1-qn1.0");
  for (const auto& [id, acc] : e.store().accounts()) EXPECT_EQ(acc.consumed, 0u);
}

TEST(FaultScript, NestingChecked) {
  FaultScript ok{{{1, FaultAction::LinkDown, "l1"}, {2, FaultAction::LinkUp, "l1"}}};
  EXPECT_TRUE(check_nesting(ok).empty());
  FaultScript bad{{{1, FaultAction::LinkUp, "l1"}}};
  EXPECT_FALSE(check_nesting(bad).empty());
  EXPECT_EQ(fault_action_from_string("DomainIsolate"), FaultAction::DomainIsolate);
  EXPECT_THROW(fault_action_from_string("Explode"), Error);
}
