#include <gtest/gtest.h>

#include <random>

#include "qkdnet/control_plane.hpp"
#include "support.hpp"

using namespace qkdnet;

namespace {

NodeId n1(std::uint32_t i) { return make_node_id(DomainId{1}, i); }
NodeId n2(std::uint32_t i) { return make_node_id(DomainId{2}, i); }

NetworkView full_view(const Topology& t, std::uint64_t bits) {
  auto v = make_view(t, std::nullopt);
  for (const auto& [id, l] : t.links) v.link_states[id] = LinkState{true, bits, 0};
  return v;
}

Topology two_rings() {
  std::vector<Domain> d{build_topology(TopologyKind::Ring, 4, DomainId{1}), build_topology(TopologyKind::Ring, 4, DomainId{2})};
  return compose(std::move(d), {BackboneSpec{n1(0), n2(0), Medium::Fiber, 45}});
}

}  // namespace

TEST(ComputeRoute, MatchesBruteForceOnRandomGraphs) {
  std::mt19937_64 rng(99);
  int found = 0;
  for (int i = 0; i < 300; ++i) {
    const auto g = testkit::random_graph(rng, 8);
    const auto got = compute_route(g.topology, g.view, g.query);
    const auto want = testkit::brute_force_route(g.topology, g.view, g.query);
    ASSERT_EQ(got, want) << "graph " << i;
    found += got.has_value();
  }
  EXPECT_GT(found, 50);
}

TEST(ComputeRoute, TieBreakIsLexicographic) {
  // Square 0-1-3, 0-2-3: both two hops, 0,1,3 wins.
  const auto t = compose({build_custom_domain(DomainId{1}, 4, {{0, 2, 1}, {2, 3, 1}, {0, 1, 1}, {1, 3, 1}})}, {});
  const auto v = full_view(t, 100);
  EXPECT_EQ(*compute_route(t, v, RouteQuery{n1(0), n1(3), 10, 0}), (Path{n1(0), n1(1), n1(3)}));
  EXPECT_EQ(*compute_route(t, v, RouteQuery{n1(3), n1(0), 10, 0}), (Path{n1(3), n1(1), n1(0)}));
}

TEST(ComputeRoute, RespectsBitsStateAndScope) {
  const auto t = two_rings();
  auto v = full_view(t, 100);
  EXPECT_FALSE(compute_route(t, v, RouteQuery{n1(1), n2(2), 101, 0}));
  EXPECT_EQ(compute_route(t, v, RouteQuery{n1(1), n2(2), 100, 0})->size(), 5u);
  EXPECT_FALSE(compute_route(t, v, RouteQuery{n1(1), n2(2), 1, 0, DomainId{1}}));
  EXPECT_EQ(*compute_route(t, v, RouteQuery{n1(1), n1(0), 1, 0, DomainId{1}}), (Path{n1(1), n1(0)}));
  v.link_states.at(t.backbone_links[0]).up = false;
  EXPECT_FALSE(compute_route(t, v, RouteQuery{n1(1), n2(2), 1, 0}));
  EXPECT_THROW(compute_route(t, v, RouteQuery{n1(1), n1(1), 1, 0}), Error);
  EXPECT_THROW(compute_route(t, v, RouteQuery{n1(1), n1(9), 1, 0}), Error);
}

TEST(ComputeRoute, OutOfScopeLinksAreInvisible) {
  const auto t = two_rings();
  auto v = full_view(t, 100);
  v.scope = t.domain_scope(DomainId{1});
  EXPECT_FALSE(compute_route(t, v, RouteQuery{n1(1), n2(2), 1, 0}));
  EXPECT_TRUE(compute_route(t, v, RouteQuery{n1(1), n2(0), 1, 0}));
}

TEST(SplitRoute, ThreeSegments) {
  const Path route{n1(1), n1(0), n2(0), n2(3)};
  const auto s = split_route(route, DomainId{1}, DomainId{2});
  EXPECT_EQ(s.source_part, (Path{n1(1), n1(0)}));
  EXPECT_EQ(s.backbone, (Path{n1(0), n2(0)}));
  EXPECT_EQ(s.dest_part, (Path{n2(0), n2(3)}));
  const NodeId t3 = make_node_id(DomainId{3}, 0);
  const auto transit = split_route(Path{n1(0), t3, n2(0)}, DomainId{1}, DomainId{2});
  EXPECT_EQ(transit.backbone, (Path{n1(0), t3, n2(0)}));
  EXPECT_EQ(transit.source_part, (Path{n1(0)}));
}

TEST(Session, ForwardOnly) {
  InterdomainSession s;
  s.advance(SessionState::Establishing);
  EXPECT_THROW(s.advance(SessionState::Routing), Error);
  s.advance(SessionState::Delivering);
  s.advance(SessionState::Closed);
  EXPECT_THROW(s.advance(SessionState::Failed), Error);
  InterdomainSession f;
  f.advance(SessionState::Failed);
  try {
    f.advance(SessionState::Closed);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidState);
  }
}

TEST(Classify, LocalOnlyWhenBothEndsInDomain) {
  const auto t = two_rings();
  KeyServiceRequest r{AppId{n1(1)}, AppId{n1(2)}, 8};
  EXPECT_EQ(classify_request(t, DomainId{1}, r), RequestScope::Local);
  r.app_dst = AppId{n2(1)};
  EXPECT_EQ(classify_request(t, DomainId{1}, r), RequestScope::Interdomain);
}

TEST(StateUpdate, LastWriterWinsWithinScope) {
  const auto t = two_rings();
  auto v = make_view(t, t.domain_scope(DomainId{1}));
  const LinkId in = t.domains[0].links[0];
  const LinkId out = t.domains[1].links[0];
  EXPECT_TRUE(apply_state_update(v, {{in, LinkState{true, 10, 5}}, {out, LinkState{true, 10, 5}}}));
  EXPECT_FALSE(v.link_states.contains(out));
  EXPECT_FALSE(apply_state_update(v, {{in, LinkState{false, 0, 4}}}));
  EXPECT_EQ(v.link_states.at(in).bits_available, 10u);
  EXPECT_TRUE(apply_state_update(v, {{in, LinkState{false, 0, 6}}}));
  EXPECT_FALSE(apply_state_update(v, {{in, LinkState{false, 0, 6}}}));
}

TEST(Availability, UnreachableOrKmslessNodesReportNotOk) {
  const auto t = two_rings();
  KeyStore store(t, RateModel{}, 1, 40);
  auto replies = availability_check(store, [](NodeId n) { return n != n1(2); }, {n1(1), n1(2)}, RequestId{3});
  ASSERT_EQ(replies.size(), 2u);
  EXPECT_TRUE(replies[0].ok);
  EXPECT_EQ(replies[0].bits_available, 80u);
  EXPECT_FALSE(replies[1].ok);
  EXPECT_EQ(replies[1].request_id, RequestId{3});
}

TEST(Messages, TypeRequestDetailAttempt) {
  const MessageBody ksr = KeyServiceRequest{AppId{n1(1)}, AppId{n2(2)}, 256, RequestId{4}, 1000};
  EXPECT_EQ(message_type(ksr), "KeyServiceRequest");
  EXPECT_EQ(*request_of(ksr), RequestId{4});
  EXPECT_EQ(message_detail(ksr), "src=app@qn1.1 dst=app@qn2.2 bits=256 issued_us=1000");
  const MessageBody end = ConnectionEnd{RequestId{4}, 2};
  EXPECT_EQ(attempt_of(end), 2u);
  EXPECT_EQ(message_detail(end), "attempt=2");
  EXPECT_EQ(attempt_of(ksr), 1u);
  const MessageBody sync = StateSync{ControllerId{1}, 3, {}};
  EXPECT_FALSE(request_of(sync));
  EXPECT_EQ(message_type(ErrorReport{RequestId{1}, Errc::NoRoute, "x"}), "Error");
  EXPECT_EQ(message_detail(ErrorReport{RequestId{1}, Errc::NoRoute, "x"}), "code=NoRoute segment=x");
}

TEST(Errors, NamesRoundTrip) {
  for (Errc c : {Errc::NoRoute, Errc::KeyDepleted, Errc::IncomparableRuns, Errc::ScenarioError}) {
    EXPECT_EQ(errc_from_string(to_string(c)), c);
  }
  EXPECT_THROW(errc_from_string("Nope"), Error);
}
