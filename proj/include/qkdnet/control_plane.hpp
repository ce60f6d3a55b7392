#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qkdnet/error.hpp"
#include "qkdnet/ids.hpp"
#include "qkdnet/net_model.hpp"
#include "qkdnet/qkd_layer.hpp"

namespace qkdnet {

enum class Level { L1, L2, L3, Peer };
std::string_view to_string(Level level);

struct ControllerRole {
  Level level = Level::L1;
  std::optional<ControllerId> parent;  // set for L1/L2
};

struct LinkState {
  bool up = true;
  std::uint64_t bits_available = 0;
  SimTime last_updated = 0;
  bool operator==(const LinkState&) const = default;
};

struct NetworkView {
  std::set<DomainId> known_domains;
  std::map<LinkId, LinkState> link_states;
  // Links this controller may hold; nullopt = whole topology.
  std::optional<std::set<LinkId>> scope;

  bool in_scope(LinkId link) const { return !scope || scope->contains(link); }
  bool operator==(const NetworkView&) const = default;
};

using Path = std::vector<NodeId>;

// ---- Message vocabulary -------------------------------------------------

struct KeyServiceRequest {
  AppId app_src;
  AppId app_dst;
  std::uint32_t bits = 0;
  RequestId request_id;
  SimTime issued_at = 0;
};
struct AvailabilityQuery {
  RequestId request_id;
  NodeId node;
};
struct AvailabilityReply {
  RequestId request_id;
  NodeId node;
  bool ok = false;
  std::uint64_t bits_available = 0;
};
struct Escalate {
  RequestId request_id;
  KeyServiceRequest payload;
  std::uint32_t attempt = 1;
};
enum class RouteStage { Order, Propose, Agree };
struct InterdomainRoute {
  RequestId request_id;
  Path backbone_path;
  RouteStage stage = RouteStage::Order;
  SimTime freshness = 0;
  std::uint32_t attempt = 1;
};
struct IntradomainRouteSet {
  RequestId request_id;
  Path path;
  std::uint32_t attempt = 1;
};
struct KeyRelay {
  RequestId request_id;
  std::string key_id;
  Path path;
  std::size_t hop = 0;  // 0 = order from the controller, k = k-th quantum hop
  std::vector<std::uint8_t> ciphertext;
};
struct KeyReady {
  RequestId request_id;
  std::string key_id;
};
struct ConnectionEnd {
  RequestId request_id;
  std::uint32_t attempt = 1;
};
struct StateSync {
  ControllerId origin;
  std::uint64_t version = 0;
  std::vector<std::pair<LinkId, LinkState>> entries;
};
struct Priority {
  SimTime issued_at = 0;
  DomainId origin;
  auto operator<=>(const Priority&) const = default;
};
struct ReserveRequest {
  RequestId request_id;
  std::vector<LinkId> links;
  std::uint64_t bits = 0;
  Priority priority;
  std::uint32_t attempt = 1;
};
struct ReserveGrant {
  RequestId request_id;
  std::vector<LinkId> links;
  Priority priority;
  std::uint32_t attempt = 1;
};
struct ReserveDeny {
  RequestId request_id;
  std::vector<LinkId> links;
  Priority priority;
  std::uint32_t attempt = 1;
};
// Internal acknowledgement between protocol participants (availability
// confirmed downstream, key relay finished). Not part of the sequence
// diagrams, so conformance projections drop it.
enum class ConfirmKind { Availability, Delivered };
struct Confirm {
  RequestId request_id;
  ConfirmKind kind = ConfirmKind::Availability;
  std::uint32_t attempt = 1;
};
struct ErrorReport {
  RequestId request_id;
  Errc code = Errc::NoRoute;
  std::string segment;
  std::uint32_t attempt = 1;
};

using MessageBody = std::variant<KeyServiceRequest, AvailabilityQuery, AvailabilityReply, Escalate, InterdomainRoute,
                                 IntradomainRouteSet, KeyRelay, KeyReady, ConnectionEnd, StateSync, ReserveRequest,
                                 ReserveGrant, ReserveDeny, Confirm, ErrorReport>;

using Endpoint = std::variant<ControllerId, NodeId, AppId>;

struct Message {
  Endpoint from;
  Endpoint to;
  SimTime sent_at = 0;
  MessageBody body;
  // Final controller for hop-by-hop forwarding between controllers.
  std::optional<ControllerId> final_to;
};

std::string_view message_type(const MessageBody& body);
std::optional<RequestId> request_of(const MessageBody& body);
std::string message_detail(const MessageBody& body);
// Retry counter carried by multi-step messages (1 when not applicable).
std::uint32_t attempt_of(const MessageBody& body);

// ---- Sessions ------------------------------------------------------------

enum class SessionState { Routing, Establishing, Delivering, Closed, Failed };
std::string_view to_string(SessionState s);

struct InterdomainSession {
  KeyServiceRequest request;
  DomainId source_domain;
  DomainId dest_domain;
  std::optional<ControllerId> coordinator;
  Path backbone_path;
  std::map<DomainId, Path> intradomain_paths;
  Path full_path;
  SessionState state = SessionState::Routing;
  std::string key_id;
  std::uint32_t attempt = 1;
  std::optional<Errc> failure;
  std::string failure_segment;

  bool local() const { return source_domain == dest_domain; }
  // Forward-only transitions; Failed from any non-Closed state.
  void advance(SessionState next);
};

// ---- Operations ----------------------------------------------------------

enum class RequestScope { Local, Interdomain };

RequestScope classify_request(const Topology& topology, DomainId controller_domain, const KeyServiceRequest& req);

struct RouteQuery {
  NodeId src;
  NodeId dst;
  std::uint64_t bits = 0;
  SimTime now = 0;
  std::optional<DomainId> within;  // restrict to one domain's nodes
};

// Minimum-hop path over feasible links (up in the view, in window, enough
// bits), ties broken by the lexicographically smallest node sequence.
std::optional<Path> compute_route(const Topology& topology, const NetworkView& view, const RouteQuery& query);

bool link_feasible(const Topology& topology, const NetworkView& view, const Link& link, std::uint64_t bits,
                   SimTime now);

// First feasible link joining a and b, smallest id.
std::optional<LinkId> feasible_link_between(const Topology& topology, const NetworkView& view, NodeId a, NodeId b,
                                            std::uint64_t bits, SimTime now);

// Splits a source-to-destination route into the source-domain prefix, the
// interdomain segment (border to border) and the destination-domain suffix.
struct RouteSplit {
  Path source_part;
  Path backbone;
  Path dest_part;
};
RouteSplit split_route(const Path& route, DomainId source, DomainId dest);

std::vector<AvailabilityReply> availability_check(const KeyStore& store, const std::function<bool(NodeId)>& reachable,
                                                  const std::vector<NodeId>& nodes, RequestId request_id);

// Last-writer-wins merge; stale and out-of-scope entries are ignored.
// Returns true when any entry changed.
bool apply_state_update(NetworkView& view, const std::vector<std::pair<LinkId, LinkState>>& entries);

// Snapshot of ground-truth link state for the given links.
std::vector<std::pair<LinkId, LinkState>> observe_links(const KeyStore& store, const std::set<LinkId>& links,
                                                        SimTime now);

NetworkView make_view(const Topology& topology, std::optional<std::set<LinkId>> scope);

}  // namespace qkdnet
