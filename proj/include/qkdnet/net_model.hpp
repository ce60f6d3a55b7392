#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qkdnet/ids.hpp"

namespace qkdnet {

enum class NodeKind { Endpoint, Relay, Border };
enum class Medium { Fiber, FreeSpace, Satellite };
enum class TopologyKind { Ring, Star, Mesh, Bus };

std::string_view to_string(NodeKind k);
std::string_view to_string(Medium m);
std::string_view to_string(TopologyKind k);

// Half-open availability interval [start, end) in simulated time.
struct Window {
  SimTime start = 0;
  SimTime end = 0;
  bool operator==(const Window&) const = default;
};

struct Node {
  NodeId id;
  DomainId domain;
  NodeKind kind = NodeKind::Endpoint;
  bool has_kms = true;
  bool operator==(const Node&) const = default;
};

struct Link {
  LinkId id;
  NodeId a;
  NodeId b;
  Medium medium = Medium::Fiber;
  double length_km = 0.0;
  double loss_db = 0.0;
  std::vector<Window> availability;  // empty = always up
  bool has_classical_channel = true;
  // Set on logical channels switched through a passive node (star hub);
  // those carry key material between the two KMS ends.
  std::optional<NodeId> switched_via;
  // Overrides the loss-law rate (satellite passes are calibrated directly).
  std::optional<double> key_rate_bps;
  // Channels sharing one passive switch port time-share its rate.
  std::uint32_t rate_share = 1;
  bool operator==(const Link&) const = default;

  NodeId other(NodeId n) const { return n == a ? b : a; }
  bool touches(NodeId n) const { return n == a || n == b; }
};

// A domain together with its node/link tables, as produced by build_topology.
struct Domain {
  DomainId id;
  std::vector<NodeId> nodes;
  std::vector<LinkId> links;     // physical intradomain links
  std::vector<LinkId> channels;  // switched logical channels (passive hubs)
  ControllerId controller;
  std::vector<Node> node_table;
  std::vector<Link> link_table;  // physical links followed by channels
  bool operator==(const Domain&) const = default;
};

struct LossParams {
  double alpha_db_per_km = 0.2;
  double fixed_db = 0.0;
};

struct BuildParams {
  double link_length_km = 10.0;
  LossParams loss;
};

struct BackboneSpec {
  NodeId a;
  NodeId b;
  Medium medium = Medium::Fiber;
  double length_km = 0.0;
  std::optional<double> loss_db;  // required for FreeSpace/Satellite budgets
  std::optional<std::vector<Window>> availability;
  std::optional<double> key_rate_bps;
};

struct ComposeOptions {
  LossParams loss;
  bool satellite_trusted = true;
  // Default LEO passes for satellite links without explicit windows.
  SimTime satellite_window = seconds(5 * 60);
  SimTime satellite_period = seconds(90 * 60);
  SimTime window_horizon = seconds(24 * 3600);
};

struct Topology {
  std::vector<Domain> domains;
  std::vector<LinkId> backbone_links;
  std::map<NodeId, Node> nodes;
  std::map<LinkId, Link> links;
  LossParams loss;
  bool satellite_trusted = true;

  bool operator==(const Topology&) const = default;

  const Node& node(NodeId id) const;
  const Link& link(LinkId id) const;
  const Domain& domain(DomainId id) const;
  bool has_node(NodeId id) const { return nodes.contains(id); }
  bool has_link(LinkId id) const { return links.contains(id); }
  bool has_domain(DomainId id) const;
  bool is_backbone(LinkId id) const;

  // Links able to hold key material: both ends host a KMS and untrusted
  // satellites are excluded.
  bool key_capable(const Link& l) const;
  // Key-capable links incident to a node, ascending by id.
  std::vector<LinkId> key_links_at(NodeId n) const;
  // Links (physical and logical) touching any node of a domain, including
  // incident backbone links.
  std::set<LinkId> domain_scope(DomainId d) const;
};

// Fiber: alpha * length + fixed. Satellite/FreeSpace: the fixed budget.
double link_loss(Medium medium, double length_km, double alpha_db_per_km, double fixed_db);

Domain build_topology(TopologyKind kind, int n, DomainId domain, const BuildParams& params = {});

// Custom intradomain graph: `edges` are local index pairs with lengths.
struct CustomEdge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  double length_km = 10.0;
};
Domain build_custom_domain(DomainId domain, int n, const std::vector<CustomEdge>& edges,
                           const LossParams& loss = {});

Topology compose(std::vector<Domain> domains, const std::vector<BackboneSpec>& backbone,
                 const ComposeOptions& options = {});

enum class Rule {
  BorderMissing,
  BorderWithoutKms,
  WindowOverlap,
  WindowOrder,
  LossMismatch,
  MissingClassicalChannel,
  UnknownEndpoint,
  IntradomainCrossing,
  DomainDisconnected,
  NotInterdomain,
  DisconnectedBackbone,
  NegativeQuantity,
  DuplicateMembership,
};

std::string_view to_string(Rule r);

struct Violation {
  Rule rule;
  std::string entity;
  std::string message;
  bool operator==(const Violation&) const = default;
};

std::vector<Violation> validate(const Topology& topology);

// Repeating availability windows: `open` long every `period`, from t=0 up to `horizon`.
std::vector<Window> repeating_windows(SimTime open, SimTime period, SimTime horizon);

bool in_window(const std::vector<Window>& windows, SimTime t);
// Measure of [from, to) covered by the windows (or to-from if always up).
SimTime window_overlap(const std::vector<Window>& windows, SimTime from, SimTime to);

}  // namespace qkdnet
