#include "qkdnet/control_plane.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <sstream>

namespace qkdnet {

std::string_view to_string(Level level) {
  switch (level) {
    case Level::L1: return "L1";
    case Level::L2: return "L2";
    case Level::L3: return "L3";
    case Level::Peer: return "Peer";
  }
  return "?";
}

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::Routing: return "Routing";
    case SessionState::Establishing: return "Establishing";
    case SessionState::Delivering: return "Delivering";
    case SessionState::Closed: return "Closed";
    case SessionState::Failed: return "Failed";
  }
  return "?";
}

void InterdomainSession::advance(SessionState next) {
  if (state == SessionState::Closed || state == SessionState::Failed) {
    throw Error(Errc::InvalidState, "session " + std::to_string(request.request_id.value) + " already " +
                                        std::string(to_string(state)));
  }
  if (next != SessionState::Failed && static_cast<int>(next) <= static_cast<int>(state)) {
    throw Error(Errc::InvalidState, "session " + std::to_string(request.request_id.value) + " cannot go from " +
                                        std::string(to_string(state)) + " to " + std::string(to_string(next)));
  }
  state = next;
}

namespace {

std::string join_path(const Path& path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) out += ',';
    out += to_string(path[i]);
  }
  return out;
}

std::string join_links(const std::vector<LinkId>& links) {
  std::string out;
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (i) out += ',';
    out += to_string(links[i]);
  }
  return out;
}

std::string_view stage_name(RouteStage s) {
  switch (s) {
    case RouteStage::Order: return "order";
    case RouteStage::Propose: return "propose";
    case RouteStage::Agree: return "agree";
  }
  return "?";
}

std::string priority_detail(const Priority& p) {
  return "issued_us=" + std::to_string(p.issued_at) + " origin=" + to_string(p.origin);
}

}  // namespace

std::string_view message_type(const MessageBody& body) {
  struct Namer {
    std::string_view operator()(const KeyServiceRequest&) const { return "KeyServiceRequest"; }
    std::string_view operator()(const AvailabilityQuery&) const { return "AvailabilityQuery"; }
    std::string_view operator()(const AvailabilityReply&) const { return "AvailabilityReply"; }
    std::string_view operator()(const Escalate&) const { return "Escalate"; }
    std::string_view operator()(const InterdomainRoute&) const { return "InterdomainRoute"; }
    std::string_view operator()(const IntradomainRouteSet&) const { return "IntradomainRouteSet"; }
    std::string_view operator()(const KeyRelay&) const { return "KeyRelay"; }
    std::string_view operator()(const KeyReady&) const { return "KeyReady"; }
    std::string_view operator()(const ConnectionEnd&) const { return "ConnectionEnd"; }
    std::string_view operator()(const StateSync&) const { return "StateSync"; }
    std::string_view operator()(const ReserveRequest&) const { return "ReserveRequest"; }
    std::string_view operator()(const ReserveGrant&) const { return "ReserveGrant"; }
    std::string_view operator()(const ReserveDeny&) const { return "ReserveDeny"; }
    std::string_view operator()(const Confirm&) const { return "Confirm"; }
    std::string_view operator()(const ErrorReport&) const { return "Error"; }
  };
  return std::visit(Namer{}, body);
}

std::optional<RequestId> request_of(const MessageBody& body) {
  return std::visit(
      [](const auto& m) -> std::optional<RequestId> {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, StateSync>) {
          return std::nullopt;
        } else {
          return m.request_id;
        }
      },
      body);
}

std::uint32_t attempt_of(const MessageBody& body) {
  return std::visit(
      [](const auto& m) -> std::uint32_t {
        if constexpr (requires { m.attempt; }) {
          return m.attempt;
        } else {
          return 1;
        }
      },
      body);
}

std::string message_detail(const MessageBody& body) {
  struct Detail {
    std::string operator()(const KeyServiceRequest& m) const {
      return "src=" + to_string(m.app_src) + " dst=" + to_string(m.app_dst) + " bits=" + std::to_string(m.bits) +
             " issued_us=" + std::to_string(m.issued_at);
    }
    std::string operator()(const AvailabilityQuery& m) const { return "node=" + to_string(m.node); }
    std::string operator()(const AvailabilityReply& m) const {
      return "node=" + to_string(m.node) + " ok=" + (m.ok ? "1" : "0") + " bits=" + std::to_string(m.bits_available);
    }
    std::string operator()(const Escalate& m) const {
      return "src=" + to_string(m.payload.app_src) + " dst=" + to_string(m.payload.app_dst) +
             " bits=" + std::to_string(m.payload.bits);
    }
    std::string operator()(const InterdomainRoute& m) const {
      return "stage=" + std::string(stage_name(m.stage)) + " path=" + join_path(m.backbone_path) +
             " freshness_us=" + std::to_string(m.freshness);
    }
    std::string operator()(const IntradomainRouteSet& m) const { return "path=" + join_path(m.path); }
    std::string operator()(const KeyRelay& m) const {
      std::string out = "key=" + m.key_id + " hop=" + std::to_string(m.hop);
      if (m.hop == 0) return out + " path=" + join_path(m.path);
      return out + " ct=" + hex_digest(m.ciphertext);
    }
    std::string operator()(const KeyReady& m) const { return "key=" + m.key_id; }
    std::string operator()(const ConnectionEnd&) const { return ""; }
    std::string operator()(const StateSync& m) const {
      return "origin=c" + std::to_string(m.origin.value) + " version=" + std::to_string(m.version) +
             " links=" + std::to_string(m.entries.size());
    }
    std::string operator()(const ReserveRequest& m) const {
      return "links=" + join_links(m.links) + " bits=" + std::to_string(m.bits) + " " + priority_detail(m.priority);
    }
    std::string operator()(const ReserveGrant& m) const {
      return "links=" + join_links(m.links) + " " + priority_detail(m.priority);
    }
    std::string operator()(const ReserveDeny& m) const {
      return "links=" + join_links(m.links) + " " + priority_detail(m.priority);
    }
    std::string operator()(const Confirm& m) const {
      return std::string("kind=") + (m.kind == ConfirmKind::Availability ? "availability" : "delivered");
    }
    std::string operator()(const ErrorReport& m) const {
      std::string out = "code=" + std::string(to_string(m.code));
      if (!m.segment.empty()) out += " segment=" + m.segment;
      return out;
    }
  };
  std::string out = std::visit(Detail{}, body);
  if (const auto a = attempt_of(body); a > 1) out += (out.empty() ? "" : " ") + std::string("attempt=") + std::to_string(a);
  return out;
}

RequestScope classify_request(const Topology& topology, DomainId controller_domain, const KeyServiceRequest& req) {
  const auto& src = topology.node(req.app_src.node);
  const auto& dst = topology.node(req.app_dst.node);
  return src.domain == controller_domain && dst.domain == controller_domain ? RequestScope::Local
                                                                            : RequestScope::Interdomain;
}

bool link_feasible(const Topology& topology, const NetworkView& view, const Link& link, std::uint64_t bits,
                   SimTime now) {
  if (!topology.key_capable(link) || !view.in_scope(link.id)) return false;
  auto it = view.link_states.find(link.id);
  if (it == view.link_states.end()) return false;
  return it->second.up && it->second.bits_available >= bits && in_window(link.availability, now);
}

std::optional<LinkId> feasible_link_between(const Topology& topology, const NetworkView& view, NodeId a, NodeId b,
                                            std::uint64_t bits, SimTime now) {
  for (const auto& [id, link] : topology.links) {
    const bool joins = (link.a == a && link.b == b) || (link.a == b && link.b == a);
    if (joins && link_feasible(topology, view, link, bits, now)) return id;
  }
  return std::nullopt;
}

std::optional<Path> compute_route(const Topology& topology, const NetworkView& view, const RouteQuery& query) {
  if (query.src == query.dst) throw Error(Errc::InvalidRequest, "route source equals destination");
  if (!topology.has_node(query.src) || !topology.has_node(query.dst)) {
    throw Error(Errc::UnknownNode, "route endpoint not in topology");
  }

  auto allowed = [&](NodeId n) { return !query.within || topology.node(n).domain == *query.within; };
  if (!allowed(query.src) || !allowed(query.dst)) return std::nullopt;

  std::map<NodeId, std::set<NodeId>> adjacency;
  for (const auto& [id, link] : topology.links) {
    if (!allowed(link.a) || !allowed(link.b)) continue;
    if (!link_feasible(topology, view, link, query.bits, query.now)) continue;
    adjacency[link.a].insert(link.b);
    adjacency[link.b].insert(link.a);
  }

  // Hop distances to the destination, then walk forward taking the smallest
  // neighbour that stays on a shortest path.
  std::map<NodeId, std::size_t> dist;
  std::deque<NodeId> frontier{query.dst};
  dist[query.dst] = 0;
  while (!frontier.empty()) {
    const NodeId v = frontier.front();
    frontier.pop_front();
    for (NodeId w : adjacency[v]) {
      if (dist.emplace(w, dist[v] + 1).second) frontier.push_back(w);
    }
  }
  auto it = dist.find(query.src);
  if (it == dist.end()) return std::nullopt;

  Path path{query.src};
  NodeId at = query.src;
  while (at != query.dst) {
    const std::size_t d = dist.at(at);
    for (NodeId w : adjacency[at]) {
      auto dw = dist.find(w);
      if (dw != dist.end() && dw->second + 1 == d) {
        at = w;
        break;
      }
    }
    path.push_back(at);
  }
  return path;
}

RouteSplit split_route(const Path& route, DomainId source, DomainId dest) {
  RouteSplit split;
  if (route.empty()) return split;
  std::size_t exit = 0;
  while (exit + 1 < route.size() && domain_of(route[exit + 1]) == source) ++exit;
  std::size_t entry = route.size() - 1;
  while (entry > exit && domain_of(route[entry - 1]) == dest) --entry;
  split.source_part.assign(route.begin(), route.begin() + static_cast<std::ptrdiff_t>(exit) + 1);
  split.backbone.assign(route.begin() + static_cast<std::ptrdiff_t>(exit),
                        route.begin() + static_cast<std::ptrdiff_t>(entry) + 1);
  split.dest_part.assign(route.begin() + static_cast<std::ptrdiff_t>(entry), route.end());
  return split;
}

std::vector<AvailabilityReply> availability_check(const KeyStore& store, const std::function<bool(NodeId)>& reachable,
                                                  const std::vector<NodeId>& nodes, RequestId request_id) {
  std::vector<AvailabilityReply> replies;
  replies.reserve(nodes.size());
  for (NodeId n : nodes) {
    AvailabilityReply r{request_id, n, false, 0};
    if (store.has_kms(n) && reachable(n)) {
      r.ok = true;
      r.bits_available = store.node_bits(n);
    }
    replies.push_back(r);
  }
  return replies;
}

bool apply_state_update(NetworkView& view, const std::vector<std::pair<LinkId, LinkState>>& entries) {
  bool changed = false;
  for (const auto& [link, state] : entries) {
    if (!view.in_scope(link)) continue;
    auto it = view.link_states.find(link);
    if (it == view.link_states.end()) {
      view.link_states.emplace(link, state);
      changed = true;
    } else if (state.last_updated >= it->second.last_updated) {
      if (!(it->second == state)) changed = true;
      it->second = state;
    }
  }
  return changed;
}

std::vector<std::pair<LinkId, LinkState>> observe_links(const KeyStore& store, const std::set<LinkId>& links,
                                                        SimTime now) {
  std::vector<std::pair<LinkId, LinkState>> out;
  for (LinkId id : links) {
    if (!store.accounts().contains(id)) continue;
    out.emplace_back(id, LinkState{store.link_up(id), store.bits_available(id), now});
  }
  return out;
}

NetworkView make_view(const Topology& topology, std::optional<std::set<LinkId>> scope) {
  NetworkView view;
  view.scope = std::move(scope);
  for (const auto& [id, link] : topology.links) {
    if (!view.in_scope(id)) continue;
    view.known_domains.insert(domain_of(link.a));
    view.known_domains.insert(domain_of(link.b));
  }
  if (!view.scope) {
    for (const auto& d : topology.domains) view.known_domains.insert(d.id);
  }
  return view;
}

}  // namespace qkdnet
