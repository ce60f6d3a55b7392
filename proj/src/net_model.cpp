#include "qkdnet/net_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "qkdnet/error.hpp"

namespace qkdnet {

namespace {

constexpr int kMaxDomainSize = 100;
constexpr std::uint32_t kMaxDomainId = kBackboneLinkBase / kLinksPerDomain;

LinkId intradomain_link_id(DomainId d, std::uint32_t k) {
  return LinkId{d.value * kLinksPerDomain + k};
}

LinkId channel_link_id(DomainId d, std::uint32_t k) {
  return LinkId{d.value * kLinksPerDomain + kChannelOffset + k};
}

Link fiber_link(LinkId id, NodeId a, NodeId b, double length_km, const LossParams& loss) {
  Link l;
  l.id = id;
  l.a = std::min(a, b);
  l.b = std::max(a, b);
  l.medium = Medium::Fiber;
  l.length_km = length_km;
  l.loss_db = link_loss(Medium::Fiber, length_km, loss.alpha_db_per_km, loss.fixed_db);
  return l;
}

void check_domain_id(DomainId d) {
  if (d.value >= kMaxDomainId) {
    throw Error(Errc::InvalidTopologyParam,
                "domain id " + std::to_string(d.value) + " exceeds " + std::to_string(kMaxDomainId - 1));
  }
}

// Connected components over an undirected edge list on `count` vertices.
std::size_t component_count(std::size_t count, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::size_t> parent(count);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  std::size_t components = count;
  for (auto [a, b] : edges) {
    auto ra = find(a);
    auto rb = find(b);
    if (ra != rb) {
      parent[ra] = rb;
      --components;
    }
  }
  return components;
}

}  // namespace

std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Endpoint: return "Endpoint";
    case NodeKind::Relay: return "Relay";
    case NodeKind::Border: return "Border";
  }
  return "?";
}

std::string_view to_string(Medium m) {
  switch (m) {
    case Medium::Fiber: return "fiber";
    case Medium::FreeSpace: return "free_space";
    case Medium::Satellite: return "satellite";
  }
  return "?";
}

std::string_view to_string(TopologyKind k) {
  switch (k) {
    case TopologyKind::Ring: return "ring";
    case TopologyKind::Star: return "star";
    case TopologyKind::Mesh: return "mesh";
    case TopologyKind::Bus: return "bus";
  }
  return "?";
}

std::string_view to_string(Rule r) {
  switch (r) {
    case Rule::BorderMissing: return "BorderMissing";
    case Rule::BorderWithoutKms: return "BorderWithoutKms";
    case Rule::WindowOverlap: return "WindowOverlap";
    case Rule::WindowOrder: return "WindowOrder";
    case Rule::LossMismatch: return "LossMismatch";
    case Rule::MissingClassicalChannel: return "MissingClassicalChannel";
    case Rule::UnknownEndpoint: return "UnknownEndpoint";
    case Rule::IntradomainCrossing: return "IntradomainCrossing";
    case Rule::DomainDisconnected: return "DomainDisconnected";
    case Rule::NotInterdomain: return "NotInterdomain";
    case Rule::DisconnectedBackbone: return "DisconnectedBackbone";
    case Rule::NegativeQuantity: return "NegativeQuantity";
    case Rule::DuplicateMembership: return "DuplicateMembership";
  }
  return "?";
}

double link_loss(Medium medium, double length_km, double alpha_db_per_km, double fixed_db) {
  if (medium == Medium::Fiber) {
    return alpha_db_per_km * length_km + fixed_db;
  }
  return fixed_db;
}

Domain build_topology(TopologyKind kind, int n, DomainId domain, const BuildParams& params) {
  check_domain_id(domain);
  const int minimum = kind == TopologyKind::Ring ? 3 : 2;
  if (n < minimum || n > kMaxDomainSize) {
    throw Error(Errc::InvalidTopologyParam, std::string(to_string(kind)) + " needs " +
                                                std::to_string(minimum) + " <= n <= " +
                                                std::to_string(kMaxDomainSize) + ", got " +
                                                std::to_string(n));
  }

  Domain d;
  d.id = domain;
  d.controller = ControllerId{domain.value};
  const auto count = static_cast<std::uint32_t>(n);
  for (std::uint32_t i = 0; i < count; ++i) {
    d.node_table.push_back(Node{make_node_id(domain, i), domain, NodeKind::Endpoint, true});
  }

  std::uint32_t next = 0;
  auto add = [&](std::uint32_t i, std::uint32_t j) {
    d.link_table.push_back(fiber_link(intradomain_link_id(domain, next++), make_node_id(domain, i),
                                      make_node_id(domain, j), params.link_length_km, params.loss));
  };

  switch (kind) {
    case TopologyKind::Ring:
      for (std::uint32_t i = 0; i < count; ++i) add(i, (i + 1) % count);
      break;
    case TopologyKind::Bus:
      for (std::uint32_t i = 0; i + 1 < count; ++i) add(i, i + 1);
      break;
    case TopologyKind::Mesh:
      for (std::uint32_t i = 0; i < count; ++i) {
        for (std::uint32_t j = i + 1; j < count; ++j) add(i, j);
      }
      break;
    case TopologyKind::Star: {
      // Leaves 0..n-1, passive hub at index n.
      const NodeId hub = make_node_id(domain, count);
      d.node_table.push_back(Node{hub, domain, NodeKind::Relay, false});
      for (std::uint32_t i = 0; i < count; ++i) add(i, count);
      std::uint32_t k = 0;
      for (std::uint32_t i = 0; i < count; ++i) {
        for (std::uint32_t j = i + 1; j < count; ++j) {
          const Link& si = d.link_table[i];
          const Link& sj = d.link_table[j];
          Link ch;
          ch.id = channel_link_id(domain, k++);
          ch.a = make_node_id(domain, i);
          ch.b = make_node_id(domain, j);
          ch.medium = Medium::Fiber;
          ch.length_km = si.length_km + sj.length_km;
          ch.loss_db = si.loss_db + sj.loss_db;
          ch.switched_via = hub;
          ch.rate_share = count - 1;
          d.link_table.push_back(ch);
        }
      }
      break;
    }
  }

  for (const auto& node : d.node_table) d.nodes.push_back(node.id);
  for (const auto& link : d.link_table) {
    (link.switched_via ? d.channels : d.links).push_back(link.id);
  }
  return d;
}

Domain build_custom_domain(DomainId domain, int n, const std::vector<CustomEdge>& edges,
                           const LossParams& loss) {
  check_domain_id(domain);
  if (n < 1 || n > kMaxDomainSize) {
    throw Error(Errc::InvalidTopologyParam, "custom domain needs 1 <= n <= " + std::to_string(kMaxDomainSize));
  }
  Domain d;
  d.id = domain;
  d.controller = ControllerId{domain.value};
  const auto count = static_cast<std::uint32_t>(n);
  for (std::uint32_t i = 0; i < count; ++i) {
    d.node_table.push_back(Node{make_node_id(domain, i), domain, NodeKind::Endpoint, true});
  }
  std::uint32_t next = 0;
  for (const auto& e : edges) {
    if (e.a >= count || e.b >= count || e.a == e.b) {
      throw Error(Errc::InvalidTopologyParam, "custom edge " + std::to_string(e.a) + "-" +
                                                  std::to_string(e.b) + " out of range");
    }
    if (next >= kChannelOffset) throw Error(Errc::InvalidTopologyParam, "too many custom edges");
    d.link_table.push_back(fiber_link(intradomain_link_id(domain, next++), make_node_id(domain, e.a),
                                      make_node_id(domain, e.b), e.length_km, loss));
  }
  for (const auto& node : d.node_table) d.nodes.push_back(node.id);
  for (const auto& link : d.link_table) d.links.push_back(link.id);
  return d;
}

Topology compose(std::vector<Domain> domains, const std::vector<BackboneSpec>& backbone,
                 const ComposeOptions& options) {
  Topology topo;
  topo.loss = options.loss;
  topo.satellite_trusted = options.satellite_trusted;

  std::sort(domains.begin(), domains.end(), [](const Domain& x, const Domain& y) { return x.id < y.id; });
  for (std::size_t i = 1; i < domains.size(); ++i) {
    if (domains[i].id == domains[i - 1].id) {
      throw Error(Errc::InvalidTopologyParam, "duplicate domain " + to_string(domains[i].id));
    }
  }
  for (const auto& d : domains) {
    for (const auto& n : d.node_table) topo.nodes.emplace(n.id, n);
    for (const auto& l : d.link_table) topo.links.emplace(l.id, l);
  }

  std::map<DomainId, std::size_t> index;
  for (std::size_t i = 0; i < domains.size(); ++i) index.emplace(domains[i].id, i);

  std::vector<std::pair<std::size_t, std::size_t>> quotient_edges;
  std::uint32_t next = 0;
  for (const auto& spec : backbone) {
    if (!topo.has_node(spec.a) || !topo.has_node(spec.b)) {
      throw Error(Errc::UnknownNode, "backbone endpoint " + to_string(topo.has_node(spec.a) ? spec.b : spec.a) +
                                         " does not exist");
    }
    const auto da = topo.nodes.at(spec.a).domain;
    const auto db = topo.nodes.at(spec.b).domain;
    if (da == db) {
      throw Error(Errc::NotInterdomain, "backbone link " + to_string(spec.a) + "-" + to_string(spec.b) +
                                            " lies within " + to_string(da));
    }
    Link l;
    l.id = LinkId{kBackboneLinkBase + next++};
    l.a = std::min(spec.a, spec.b);
    l.b = std::max(spec.a, spec.b);
    l.medium = spec.medium;
    l.length_km = spec.length_km;
    if (spec.medium == Medium::Fiber) {
      l.loss_db = link_loss(Medium::Fiber, spec.length_km, options.loss.alpha_db_per_km, options.loss.fixed_db);
    } else {
      l.loss_db = link_loss(spec.medium, spec.length_km, 0.0, spec.loss_db.value_or(0.0));
    }
    if (spec.availability) {
      l.availability = *spec.availability;
    } else if (spec.medium == Medium::Satellite) {
      l.availability = repeating_windows(options.satellite_window, options.satellite_period,
                                         options.window_horizon);
    }
    l.key_rate_bps = spec.key_rate_bps;
    topo.links.emplace(l.id, l);
    topo.backbone_links.push_back(l.id);
    quotient_edges.emplace_back(index.at(da), index.at(db));

    for (NodeId end : {spec.a, spec.b}) {
      topo.nodes.at(end).kind = NodeKind::Border;
      auto& table = domains[index.at(topo.nodes.at(end).domain)].node_table;
      for (auto& n : table) {
        if (n.id == end) n.kind = NodeKind::Border;
      }
    }
  }

  if (!domains.empty() && component_count(domains.size(), quotient_edges) != 1) {
    throw Error(Errc::DisconnectedBackbone, "domain-level graph is not connected");
  }
  topo.domains = std::move(domains);
  return topo;
}

const Node& Topology::node(NodeId id) const {
  auto it = nodes.find(id);
  if (it == nodes.end()) throw Error(Errc::UnknownNode, "unknown node " + to_string(id));
  return it->second;
}

const Link& Topology::link(LinkId id) const {
  auto it = links.find(id);
  if (it == links.end()) throw Error(Errc::UnknownEntity, "unknown link " + to_string(id));
  return it->second;
}

const Domain& Topology::domain(DomainId id) const {
  for (const auto& d : domains) {
    if (d.id == id) return d;
  }
  throw Error(Errc::UnknownEntity, "unknown domain " + to_string(id));
}

bool Topology::has_domain(DomainId id) const {
  return std::any_of(domains.begin(), domains.end(), [&](const Domain& d) { return d.id == id; });
}

bool Topology::is_backbone(LinkId id) const { return id.value >= kBackboneLinkBase && links.contains(id); }

bool Topology::key_capable(const Link& l) const {
  if (l.medium == Medium::Satellite && !satellite_trusted) return false;
  auto a = nodes.find(l.a);
  auto b = nodes.find(l.b);
  return a != nodes.end() && b != nodes.end() && a->second.has_kms && b->second.has_kms;
}

std::vector<LinkId> Topology::key_links_at(NodeId n) const {
  std::vector<LinkId> out;
  for (const auto& [id, l] : links) {
    if (l.touches(n) && key_capable(l)) out.push_back(id);
  }
  return out;
}

std::set<LinkId> Topology::domain_scope(DomainId d) const {
  std::set<LinkId> out;
  for (const auto& [id, l] : links) {
    if (domain_of(l.a) == d || domain_of(l.b) == d) out.insert(id);
  }
  return out;
}

std::vector<Window> repeating_windows(SimTime open, SimTime period, SimTime horizon) {
  std::vector<Window> out;
  if (open <= 0 || period <= 0) return out;
  for (SimTime t = 0; t < horizon; t += period) out.push_back(Window{t, t + std::min(open, period)});
  return out;
}

bool in_window(const std::vector<Window>& windows, SimTime t) {
  if (windows.empty()) return true;
  return std::any_of(windows.begin(), windows.end(), [t](const Window& w) { return w.start <= t && t < w.end; });
}

SimTime window_overlap(const std::vector<Window>& windows, SimTime from, SimTime to) {
  if (to <= from) return 0;
  if (windows.empty()) return to - from;
  SimTime total = 0;
  for (const auto& w : windows) {
    const SimTime lo = std::max(from, w.start);
    const SimTime hi = std::min(to, w.end);
    if (hi > lo) total += hi - lo;
  }
  return total;
}

std::vector<Violation> validate(const Topology& topo) {
  std::vector<Violation> out;
  auto add = [&](Rule r, std::string entity, std::string msg) {
    out.push_back(Violation{r, std::move(entity), std::move(msg)});
  };

  std::map<NodeId, int> membership;
  for (const auto& d : topo.domains) {
    for (NodeId n : d.nodes) {
      if (++membership[n] > 1) add(Rule::DuplicateMembership, to_string(n), "node listed in more than one domain");
      auto it = topo.nodes.find(n);
      if (it == topo.nodes.end()) {
        add(Rule::UnknownEndpoint, to_string(n), "domain " + to_string(d.id) + " lists an unknown node");
      } else if (it->second.domain != d.id) {
        add(Rule::DuplicateMembership, to_string(n), "node domain field disagrees with " + to_string(d.id));
      }
    }
  }

  for (const auto& [id, l] : topo.links) {
    const auto name = to_string(id);
    if (!topo.has_node(l.a) || !topo.has_node(l.b)) {
      add(Rule::UnknownEndpoint, name, "endpoint does not exist");
      continue;
    }
    if (l.length_km < 0 || l.loss_db < 0) add(Rule::NegativeQuantity, name, "negative length or loss");
    if (!l.has_classical_channel) add(Rule::MissingClassicalChannel, name, "quantum link lacks a classical channel");
    for (std::size_t i = 0; i < l.availability.size(); ++i) {
      const auto& w = l.availability[i];
      if (w.start >= w.end) add(Rule::WindowOrder, name, "empty or inverted availability window");
      if (i > 0) {
        const auto& prev = l.availability[i - 1];
        if (w.start < prev.start) {
          add(Rule::WindowOrder, name, "availability windows not sorted");
        } else if (w.start < prev.end) {
          add(Rule::WindowOverlap, name, "availability windows overlap");
        }
      }
    }
    if (l.medium == Medium::Fiber && !l.switched_via) {
      const double expected = link_loss(Medium::Fiber, l.length_km, topo.loss.alpha_db_per_km, topo.loss.fixed_db);
      if (std::abs(expected - l.loss_db) > 1e-6) {
        add(Rule::LossMismatch, name, "fiber loss " + std::to_string(l.loss_db) + " dB, expected " +
                                          std::to_string(expected));
      }
    }
  }

  for (const auto& d : topo.domains) {
    std::map<NodeId, std::size_t> local;
    for (NodeId n : d.nodes) local.emplace(n, local.size());
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    auto check_inside = [&](LinkId id) {
      auto it = topo.links.find(id);
      if (it == topo.links.end()) {
        add(Rule::UnknownEndpoint, to_string(id), "domain " + to_string(d.id) + " lists an unknown link");
        return;
      }
      const auto& l = it->second;
      if (!local.contains(l.a) || !local.contains(l.b)) {
        add(Rule::IntradomainCrossing, to_string(id), "intradomain link leaves " + to_string(d.id));
        return;
      }
      if (!l.switched_via) edges.emplace_back(local.at(l.a), local.at(l.b));
    };
    for (LinkId id : d.links) check_inside(id);
    for (LinkId id : d.channels) check_inside(id);
    if (!local.empty() && component_count(local.size(), edges) != 1) {
      add(Rule::DomainDisconnected, to_string(d.id), "intradomain graph is not connected");
    }
  }

  std::map<DomainId, std::size_t> dindex;
  for (const auto& d : topo.domains) dindex.emplace(d.id, dindex.size());
  std::vector<std::pair<std::size_t, std::size_t>> quotient;
  for (LinkId id : topo.backbone_links) {
    auto it = topo.links.find(id);
    if (it == topo.links.end() || !topo.has_node(it->second.a) || !topo.has_node(it->second.b)) continue;
    const auto& l = it->second;
    const auto& na = topo.node(l.a);
    const auto& nb = topo.node(l.b);
    if (na.domain == nb.domain) {
      add(Rule::NotInterdomain, to_string(id), "backbone link within " + to_string(na.domain));
      continue;
    }
    for (const Node* n : {&na, &nb}) {
      if (n->kind != NodeKind::Border) add(Rule::BorderMissing, to_string(n->id), "backbone endpoint is not a Border node");
      if (!n->has_kms) add(Rule::BorderWithoutKms, to_string(n->id), "Border node has no KMS");
    }
    if (dindex.contains(na.domain) && dindex.contains(nb.domain)) {
      quotient.emplace_back(dindex.at(na.domain), dindex.at(nb.domain));
    }
  }
  if (!dindex.empty() && component_count(dindex.size(), quotient) != 1) {
    add(Rule::DisconnectedBackbone, "backbone", "domain-level graph is not connected");
  }
  return out;
}

}  // namespace qkdnet
