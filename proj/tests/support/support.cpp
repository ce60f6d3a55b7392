#include "support.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

namespace qkdnet::testkit {

std::string scenario_path(std::string_view name) {
  return std::string(QKDNET_SCENARIO_DIR) + "/" + std::string(name) + ".yaml";
}

Scenario load_reference(std::string_view name) { return load_scenario(scenario_path(name)); }

namespace {

int pick(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::optional<Scenario> try_random(std::mt19937_64& rng) {
  Scenario s;
  s.source = "random";
  s.model = pick(rng, 0, 1) ? Model::Hierarchical : Model::Distributed;
  s.seed = rng();
  s.duration = seconds(20);
  static const std::uint64_t initial[] = {0, 512, 4096, 65536};
  s.initial_bits = initial[pick(rng, 0, 3)];

  const int domains = pick(rng, 1, 4);
  int budget = 16;
  std::vector<int> kms_nodes;
  for (int d = 1; d <= domains; ++d) {
    const int left = domains - d;  // keep two nodes for each later domain
    static const char* kinds[] = {"ring", "mesh", "bus", "star", "custom"};
    DomainSpec spec;
    spec.id = DomainId{static_cast<std::uint32_t>(d)};
    spec.kind = kinds[pick(rng, 0, 4)];
    const int cap = budget - 2 * left - (spec.kind == "star" ? 1 : 0);
    const int min_n = spec.kind == "ring" ? 3 : 2;
    if (cap < min_n) return std::nullopt;
    spec.n = pick(rng, min_n, std::min(cap, 6));
    spec.link_length_km = pick(rng, 2, 25);
    if (spec.kind == "custom") {
      for (int i = 1; i < spec.n; ++i) {
        spec.edges.push_back(CustomEdge{static_cast<std::uint32_t>(pick(rng, 0, i - 1)), static_cast<std::uint32_t>(i),
                                        static_cast<double>(pick(rng, 2, 25))});
      }
      for (int extra = pick(rng, 0, 2); extra > 0; --extra) {
        const auto a = static_cast<std::uint32_t>(pick(rng, 0, spec.n - 1));
        const auto b = static_cast<std::uint32_t>(pick(rng, 0, spec.n - 1));
        const bool dup = std::any_of(spec.edges.begin(), spec.edges.end(), [&](const CustomEdge& e) {
          return (e.a == a && e.b == b) || (e.a == b && e.b == a);
        });
        if (a != b && !dup) spec.edges.push_back(CustomEdge{a, b, static_cast<double>(pick(rng, 2, 25))});
      }
    }
    budget -= spec.n + (spec.kind == "star" ? 1 : 0);
    kms_nodes.push_back(spec.n);
    s.domains.push_back(std::move(spec));
  }

  auto node_in = [&](int d) {
    return make_node_id(DomainId{static_cast<std::uint32_t>(d)},
                        static_cast<std::uint32_t>(pick(rng, 0, kms_nodes[static_cast<std::size_t>(d - 1)] - 1)));
  };
  std::set<std::pair<NodeId, NodeId>> used;
  for (int d = 2; d <= domains; ++d) {
    BackboneSpec b;
    b.a = node_in(pick(rng, 1, d - 1));
    b.b = node_in(d);
    b.length_km = pick(rng, 10, 60);
    used.insert({std::min(b.a, b.b), std::max(b.a, b.b)});
    s.backbone.push_back(b);
    s.backbone_lines.push_back(0);
  }
  if (domains >= 3 && pick(rng, 0, 1)) {
    BackboneSpec b;
    b.a = node_in(1);
    b.b = node_in(domains);
    b.length_km = pick(rng, 10, 60);
    if (used.insert({std::min(b.a, b.b), std::max(b.a, b.b)}).second) {
      s.backbone.push_back(b);
      s.backbone_lines.push_back(0);
    }
  }

  for (int k = pick(rng, 1, 5); k > 0; --k) {
    RequestSpec q;
    q.src = node_in(pick(rng, 1, domains));
    q.dst = node_in(pick(rng, 1, domains));
    if (q.src == q.dst) continue;
    q.bits = static_cast<std::uint32_t>(pick(rng, 32, 2048));
    q.at = millis(pick(rng, 0, 3000));
    s.requests.push_back(q);
  }
  if (s.requests.empty()) return std::nullopt;
  if (!validate_scenario(s).empty()) return std::nullopt;
  return s;
}

}  // namespace

Scenario random_scenario(std::mt19937_64& rng) {
  while (true) {
    if (auto s = try_random(rng)) return *s;
  }
}

KeyAudit audit_keys(const Engine& engine) {
  KeyAudit out;
  const auto& store = engine.store();
  auto fail = [&](std::string msg) {
    if (out.ok) out.problem = std::move(msg);
    out.ok = false;
  };
  if (!store.symmetric()) fail("link ends disagree");
  if (!store.conserved()) fail("initial + generated - consumed != available");

  std::map<std::pair<NodeId, NodeId>, std::uint64_t> relayed;
  for (const auto& d : engine.deliveries()) {
    ++out.deliveries;
    if (!(d.at_src == d.at_dst)) fail("blocks differ for " + d.key_id);
    if (d.at_src.payload.size() != (d.at_src.bits + 7) / 8) fail("payload size for " + d.key_id);
    const auto& ks = store.kms(d.path.front()).delivered;
    const auto& kd = store.kms(d.path.back()).delivered;
    auto s = ks.find({d.key_id, d.app_src});
    auto t = kd.find({d.key_id, d.app_dst});
    if (s == ks.end() || t == kd.end() || !(s->second == t->second)) fail("KMS copies differ for " + d.key_id);
    for (std::size_t i = 0; i + 1 < d.path.size(); ++i) {
      relayed[{std::min(d.path[i], d.path[i + 1]), std::max(d.path[i], d.path[i + 1])}] += d.at_src.bits;
    }
  }

  std::map<std::pair<NodeId, NodeId>, std::uint64_t> consumed;
  for (const auto& [id, acc] : store.accounts()) {
    const auto& l = engine.topology().link(id);
    consumed[{std::min(l.a, l.b), std::max(l.a, l.b)}] += acc.consumed;
  }
  for (const auto& [pair, bits] : consumed) {
    const auto it = relayed.find(pair);
    const std::uint64_t expect = it == relayed.end() ? 0 : it->second;
    if (bits != expect) {
      fail("link " + to_string(pair.first) + "-" + to_string(pair.second) + " consumed " + std::to_string(bits) +
           ", relayed " + std::to_string(expect));
    }
  }
  return out;
}

std::optional<Path> brute_force_route(const Topology& topology, const NetworkView& view, const RouteQuery& query) {
  auto allowed = [&](NodeId n) { return !query.within || topology.node(n).domain == *query.within; };
  std::map<NodeId, std::set<NodeId>> adj;
  for (const auto& [id, l] : topology.links) {
    if (allowed(l.a) && allowed(l.b) && link_feasible(topology, view, l, query.bits, query.now)) {
      adj[l.a].insert(l.b);
      adj[l.b].insert(l.a);
    }
  }
  std::optional<Path> best;
  Path cur{query.src};
  std::set<NodeId> on_path{query.src};
  std::function<void(NodeId)> dfs = [&](NodeId at) {
    if (at == query.dst) {
      if (!best || cur.size() < best->size() || (cur.size() == best->size() && cur < *best)) best = cur;
      return;
    }
    for (NodeId w : adj[at]) {
      if (on_path.contains(w)) continue;
      on_path.insert(w);
      cur.push_back(w);
      dfs(w);
      cur.pop_back();
      on_path.erase(w);
    }
  };
  if (allowed(query.src) && allowed(query.dst)) dfs(query.src);
  return best;
}

RandomGraph random_graph(std::mt19937_64& rng, int max_nodes) {
  const int n = pick(rng, 2, max_nodes);
  // Optionally split the nodes over two domains joined by backbone links.
  const int split = pick(rng, 0, 1) && n >= 4 ? pick(rng, 2, n - 2) : n;
  std::vector<CustomEdge> e1;
  std::vector<CustomEdge> e2;
  const double p = std::uniform_real_distribution<double>(0.2, 0.8)(rng);
  std::bernoulli_distribution coin(p);
  for (int i = 0; i < split; ++i) {
    for (int j = i + 1; j < split; ++j) {
      if (coin(rng)) e1.push_back(CustomEdge{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), 10});
    }
  }
  for (int i = 0; i < n - split; ++i) {
    for (int j = i + 1; j < n - split; ++j) {
      if (coin(rng)) e2.push_back(CustomEdge{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), 10});
    }
  }
  std::vector<Domain> domains{build_custom_domain(DomainId{1}, split, e1)};
  std::vector<BackboneSpec> backbone;
  if (split < n) {
    domains.push_back(build_custom_domain(DomainId{2}, n - split, e2));
    for (int k = pick(rng, 1, 3); k > 0; --k) {
      BackboneSpec b;
      b.a = make_node_id(DomainId{1}, static_cast<std::uint32_t>(pick(rng, 0, split - 1)));
      b.b = make_node_id(DomainId{2}, static_cast<std::uint32_t>(pick(rng, 0, n - split - 1)));
      b.length_km = 20;
      backbone.push_back(b);
    }
  }
  RandomGraph g;
  g.topology = compose(std::move(domains), backbone);
  for (auto& [id, l] : g.topology.links) {
    if (pick(rng, 0, 5) == 0) l.availability = {Window{0, seconds(1)}};
  }
  g.view = make_view(g.topology, std::nullopt);
  g.query.bits = static_cast<std::uint64_t>(pick(rng, 1, 100));
  for (const auto& [id, l] : g.topology.links) {
    g.view.link_states[id] = LinkState{pick(rng, 0, 9) != 0, static_cast<std::uint64_t>(pick(rng, 0, 200)), 0};
  }
  std::vector<NodeId> nodes;
  for (const auto& [id, node] : g.topology.nodes) nodes.push_back(id);
  const auto a = static_cast<std::size_t>(pick(rng, 0, n - 1));
  auto b = static_cast<std::size_t>(pick(rng, 0, n - 2));
  if (b >= a) ++b;
  g.query.src = nodes[a];
  g.query.dst = nodes[b];
  g.query.now = pick(rng, 0, 1) ? 0 : seconds(2);
  if (split < n && pick(rng, 0, 3) == 0) g.query.within = DomainId{1};
  return g;
}

std::vector<std::size_t> greedy_prefix(const std::vector<std::uint64_t>& bits, std::uint64_t buffer) {
  std::vector<std::size_t> out;
  std::uint64_t left = buffer;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] > left) break;
    left -= bits[i];
    out.push_back(i);
  }
  return out;
}

}  // namespace qkdnet::testkit
