#include "qkdnet/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace qkdnet {

std::string_view to_string(Model m) { return m == Model::Hierarchical ? "hierarchical" : "distributed"; }

Model model_from_string(std::string_view s) {
  if (s == "hierarchical") return Model::Hierarchical;
  if (s == "distributed") return Model::Distributed;
  throw Error(Errc::ScenarioError, "unknown model '" + std::string(s) + "'");
}

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
    const auto mark = at.Mark();
    fail(mark.line, mark.column, msg);
  }
  [[noreturn]] void fail(int line, int column, const std::string& msg) const {
    std::string where = source_;
    if (line >= 0) where += ":" + std::to_string(line + 1) + ":" + std::to_string(column + 1);
    throw Error(Errc::ScenarioError, where + ": " + msg);
  }

  void expect_map(const YAML::Node& n, const std::string& what) const {
    if (!n.IsMap()) fail(n, what + " must be a mapping");
  }
  void expect_seq(const YAML::Node& n, const std::string& what) const {
    if (!n.IsSequence()) fail(n, what + " must be a list");
  }

  void allowed_keys(const YAML::Node& map, std::initializer_list<std::string_view> keys,
                    const std::string& section) const {
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
        fail(kv.first, "unknown key '" + key + "' in " + section);
      }
    }
  }

  YAML::Node required(const YAML::Node& map, const std::string& key, const std::string& section) const {
    auto n = map[key];
    if (!n) fail(map, "missing '" + key + "' in " + section);
    return n;
  }

  std::string str(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + " must be a scalar");
    return n.Scalar();
  }

  double number(const YAML::Node& n, const std::string& what) const {
    try {
      if (!n.IsScalar()) throw YAML::BadConversion(n.Mark());
      const double v = n.as<double>();
      if (!std::isfinite(v)) fail(n, what + " must be finite");
      return v;
    } catch (const YAML::BadConversion&) {
      fail(n, what + " must be a number");
    }
  }

  std::int64_t integer(const YAML::Node& n, const std::string& what) const {
    try {
      if (!n.IsScalar()) throw YAML::BadConversion(n.Mark());
      return n.as<std::int64_t>();
    } catch (const YAML::BadConversion&) {
      fail(n, what + " must be an integer");
    }
  }

  std::uint64_t unsigned_int(const YAML::Node& n, const std::string& what) const {
    if (n.IsScalar() && !n.Scalar().empty() && n.Scalar()[0] == '-') fail(n, what + " must not be negative");
    try {
      if (!n.IsScalar()) throw YAML::BadConversion(n.Mark());
      return n.as<std::uint64_t>();
    } catch (const YAML::BadConversion&) {
      fail(n, what + " must be a non-negative integer");
    }
  }

  bool boolean(const YAML::Node& n, const std::string& what) const {
    try {
      if (!n.IsScalar()) throw YAML::BadConversion(n.Mark());
      return n.as<bool>();
    } catch (const YAML::BadConversion&) {
      fail(n, what + " must be true or false");
    }
  }

  double non_negative(const YAML::Node& n, const std::string& what) const {
    const double v = number(n, what);
    if (v < 0) fail(n, what + " must not be negative");
    return v;
  }

  double positive(const YAML::Node& n, const std::string& what) const {
    const double v = number(n, what);
    if (v <= 0) fail(n, what + " must be positive");
    return v;
  }

  // "d.i" node reference.
  NodeId node_ref(const YAML::Node& n, const std::string& what) const {
    const auto s = str(n, what);
    unsigned d = 0;
    unsigned i = 0;
    char tail = 0;
    if (std::sscanf(s.c_str(), "%u.%u%c", &d, &i, &tail) != 2 || i >= kNodesPerDomain) {
      fail(n, what + " must look like <domain>.<index>, got '" + s + "'");
    }
    return make_node_id(DomainId{d}, i);
  }

  std::uint32_t u32(const YAML::Node& n, const std::string& what) const {
    const auto v = unsigned_int(n, what);
    if (v > std::numeric_limits<std::uint32_t>::max()) fail(n, what + " is too large");
    return static_cast<std::uint32_t>(v);
  }

  int line(const YAML::Node& n) const { return n.Mark().line + 1; }

 private:
  std::string source_;
};

LatencyClass read_latency_class(const Reader& r, const YAML::Node& n, LatencyClass base, const std::string& what) {
  r.expect_map(n, what);
  r.allowed_keys(n, {"base_ms", "per_km_ms"}, what);
  if (auto v = n["base_ms"]) base.base_ms = r.non_negative(v, what + ".base_ms");
  if (auto v = n["per_km_ms"]) base.per_km_ms = r.non_negative(v, what + ".per_km_ms");
  return base;
}

std::vector<Window> read_windows(const Reader& r, const YAML::Node& n, const std::string& what) {
  r.expect_seq(n, what);
  std::vector<Window> out;
  for (const auto& w : n) {
    if (!w.IsSequence() || w.size() != 2) r.fail(w, what + " entries must be [start_s, end_s]");
    out.push_back(Window{seconds(r.non_negative(w[0], what)), seconds(r.non_negative(w[1], what))});
  }
  return out;
}

void read_topology_section(const Reader& r, const YAML::Node& n, Scenario& s) {
  r.expect_map(n, "topology");
  r.allowed_keys(n, {"satellite_trusted", "satellite_window_s", "satellite_period_s", "window_horizon_s"},
                 "topology");
  if (auto v = n["satellite_trusted"]) s.compose.satellite_trusted = r.boolean(v, "satellite_trusted");
  if (auto v = n["satellite_window_s"]) s.compose.satellite_window = seconds(r.positive(v, "satellite_window_s"));
  if (auto v = n["satellite_period_s"]) s.compose.satellite_period = seconds(r.positive(v, "satellite_period_s"));
  if (auto v = n["window_horizon_s"]) s.compose.window_horizon = seconds(r.positive(v, "window_horizon_s"));
}

void read_rate(const Reader& r, const YAML::Node& n, Scenario& s) {
  r.expect_map(n, "rate");
  r.allowed_keys(n, {"r0_bps", "alpha_db_per_km", "max_loss_db", "fixed_loss_db"}, "rate");
  if (auto v = n["r0_bps"]) s.rate.r0_bps = r.non_negative(v, "r0_bps");
  if (auto v = n["max_loss_db"]) s.rate.max_loss_db = r.non_negative(v, "max_loss_db");
  if (auto v = n["alpha_db_per_km"]) s.loss.alpha_db_per_km = r.non_negative(v, "alpha_db_per_km");
  if (auto v = n["fixed_loss_db"]) s.loss.fixed_db = r.non_negative(v, "fixed_loss_db");
}

void read_latency(const Reader& r, const YAML::Node& n, Scenario& s) {
  r.expect_map(n, "latency");
  r.allowed_keys(n, {"base_ms", "per_km_ms", "nbi", "sbi", "controller", "data_plane"}, "latency");
  LatencyClass all;
  if (auto v = n["base_ms"]) all.base_ms = r.non_negative(v, "latency.base_ms");
  if (auto v = n["per_km_ms"]) all.per_km_ms = r.non_negative(v, "latency.per_km_ms");
  s.latency = LatencyModel{all, all, all, all};
  if (auto v = n["nbi"]) s.latency.nbi = read_latency_class(r, v, all, "latency.nbi");
  if (auto v = n["sbi"]) s.latency.sbi = read_latency_class(r, v, all, "latency.sbi");
  if (auto v = n["controller"]) s.latency.controller = read_latency_class(r, v, all, "latency.controller");
  if (auto v = n["data_plane"]) s.latency.data_plane = read_latency_class(r, v, all, "latency.data_plane");
}

void read_domains(const Reader& r, const YAML::Node& n, Scenario& s) {
  r.expect_seq(n, "domains");
  for (const auto& d : n) {
    r.expect_map(d, "domain entry");
    r.allowed_keys(d, {"id", "kind", "n", "link_length_km", "edges"}, "domain entry");
    DomainSpec spec;
    spec.line = r.line(d);
    spec.id = DomainId{r.u32(r.required(d, "id", "domain entry"), "domain id")};
    const auto kind_node = r.required(d, "kind", "domain entry");
    spec.kind = r.str(kind_node, "domain kind");
    static const std::set<std::string> kinds{"ring", "star", "mesh", "bus", "custom"};
    if (!kinds.contains(spec.kind)) {
      r.fail(kind_node, "domain kind must be one of ring, star, mesh, bus, custom");
    }
    spec.n = static_cast<int>(r.integer(r.required(d, "n", "domain entry"), "n"));
    if (auto v = d["link_length_km"]) spec.link_length_km = r.non_negative(v, "link_length_km");
    if (auto e = d["edges"]) {
      if (spec.kind != "custom") r.fail(e, "edges are only allowed for custom domains");
      r.expect_seq(e, "edges");
      for (const auto& edge : e) {
        if (!edge.IsSequence() || (edge.size() != 2 && edge.size() != 3)) {
          r.fail(edge, "edge must be [a, b] or [a, b, length_km]");
        }
        CustomEdge ce;
        ce.a = r.u32(edge[0], "edge endpoint");
        ce.b = r.u32(edge[1], "edge endpoint");
        ce.length_km = edge.size() == 3 ? r.non_negative(edge[2], "edge length") : spec.link_length_km;
        spec.edges.push_back(ce);
      }
    } else if (spec.kind == "custom") {
      r.fail(d, "custom domain needs an edges list");
    }
    s.domains.push_back(std::move(spec));
  }
}

Medium medium_from(const Reader& r, const YAML::Node& n) {
  const auto m = r.str(n, "medium");
  if (m == "fiber") return Medium::Fiber;
  if (m == "satellite") return Medium::Satellite;
  if (m == "free_space") return Medium::FreeSpace;
  r.fail(n, "medium must be fiber, satellite or free_space");
}

void read_backbone(const Reader& r, const YAML::Node& n, Scenario& s) {
  r.expect_seq(n, "backbone");
  for (const auto& b : n) {
    r.expect_map(b, "backbone entry");
    r.allowed_keys(b, {"a", "b", "medium", "length_km", "loss_db", "key_rate_bps", "windows"}, "backbone entry");
    BackboneSpec spec;
    spec.a = r.node_ref(r.required(b, "a", "backbone entry"), "backbone a");
    spec.b = r.node_ref(r.required(b, "b", "backbone entry"), "backbone b");
    if (auto v = b["medium"]) spec.medium = medium_from(r, v);
    if (auto v = b["length_km"]) spec.length_km = r.non_negative(v, "length_km");
    if (auto v = b["loss_db"]) spec.loss_db = r.non_negative(v, "loss_db");
    if (auto v = b["key_rate_bps"]) spec.key_rate_bps = r.non_negative(v, "key_rate_bps");
    if (auto v = b["windows"]) spec.availability = read_windows(r, v, "windows");
    if (spec.medium != Medium::Fiber && !spec.loss_db) r.fail(b, "non-fiber backbone link needs loss_db");
    s.backbone.push_back(std::move(spec));
    s.backbone_lines.push_back(r.line(b));
  }
}

void read_hierarchy(const Reader& r, const YAML::Node& n, Scenario& s) {
  r.expect_map(n, "hierarchy");
  r.allowed_keys(n, {"controllers", "sync_period_s", "heartbeat_s", "heartbeat_misses"}, "hierarchy");
  s.hierarchy_line = r.line(n);
  if (auto v = n["sync_period_s"]) s.sync_period = seconds(r.positive(v, "sync_period_s"));
  if (auto v = n["heartbeat_s"]) s.heartbeat = seconds(r.positive(v, "heartbeat_s"));
  if (auto v = n["heartbeat_misses"]) {
    const auto k = r.integer(v, "heartbeat_misses");
    if (k < 1) r.fail(v, "heartbeat_misses must be at least 1");
    s.heartbeat_misses = static_cast<int>(k);
  }
  if (auto c = n["controllers"]) {
    r.expect_seq(c, "hierarchy.controllers");
    HierarchySpec spec;
    for (const auto& e : c) {
      r.expect_map(e, "controller entry");
      r.allowed_keys(e, {"name", "parent", "domain", "standby"}, "controller entry");
      HierarchySpec::Entry entry;
      entry.name = r.str(r.required(e, "name", "controller entry"), "controller name");
      if (auto v = e["parent"]) entry.parent = r.str(v, "parent");
      if (auto v = e["domain"]) entry.domain = DomainId{r.u32(v, "domain")};
      if (auto v = e["standby"]) entry.standby = r.boolean(v, "standby");
      spec.controllers.push_back(std::move(entry));
    }
    s.hierarchy = std::move(spec);
  }
}

void read_peers(const Reader& r, const YAML::Node& n, Scenario& s) {
  r.expect_map(n, "peers");
  r.allowed_keys(n, {"names", "gossip_period_s", "reroute_on_fault", "reserve_window_ms", "lease_s"}, "peers");
  if (auto v = n["gossip_period_s"]) s.sync_period = seconds(r.positive(v, "gossip_period_s"));
  if (auto v = n["reroute_on_fault"]) s.peers.reroute_on_fault = r.boolean(v, "reroute_on_fault");
  if (auto v = n["reserve_window_ms"]) s.reserve_window = millis(r.non_negative(v, "reserve_window_ms"));
  if (auto v = n["lease_s"]) s.reserve_lease = seconds(r.positive(v, "lease_s"));
  if (auto names = n["names"]) {
    r.expect_map(names, "peers.names");
    for (const auto& kv : names) {
      s.peers.names[DomainId{r.u32(kv.first, "peer domain")}] = r.str(kv.second, "peer name");
    }
  }
}

void read_workload(const Reader& r, const YAML::Node& n, Scenario& s) {
  r.expect_map(n, "workload");
  r.allowed_keys(n, {"requests", "poisson"}, "workload");
  if (auto reqs = n["requests"]) {
    r.expect_seq(reqs, "workload.requests");
    for (const auto& q : reqs) {
      r.expect_map(q, "request");
      r.allowed_keys(q, {"at_s", "src", "dst", "bits"}, "request");
      RequestSpec spec;
      spec.line = r.line(q);
      spec.at = seconds(r.non_negative(r.required(q, "at_s", "request"), "at_s"));
      spec.src = r.node_ref(r.required(q, "src", "request"), "src");
      spec.dst = r.node_ref(r.required(q, "dst", "request"), "dst");
      spec.bits = r.u32(r.required(q, "bits", "request"), "bits");
      s.requests.push_back(spec);
    }
  }
  if (auto p = n["poisson"]) {
    r.expect_map(p, "workload.poisson");
    r.allowed_keys(p, {"rate_per_s", "bits", "start_s", "end_s", "pairs"}, "workload.poisson");
    PoissonSpec spec;
    spec.line = r.line(p);
    spec.rate_per_s = r.positive(r.required(p, "rate_per_s", "poisson"), "rate_per_s");
    spec.bits = r.u32(r.required(p, "bits", "poisson"), "bits");
    if (auto v = p["start_s"]) spec.start = seconds(r.non_negative(v, "start_s"));
    spec.end = seconds(r.non_negative(r.required(p, "end_s", "poisson"), "end_s"));
    const auto pairs = r.required(p, "pairs", "poisson");
    r.expect_seq(pairs, "poisson.pairs");
    for (const auto& pr : pairs) {
      if (!pr.IsSequence() || pr.size() != 2) r.fail(pr, "pair must be [src, dst]");
      spec.pairs.emplace_back(r.node_ref(pr[0], "pair src"), r.node_ref(pr[1], "pair dst"));
    }
    if (spec.pairs.empty()) r.fail(pairs, "poisson needs at least one pair");
    s.poisson = std::move(spec);
  }
}

void read_faults(const Reader& r, const YAML::Node& n, Scenario& s) {
  r.expect_seq(n, "faults");
  for (const auto& f : n) {
    r.expect_map(f, "fault");
    r.allowed_keys(f, {"at_s", "action", "target"}, "fault");
    FaultEntry entry;
    entry.at = seconds(r.non_negative(r.required(f, "at_s", "fault"), "at_s"));
    const auto action = r.required(f, "action", "fault");
    try {
      entry.action = fault_action_from_string(r.str(action, "action"));
    } catch (const Error& e) {
      r.fail(action, e.what());
    }
    entry.target = r.str(r.required(f, "target", "fault"), "target");
    s.faults.entries.push_back(std::move(entry));
    s.fault_lines.push_back(r.line(f));
  }
}

Scenario parse_document(const Reader& r, const YAML::Node& root, std::string source) {
  Scenario s;
  s.source = std::move(source);
  if (!root.IsMap()) r.fail(root, "scenario must be a mapping");
  r.allowed_keys(root,
                 {"name", "description", "model", "seed", "duration_s", "initial_bits", "topology", "rate", "latency",
                  "domains", "backbone", "hierarchy", "peers", "workload", "faults"},
                 "scenario");
  if (auto v = root["name"]) s.name = r.str(v, "name");
  if (auto v = root["model"]) {
    try {
      s.model = model_from_string(r.str(v, "model"));
    } catch (const Error& e) {
      r.fail(v, e.what());
    }
  }
  if (auto v = root["seed"]) s.seed = r.unsigned_int(v, "seed");
  if (auto v = root["duration_s"]) s.duration = seconds(r.positive(v, "duration_s"));
  if (auto v = root["initial_bits"]) s.initial_bits = r.unsigned_int(v, "initial_bits");
  if (auto v = root["topology"]) read_topology_section(r, v, s);
  if (auto v = root["rate"]) read_rate(r, v, s);
  if (auto v = root["latency"]) read_latency(r, v, s);
  read_domains(r, r.required(root, "domains", "scenario"), s);
  if (auto v = root["backbone"]) read_backbone(r, v, s);
  if (auto v = root["hierarchy"]) read_hierarchy(r, v, s);
  if (auto v = root["peers"]) read_peers(r, v, s);
  if (auto v = root["workload"]) read_workload(r, v, s);
  if (auto v = root["faults"]) read_faults(r, v, s);
  s.compose.loss = s.loss;
  return s;
}

std::string anchor(const Scenario& s, int line, const std::string& msg) {
  if (line <= 0) return s.source + ": " + msg;
  return s.source + ":" + std::to_string(line) + ": " + msg;
}

TopologyKind kind_of(const std::string& k) {
  if (k == "ring") return TopologyKind::Ring;
  if (k == "star") return TopologyKind::Star;
  if (k == "mesh") return TopologyKind::Mesh;
  return TopologyKind::Bus;
}

Domain build_domain(const Scenario& s, const DomainSpec& d) {
  if (d.kind == "custom") return build_custom_domain(d.id, d.n, d.edges, s.loss);
  return build_topology(kind_of(d.kind), d.n, d.id, BuildParams{d.link_length_km, s.loss});
}

HierarchySpec hierarchy_of(const Scenario& s, const Topology& topo) {
  return s.hierarchy ? *s.hierarchy : default_hierarchy(topo);
}

std::string peer_name(const Scenario& s, DomainId d) {
  auto it = s.peers.names.find(d);
  return it != s.peers.names.end() ? it->second : "P-" + to_string(d);
}

std::set<std::string> controller_names(const Scenario& s, const Topology& topo, Model model) {
  std::set<std::string> out;
  if (model == Model::Hierarchical) {
    for (const auto& e : hierarchy_of(s, topo).controllers) out.insert(e.name);
  } else {
    for (const auto& d : topo.domains) out.insert(peer_name(s, d.id));
  }
  return out;
}

// FNV-1a, 64 bit.
struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  }
  void num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    bytes(buf);
  }
  void num(std::uint64_t v) { bytes(std::to_string(v)); }
  void num(std::int64_t v) { bytes(std::to_string(v)); }
};

}  // namespace

Scenario parse_scenario(std::string_view text, std::string source) {
  Reader r(source);
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    r.fail(e.mark.line, e.mark.column, e.msg);
  }
  if (!root || root.IsNull()) r.fail(-1, 0, "empty scenario");
  return parse_document(r, root, std::move(source));
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ScenarioError, path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

Topology build_scenario_topology(const Scenario& s) {
  std::vector<Domain> domains;
  domains.reserve(s.domains.size());
  for (const auto& d : s.domains) domains.push_back(build_domain(s, d));
  return compose(std::move(domains), s.backbone, s.compose);
}

std::vector<std::string> validate_scenario(const Scenario& s) {
  std::vector<std::string> out;
  if (s.domains.empty()) {
    out.push_back(anchor(s, 0, "no domains"));
    return out;
  }
  std::vector<Domain> domains;
  for (const auto& d : s.domains) {
    try {
      domains.push_back(build_domain(s, d));
    } catch (const Error& e) {
      out.push_back(anchor(s, d.line, std::string(to_string(e.code())) + ": " + e.what()));
    }
  }
  if (!out.empty()) return out;

  Topology topo;
  try {
    topo = compose(std::move(domains), s.backbone, s.compose);
  } catch (const Error& e) {
    int line = s.backbone_lines.empty() ? 0 : s.backbone_lines.front();
    // Point at the offending backbone entry when the message names its endpoints.
    for (std::size_t i = 0; i < s.backbone.size(); ++i) {
      const std::string msg = e.what();
      if (msg.find(to_string(s.backbone[i].a)) != std::string::npos ||
          msg.find(to_string(s.backbone[i].b)) != std::string::npos) {
        line = s.backbone_lines[i];
        break;
      }
    }
    out.push_back(anchor(s, line, std::string(to_string(e.code())) + ": " + e.what()));
    return out;
  }

  for (const auto& v : validate(topo)) {
    out.push_back(anchor(s, 0, std::string(to_string(v.rule)) + " " + v.entity + ": " + v.message));
  }

  if (s.model == Model::Hierarchical || s.hierarchy) {
    for (const auto& msg : check_hierarchy(hierarchy_of(s, topo), topo)) {
      out.push_back(anchor(s, s.hierarchy_line, "hierarchy: " + msg));
    }
  }

  auto check_pair = [&](NodeId src, NodeId dst, std::uint32_t bits, int line) {
    for (NodeId n : {src, dst}) {
      if (!topo.has_node(n)) {
        out.push_back(anchor(s, line, "UnknownNode: " + to_string(n)));
      } else if (!topo.node(n).has_kms) {
        out.push_back(anchor(s, line, "InvalidRequest: " + to_string(n) + " hosts no KMS"));
      }
    }
    if (src == dst) out.push_back(anchor(s, line, "InvalidRequest: source equals destination"));
    if (bits == 0) out.push_back(anchor(s, line, "InvalidRequest: zero-bit request"));
  };
  for (const auto& q : s.requests) check_pair(q.src, q.dst, q.bits, q.line);
  if (s.poisson) {
    for (const auto& [a, b] : s.poisson->pairs) check_pair(a, b, s.poisson->bits, s.poisson->line);
    if (s.poisson->end <= s.poisson->start) {
      out.push_back(anchor(s, s.poisson->line, "poisson end_s must be after start_s"));
    }
  }

  const auto names = controller_names(s, topo, s.model);
  for (std::size_t i = 0; i < s.faults.entries.size(); ++i) {
    const auto& f = s.faults.entries[i];
    const int line = s.fault_lines[i];
    switch (f.action) {
      case FaultAction::ControllerDown:
      case FaultAction::ControllerUp:
        if (!names.contains(f.target)) out.push_back(anchor(s, line, "UnknownEntity: no controller " + f.target));
        break;
      case FaultAction::LinkDown:
      case FaultAction::LinkUp: {
        unsigned long v = 0;
        char tail = 0;
        if (std::sscanf(f.target.c_str(), "l%lu%c", &v, &tail) != 1 || !topo.has_link(LinkId{static_cast<std::uint32_t>(v)})) {
          out.push_back(anchor(s, line, "UnknownEntity: no link " + f.target));
        }
        break;
      }
      case FaultAction::DomainIsolate:
      case FaultAction::DomainRestore: {
        unsigned v = 0;
        char tail = 0;
        if (std::sscanf(f.target.c_str(), "d%u%c", &v, &tail) != 1 || !topo.has_domain(DomainId{v})) {
          out.push_back(anchor(s, line, "UnknownEntity: no domain " + f.target));
        }
        break;
      }
    }
  }
  for (const auto& msg : check_nesting(s.faults)) out.push_back(anchor(s, 0, "faults: " + msg));
  return out;
}

std::uint64_t effective_seed(const Scenario& s, std::optional<std::uint64_t> override_seed) {
  if (override_seed) return *override_seed;
  if (s.seed) return *s.seed;
  return 0;
}

std::vector<KeyServiceRequest> expand_workload(const Scenario& s, std::uint64_t seed) {
  std::vector<KeyServiceRequest> out;
  for (const auto& q : s.requests) {
    out.push_back(KeyServiceRequest{AppId{q.src}, AppId{q.dst}, q.bits, RequestId{0}, q.at});
  }
  if (s.poisson) {
    const auto& p = *s.poisson;
    std::mt19937_64 rng(derive_seed(seed, "workload"));
    // Uniform in (0, 1] from the top 53 bits; avoids library-specific distributions.
    auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53; };
    double t = to_seconds(p.start);
    const double end = to_seconds(p.end);
    while (true) {
      t += -std::log(uniform()) / p.rate_per_s;
      if (t >= end) break;
      const auto& [a, b] = p.pairs[rng() % p.pairs.size()];
      out.push_back(KeyServiceRequest{AppId{a}, AppId{b}, p.bits, RequestId{0}, seconds(t)});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const KeyServiceRequest& x, const KeyServiceRequest& y) { return x.issued_at < y.issued_at; });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].request_id = RequestId{i + 1};
  return out;
}

std::string fingerprint(const Scenario& s, std::uint64_t seed) {
  const Topology topo = build_scenario_topology(s);
  Fnv f;
  f.bytes("topology");
  for (const auto& [id, n] : topo.nodes) {
    f.num(std::uint64_t{id.value});
    f.num(std::uint64_t{n.has_kms});
    f.bytes(to_string(n.kind));
  }
  for (const auto& [id, l] : topo.links) {
    f.num(std::uint64_t{id.value});
    f.num(std::uint64_t{l.a.value});
    f.num(std::uint64_t{l.b.value});
    f.bytes(to_string(l.medium));
    f.num(l.length_km);
    f.num(l.loss_db);
    f.num(l.key_rate_bps.value_or(-1.0));
    for (const auto& w : l.availability) {
      f.num(w.start);
      f.num(w.end);
    }
  }
  f.num(std::uint64_t{topo.satellite_trusted});
  f.num(s.rate.r0_bps);
  f.num(s.rate.max_loss_db);
  f.num(s.initial_bits);
  f.bytes("workload");
  for (const auto& q : expand_workload(s, seed)) {
    f.num(q.issued_at);
    f.num(std::uint64_t{q.app_src.node.value});
    f.num(std::uint64_t{q.app_dst.node.value});
    f.num(std::uint64_t{q.bits});
  }
  f.bytes("seed");
  f.num(seed);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(f.h));
  return buf;
}

RunResult prepare_run(const Scenario& s, const RunOptions& options) {
  RunResult out;
  out.model = options.model.value_or(s.model);
  out.seed = effective_seed(s, options.seed);
  out.fingerprint = fingerprint(s, out.seed);

  Topology topo = build_scenario_topology(s);
  EngineConfig cfg;
  cfg.rate = s.rate;
  cfg.latency = s.latency;
  cfg.seed = out.seed;
  cfg.initial_bits = s.initial_bits;
  cfg.sync_period = s.sync_period;
  cfg.heartbeat = s.heartbeat;
  cfg.heartbeat_misses = s.heartbeat_misses;
  cfg.reserve_window = s.reserve_window;
  cfg.reserve_lease = s.reserve_lease;

  out.engine = std::make_unique<Engine>(topo, cfg);
  if (out.model == Model::Hierarchical) {
    install_hierarchical(*out.engine, hierarchy_of(s, topo));
  } else {
    install_distributed(*out.engine, s.peers);
  }
  out.requests = expand_workload(s, out.seed);
  for (const auto& q : out.requests) out.engine->schedule_request(q);
  for (const auto& f : s.faults.entries) out.engine->inject_fault(f);
  return out;
}

RunResult run_scenario(const Scenario& s, const RunOptions& options) {
  auto out = prepare_run(s, options);
  out.engine->run_until(s.duration);
  return out;
}

}  // namespace qkdnet
