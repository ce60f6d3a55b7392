#include "qkdnet/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <set>
#include <sstream>

#include "qkdnet/error.hpp"

namespace qkdnet {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Delivered: return "Delivered";
    case Outcome::Failed: return "Failed";
    case Outcome::Unfinished: return "Unfinished";
  }
  return "?";
}

namespace {

Outcome outcome_from_string(std::string_view s) {
  if (s == "Delivered") return Outcome::Delivered;
  if (s == "Failed") return Outcome::Failed;
  if (s == "Unfinished") return Outcome::Unfinished;
  throw Error(Errc::ScenarioError, "unknown outcome " + std::string(s));
}

bool is_app(std::string_view name) { return name.starts_with("app@"); }
bool is_node(std::string_view name) { return name.starts_with("qn"); }
bool is_controller(std::string_view name) { return !is_app(name) && !is_node(name); }

// Domain number of "qn<d>.<i>" or "app@qn<d>.<i>".
std::optional<unsigned> domain_in(std::string_view name) {
  if (is_app(name)) name.remove_prefix(4);
  if (!is_node(name)) return std::nullopt;
  name.remove_prefix(2);
  const auto dot = name.find('.');
  if (dot == std::string_view::npos) return std::nullopt;
  unsigned v = 0;
  for (char c : name.substr(0, dot)) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + static_cast<unsigned>(c - '0');
  }
  return v;
}

std::uint64_t field_u64(const TraceRecord& r, std::string_view key) {
  auto v = detail_field(r.detail, key);
  return v ? std::stoull(*v) : 0;
}

struct Acc {
  RequestReport rep;
  std::optional<SimTime> issued;
  std::string app_src;
  std::string app_dst;
  bool ready_src = false;
  bool ready_dst = false;
  bool error = false;
  std::string key;  // key id of the delivered block
  std::map<std::string, std::uint64_t> hops_by_key;
};

}  // namespace

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(Errc::InvalidRequest, "percentile of an empty sample");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

RunReport summarize(const std::vector<TraceRecord>& trace) {
  RunReport out;
  out.total_messages = trace.size();
  std::map<RequestId, Acc> acc;

  for (const auto& r : trace) {
    if (is_controller(r.sender)) ++out.controller_load[r.sender];
    if (is_controller(r.receiver)) ++out.controller_load[r.receiver];
    if (!r.request_id) continue;
    auto& a = acc[*r.request_id];
    a.rep.request_id = *r.request_id;
    if (r.plane != Plane::DP) ++a.rep.control_messages;

    if (r.type == "KeyServiceRequest") {
      a.issued = static_cast<SimTime>(field_u64(r, "issued_us"));
      a.rep.bits = static_cast<std::uint32_t>(field_u64(r, "bits"));
      a.app_src = detail_field(r.detail, "src").value_or(r.sender);
      a.app_dst = detail_field(r.detail, "dst").value_or("");
    } else if (r.type == "KeyRelay" && r.plane == Plane::DP) {
      ++a.hops_by_key[detail_field(r.detail, "key").value_or("")];
    } else if (r.type == "KeyReady") {
      a.key = detail_field(r.detail, "key").value_or("");
      if (r.receiver == a.app_src) {
        a.ready_src = true;
        if (a.issued) a.rep.setup_latency_ms = static_cast<double>(r.time - *a.issued) / 1000.0;
      } else if (r.receiver == a.app_dst) {
        a.ready_dst = true;
      }
    } else if (r.type == "Error" && is_app(r.receiver)) {
      a.error = true;
      a.rep.error = detail_field(r.detail, "code").value_or("");
    }
  }

  std::vector<double> latencies;
  for (auto& [id, a] : acc) {
    auto& rep = a.rep;
    if (a.ready_src && a.ready_dst) {
      rep.outcome = Outcome::Delivered;
      rep.error.clear();
      ++out.delivered;
      out.delivered_key_bits += rep.bits;
      if (rep.setup_latency_ms) latencies.push_back(*rep.setup_latency_ms);
    } else if (a.error) {
      rep.outcome = Outcome::Failed;
      rep.setup_latency_ms.reset();
      ++out.failed;
    } else {
      rep.outcome = Outcome::Unfinished;
      rep.setup_latency_ms.reset();
      ++out.unfinished;
    }
    if (!a.key.empty() && a.hops_by_key.contains(a.key)) {
      rep.relay_hops = a.hops_by_key.at(a.key);
    } else {
      for (const auto& [k, n] : a.hops_by_key) rep.relay_hops = std::max(rep.relay_hops, n);
    }
    out.control_messages += rep.control_messages;
    out.requests.push_back(rep);
  }
  out.truncated = out.unfinished > 0;
  if (!out.requests.empty()) {
    out.success_ratio = static_cast<double>(out.delivered) / static_cast<double>(out.requests.size());
  }
  if (!latencies.empty()) {
    out.p50_latency_ms = percentile(latencies, 50);
    out.p95_latency_ms = percentile(latencies, 95);
  }
  return out;
}

namespace {

using nlohmann::ordered_json;

ordered_json opt(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::optional<double> opt_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string report_to_json(const RunReport& rep) {
  ordered_json j;
  j["model"] = rep.model;
  j["seed"] = rep.seed;
  j["fingerprint"] = rep.fingerprint;
  j["requests_total"] = rep.requests.size();
  j["delivered"] = rep.delivered;
  j["failed"] = rep.failed;
  j["unfinished"] = rep.unfinished;
  j["truncated"] = rep.truncated;
  j["success_ratio"] = rep.success_ratio;
  j["delivered_key_bits"] = rep.delivered_key_bits;
  j["p50_latency_ms"] = opt(rep.p50_latency_ms);
  j["p95_latency_ms"] = opt(rep.p95_latency_ms);
  j["total_messages"] = rep.total_messages;
  j["control_messages"] = rep.control_messages;
  ordered_json load = ordered_json::object();
  for (const auto& [name, n] : rep.controller_load) load[name] = n;
  j["controller_load"] = load;
  ordered_json reqs = ordered_json::array();
  for (const auto& r : rep.requests) {
    ordered_json e;
    e["request_id"] = r.request_id.value;
    e["outcome"] = to_string(r.outcome);
    e["control_messages"] = r.control_messages;
    e["setup_latency_ms"] = opt(r.setup_latency_ms);
    e["relay_hops"] = r.relay_hops;
    e["bits"] = r.bits;
    e["error"] = r.error;
    reqs.push_back(e);
  }
  j["requests"] = reqs;
  return j.dump(2) + "\n";
}

RunReport report_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ScenarioError, std::string("bad report: ") + e.what());
  }
  RunReport rep;
  try {
    rep.model = j.at("model").get<std::string>();
    rep.seed = j.at("seed").get<std::uint64_t>();
    rep.fingerprint = j.at("fingerprint").get<std::string>();
    rep.delivered = j.at("delivered").get<std::uint64_t>();
    rep.failed = j.at("failed").get<std::uint64_t>();
    rep.unfinished = j.at("unfinished").get<std::uint64_t>();
    rep.truncated = j.at("truncated").get<bool>();
    rep.success_ratio = j.at("success_ratio").get<double>();
    rep.delivered_key_bits = j.at("delivered_key_bits").get<std::uint64_t>();
    rep.p50_latency_ms = opt_from(j.at("p50_latency_ms"));
    rep.p95_latency_ms = opt_from(j.at("p95_latency_ms"));
    rep.total_messages = j.at("total_messages").get<std::uint64_t>();
    rep.control_messages = j.at("control_messages").get<std::uint64_t>();
    for (const auto& [name, n] : j.at("controller_load").items()) rep.controller_load[name] = n.get<std::uint64_t>();
    for (const auto& e : j.at("requests")) {
      RequestReport r;
      r.request_id = RequestId{e.at("request_id").get<std::uint64_t>()};
      r.outcome = outcome_from_string(e.at("outcome").get<std::string>());
      r.control_messages = e.at("control_messages").get<std::uint64_t>();
      r.setup_latency_ms = opt_from(e.at("setup_latency_ms"));
      r.relay_hops = e.at("relay_hops").get<std::uint64_t>();
      r.bits = e.at("bits").get<std::uint32_t>();
      r.error = e.at("error").get<std::string>();
      rep.requests.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ScenarioError, std::string("bad report: ") + e.what());
  }
  return rep;
}

std::optional<double> ComparisonRow::delta() const {
  if (!a || !b) return std::nullopt;
  return *b - *a;
}

const ComparisonRow* Comparison::row(std::string_view metric) const {
  for (const auto& r : rows) {
    if (r.metric == metric) return &r;
  }
  return nullptr;
}

Comparison compare(const RunReport& a, const RunReport& b) {
  if (a.fingerprint != b.fingerprint) {
    throw Error(Errc::IncomparableRuns,
                "scenario fingerprints differ: " + a.fingerprint + " vs " + b.fingerprint);
  }
  Comparison c;
  c.label_a = a.model.empty() ? "a" : a.model;
  c.label_b = b.model.empty() ? "b" : b.model;
  auto add = [&](std::string metric, std::optional<double> x, std::optional<double> y) {
    c.rows.push_back(ComparisonRow{std::move(metric), x, y});
  };
  auto num = [](auto v) { return std::optional<double>(static_cast<double>(v)); };
  auto max_load = [](const RunReport& r) {
    std::uint64_t m = 0;
    for (const auto& [name, n] : r.controller_load) m = std::max(m, n);
    return m;
  };
  add("requests", num(a.requests.size()), num(b.requests.size()));
  add("delivered", num(a.delivered), num(b.delivered));
  add("success_ratio", a.success_ratio, b.success_ratio);
  add("delivered_key_bits", num(a.delivered_key_bits), num(b.delivered_key_bits));
  add("control_messages", num(a.control_messages), num(b.control_messages));
  add("control_messages_per_request",
      a.requests.empty() ? std::nullopt : num(static_cast<double>(a.control_messages) / a.requests.size()),
      b.requests.empty() ? std::nullopt : num(static_cast<double>(b.control_messages) / b.requests.size()));
  add("total_messages", num(a.total_messages), num(b.total_messages));
  add("p50_latency_ms", a.p50_latency_ms, b.p50_latency_ms);
  add("p95_latency_ms", a.p95_latency_ms, b.p95_latency_ms);
  add("controllers", num(a.controller_load.size()), num(b.controller_load.size()));
  add("max_controller_load", num(max_load(a)), num(max_load(b)));

  std::map<RequestId, std::pair<std::optional<double>, std::optional<double>>> per;
  for (const auto& r : a.requests) per[r.request_id].first = static_cast<double>(r.control_messages);
  for (const auto& r : b.requests) per[r.request_id].second = static_cast<double>(r.control_messages);
  for (const auto& [id, v] : per) add("control_messages[r" + std::to_string(id.value) + "]", v.first, v.second);
  return c;
}

namespace {

std::string cell(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[64];
  if (std::abs(*v - std::round(*v)) < 1e-9 && std::abs(*v) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", *v);
  } else {
    std::snprintf(buf, sizeof buf, "%.4f", *v);
  }
  return buf;
}

}  // namespace

std::string format_table(const Comparison& c) {
  std::size_t w0 = 6;
  std::size_t w1 = c.label_a.size();
  std::size_t w2 = c.label_b.size();
  for (const auto& r : c.rows) {
    w0 = std::max(w0, r.metric.size());
    w1 = std::max(w1, cell(r.a).size());
    w2 = std::max(w2, cell(r.b).size());
  }
  std::ostringstream out;
  auto line = [&](const std::string& m, const std::string& x, const std::string& y, const std::string& d) {
    out << std::left << std::setw(static_cast<int>(w0)) << m << "  " << std::right << std::setw(static_cast<int>(w1))
        << x << "  " << std::setw(static_cast<int>(w2)) << y << "  " << d << "\n";
  };
  line("metric", c.label_a, c.label_b, "delta");
  for (const auto& r : c.rows) {
    auto d = r.delta();
    std::string ds = cell(d);
    if (d && *d > 0) ds = "+" + ds;
    line(r.metric, cell(r.a), cell(r.b), ds);
  }
  return out.str();
}

std::string comparison_to_json(const Comparison& c) {
  ordered_json j;
  j["a"] = c.label_a;
  j["b"] = c.label_b;
  ordered_json rows = ordered_json::array();
  for (const auto& r : c.rows) {
    ordered_json e;
    e["metric"] = r.metric;
    e["a"] = opt(r.a);
    e["b"] = opt(r.b);
    e["delta"] = opt(r.delta());
    rows.push_back(e);
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

std::vector<TraceRecord> session_records(const std::vector<TraceRecord>& trace, RequestId id) {
  std::vector<TraceRecord> out;
  for (const auto& r : trace) {
    if (r.request_id == id) out.push_back(r);
  }
  return out;
}

namespace {

struct Roles {
  std::string app_src;
  std::string app_dst;
  std::optional<unsigned> dom_src;
  std::optional<unsigned> dom_dst;
  std::string l1_src;
  std::string l1_dst;
};

Roles roles_of(const std::vector<TraceRecord>& recs) {
  Roles r;
  for (const auto& rec : recs) {
    if (rec.type != "KeyServiceRequest") continue;
    r.app_src = detail_field(rec.detail, "src").value_or(rec.sender);
    r.app_dst = detail_field(rec.detail, "dst").value_or("");
    r.l1_src = rec.receiver;
    r.dom_src = domain_in(r.app_src);
    r.dom_dst = domain_in(r.app_dst);
    break;
  }
  for (const auto& rec : recs) {
    if (rec.type == "AvailabilityQuery" && is_controller(rec.sender) && domain_in(rec.receiver) == r.dom_dst &&
        r.dom_dst != r.dom_src) {
      r.l1_dst = rec.sender;
      break;
    }
  }
  return r;
}

std::string role(const Roles& r, const std::string& name) {
  if (name == r.app_src) return "App1";
  if (name == r.app_dst) return "App2";
  if (is_node(name)) {
    const auto d = domain_in(name);
    if (d && d == r.dom_src) return "QN1";
    if (d && d == r.dom_dst) return "QN2";
    return "QN";
  }
  if (name == r.l1_src) return "L1(1)";
  if (name == r.l1_dst) return "L1(2)";
  return name;
}

void push_collapsed(std::vector<std::string>& out, std::string label) {
  if (out.empty() || out.back() != label) out.push_back(std::move(label));
}

}  // namespace

std::vector<std::string> hierarchical_projection(const std::vector<TraceRecord>& trace, RequestId id) {
  const auto recs = session_records(trace, id);
  const auto roles = roles_of(recs);
  std::vector<std::string> out;
  for (const auto& rec : recs) {
    if (rec.type == "Confirm") continue;
    if (rec.type == "KeyRelay") {
      push_collapsed(out, "key establishment");
      continue;
    }
    out.push_back(rec.type + "(" + role(roles, rec.sender) + "->" + role(roles, rec.receiver) + ")");
  }
  return out;
}

std::vector<std::string> distributed_projection(const std::vector<TraceRecord>& trace, RequestId id) {
  const auto recs = session_records(trace, id);
  const auto roles = roles_of(recs);
  std::vector<std::string> out;
  for (const auto& rec : recs) {
    const auto& t = rec.type;
    if (t == "KeyServiceRequest") {
      push_collapsed(out, "KeyServiceRequest");
    } else if (t == "AvailabilityQuery" || t == "AvailabilityReply") {
      const auto& node = t == "AvailabilityQuery" ? rec.receiver : rec.sender;
      push_collapsed(out, domain_in(node) == roles.dom_src ? "Availability(1)" : "Availability(2)");
    } else if (t == "InterdomainRoute") {
      const auto stage = detail_field(rec.detail, "stage").value_or("");
      push_collapsed(out, stage == "propose" ? "EWBI coordinate" : "agreed interdomain route");
    } else if (t == "ReserveRequest" || t == "ReserveGrant" || t == "ReserveDeny") {
      push_collapsed(out, "agreed interdomain route");
    } else if (t == "IntradomainRouteSet") {
      push_collapsed(out, "IntradomainRouteSet");
    } else if (t == "KeyRelay") {
      push_collapsed(out, "key establishment");
    } else if (t == "ConnectionEnd") {
      push_collapsed(out, "ConnectionEnd agreement");
    } else if (t == "KeyReady") {
      push_collapsed(out, "KeyReady");
    } else if (t == "Error") {
      push_collapsed(out, "Error");
    }
  }
  return out;
}

std::string format_session(const std::vector<TraceRecord>& trace, RequestId id) {
  const auto recs = session_records(trace, id);
  std::ostringstream out;
  out << "request " << id.value << ": " << recs.size() << " messages\n";
  if (recs.empty()) return out.str();
  const SimTime t0 = recs.front().time;
  for (const auto& r : recs) {
    char when[32];
    std::snprintf(when, sizeof when, "%+10.3f ms", static_cast<double>(r.time - t0) / 1000.0);
    out << "  " << when << "  [" << to_string(r.plane) << "] " << r.sender << " -> " << r.receiver << "  " << r.type;
    if (!r.detail.empty()) out << "  " << r.detail;
    out << "\n";
  }
  const bool distributed = std::any_of(recs.begin(), recs.end(), [](const TraceRecord& r) {
    return r.type.starts_with("Reserve") || detail_field(r.detail, "stage") == std::optional<std::string>("propose");
  });
  out << "sequence:\n";
  const auto seq = distributed ? distributed_projection(trace, id) : hierarchical_projection(trace, id);
  for (std::size_t i = 0; i < seq.size(); ++i) out << "  " << (i + 1) << ". " << seq[i] << "\n";
  return out.str();
}

}  // namespace qkdnet
