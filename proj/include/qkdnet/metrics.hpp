#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qkdnet/trace.hpp"

namespace qkdnet {

enum class Outcome { Delivered, Failed, Unfinished };
std::string_view to_string(Outcome o);

struct RequestReport {
  RequestId request_id;
  Outcome outcome = Outcome::Unfinished;
  std::uint64_t control_messages = 0;  // AP and CP records
  std::optional<double> setup_latency_ms;
  std::uint64_t relay_hops = 0;
  std::uint32_t bits = 0;
  std::string error;  // code of the Error that reached an app
  bool operator==(const RequestReport&) const = default;
};

struct RunReport {
  // Run metadata; not derivable from the trace, filled in by the caller.
  std::string model;
  std::uint64_t seed = 0;
  std::string fingerprint;

  std::vector<RequestReport> requests;  // ascending id
  std::uint64_t delivered = 0;
  std::uint64_t failed = 0;
  std::uint64_t unfinished = 0;
  bool truncated = false;  // some session never reached an outcome
  double success_ratio = 0.0;
  std::uint64_t delivered_key_bits = 0;
  std::optional<double> p50_latency_ms;
  std::optional<double> p95_latency_ms;
  std::uint64_t total_messages = 0;
  std::uint64_t control_messages = 0;
  std::map<std::string, std::uint64_t> controller_load;  // records sent or received

  bool operator==(const RunReport&) const = default;
};

// Pure fold over a trace; setup latency runs from the request's issue time to
// KeyReady at the source app.
RunReport summarize(const std::vector<TraceRecord>& trace);

// Nearest-rank percentile (p in percent) of a non-empty sample.
double percentile(std::vector<double> values, double p);

std::string report_to_json(const RunReport& report);
RunReport report_from_json(std::string_view text);

struct ComparisonRow {
  std::string metric;
  std::optional<double> a;
  std::optional<double> b;
  std::optional<double> delta() const;
};

struct Comparison {
  std::string label_a;
  std::string label_b;
  std::vector<ComparisonRow> rows;
  const ComparisonRow* row(std::string_view metric) const;
};

// Side by side with deltas (b - a). IncomparableRuns when the fingerprints differ.
Comparison compare(const RunReport& a, const RunReport& b);
std::string format_table(const Comparison& c);
std::string comparison_to_json(const Comparison& c);

std::vector<TraceRecord> session_records(const std::vector<TraceRecord>& trace, RequestId id);

// Hierarchical sequence view: "Type(role->role)" with the relay collapsed to
// "key establishment" and acknowledgements dropped. Roles: App1/App2, QN1/QN2
// (nodes of the source and destination domains), L1(1)/L1(2) for the two edge
// controllers, other controllers by name.
std::vector<std::string> hierarchical_projection(const std::vector<TraceRecord>& trace, RequestId id);

// Distributed sequence view with one label per protocol step.
std::vector<std::string> distributed_projection(const std::vector<TraceRecord>& trace, RequestId id);

// Human-readable listing of one session plus its sequence view.
std::string format_session(const std::vector<TraceRecord>& trace, RequestId id);

}  // namespace qkdnet
