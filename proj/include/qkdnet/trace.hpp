#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qkdnet/ids.hpp"

namespace qkdnet {

enum class Plane { AP, CP, DP };
std::string_view to_string(Plane p);
Plane plane_from_string(std::string_view s);

// One delivered message. Serializes to a single JSON line with a fixed field
// order so that trace files hash identically across runs.
struct TraceRecord {
  SimTime time = 0;
  std::string sender;
  std::string receiver;
  std::string type;
  std::optional<RequestId> request_id;
  Plane plane = Plane::CP;
  std::string detail;

  bool operator==(const TraceRecord&) const = default;
};

std::string to_json_line(const TraceRecord& record);
TraceRecord parse_trace_line(std::string_view line);

std::string write_trace(const std::vector<TraceRecord>& records);
std::vector<TraceRecord> read_trace(std::string_view text);

// Value of `key` in a "k=v k=v" detail string.
std::optional<std::string> detail_field(std::string_view detail, std::string_view key);

}  // namespace qkdnet
