#include "qkdnet/trace.hpp"

#include <nlohmann/json.hpp>

#include "qkdnet/error.hpp"

namespace qkdnet {

std::string_view to_string(Plane p) {
  switch (p) {
    case Plane::AP: return "AP";
    case Plane::CP: return "CP";
    case Plane::DP: return "DP";
  }
  return "?";
}

Plane plane_from_string(std::string_view s) {
  if (s == "AP") return Plane::AP;
  if (s == "DP") return Plane::DP;
  if (s == "CP") return Plane::CP;
  throw Error(Errc::ScenarioError, "unknown plane '" + std::string(s) + "'");
}

std::string to_json_line(const TraceRecord& r) {
  nlohmann::ordered_json j;
  j["t_us"] = r.time;
  j["from"] = r.sender;
  j["to"] = r.receiver;
  j["type"] = r.type;
  if (r.request_id) {
    j["request"] = r.request_id->value;
  } else {
    j["request"] = nullptr;
  }
  j["plane"] = std::string(to_string(r.plane));
  j["detail"] = r.detail;
  return j.dump();
}

TraceRecord parse_trace_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ScenarioError, std::string("malformed trace line: ") + e.what());
  }
  TraceRecord r;
  r.time = j.at("t_us").get<SimTime>();
  r.sender = j.at("from").get<std::string>();
  r.receiver = j.at("to").get<std::string>();
  r.type = j.at("type").get<std::string>();
  if (!j.at("request").is_null()) r.request_id = RequestId{j.at("request").get<std::uint64_t>()};
  r.plane = plane_from_string(j.at("plane").get<std::string>());
  r.detail = j.at("detail").get<std::string>();
  return r;
}

std::string write_trace(const std::vector<TraceRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json_line(r);
    out += '\n';
  }
  return out;
}

std::vector<TraceRecord> read_trace(std::string_view text) {
  std::vector<TraceRecord> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.find_first_not_of(" \t\r") != std::string_view::npos) {
      try {
        out.push_back(parse_trace_line(line));
      } catch (const std::exception& e) {
        throw Error(Errc::ScenarioError, "trace line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    pos = end + 1;
  }
  return out;
}

std::optional<std::string> detail_field(std::string_view detail, std::string_view key) {
  std::size_t pos = 0;
  while (pos < detail.size()) {
    auto end = detail.find(' ', pos);
    if (end == std::string_view::npos) end = detail.size();
    auto token = detail.substr(pos, end - pos);
    auto eq = token.find('=');
    if (eq != std::string_view::npos && token.substr(0, eq) == key) return std::string(token.substr(eq + 1));
    pos = end + 1;
  }
  return std::nullopt;
}

}  // namespace qkdnet
