#pragma once

#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "qkdnet/control_plane.hpp"
#include "qkdnet/metrics.hpp"
#include "qkdnet/scenario.hpp"

namespace qkdnet::testkit {

std::string scenario_path(std::string_view name);
Scenario load_reference(std::string_view name);

// At most 4 domains and 16 nodes, valid by construction, no faults.
Scenario random_scenario(std::mt19937_64& rng);

struct KeyAudit {
  bool ok = true;
  std::string problem;
  std::size_t deliveries = 0;
};
// Both ends of every delivery hold identical blocks, both ends of every link
// agree, and each link's consumption equals the blocks relayed across it.
KeyAudit audit_keys(const Engine& engine);

// Exhaustive search over simple paths: fewest hops, then smallest sequence.
std::optional<Path> brute_force_route(const Topology& topology, const NetworkView& view, const RouteQuery& query);

struct RandomGraph {
  Topology topology;
  NetworkView view;
  RouteQuery query;
};
RandomGraph random_graph(std::mt19937_64& rng, int max_nodes);

// Greedy priority prefix on one link: grant in priority order while the
// buffer lasts, stop at the first reservation that does not fit.
std::vector<std::size_t> greedy_prefix(const std::vector<std::uint64_t>& bits_in_priority_order, std::uint64_t buffer);

}  // namespace qkdnet::testkit
