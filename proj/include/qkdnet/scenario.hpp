#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qkdnet/dist_integration.hpp"
#include "qkdnet/hier_integration.hpp"
#include "qkdnet/net_model.hpp"
#include "qkdnet/sim_engine.hpp"

namespace qkdnet {

enum class Model { Hierarchical, Distributed };
std::string_view to_string(Model m);
Model model_from_string(std::string_view s);

struct DomainSpec {
  DomainId id;
  std::string kind;  // ring, star, mesh, bus, custom
  int n = 0;
  double link_length_km = 10.0;
  std::vector<CustomEdge> edges;
  int line = 0;
};

struct RequestSpec {
  SimTime at = 0;
  NodeId src;
  NodeId dst;
  std::uint32_t bits = 0;
  int line = 0;
};

struct PoissonSpec {
  double rate_per_s = 0.0;
  std::uint32_t bits = 0;
  SimTime start = 0;
  SimTime end = 0;
  std::vector<std::pair<NodeId, NodeId>> pairs;
  int line = 0;
};

struct Scenario {
  std::string source;  // file name used in diagnostics
  std::string name;
  Model model = Model::Hierarchical;
  std::optional<std::uint64_t> seed;
  SimTime duration = seconds(60);
  std::uint64_t initial_bits = 0;
  RateModel rate;
  LossParams loss;
  LatencyModel latency;
  ComposeOptions compose;
  std::vector<DomainSpec> domains;
  std::vector<BackboneSpec> backbone;
  std::vector<int> backbone_lines;
  std::optional<HierarchySpec> hierarchy;
  int hierarchy_line = 0;
  PeerOptions peers;
  SimTime sync_period = seconds(10);
  SimTime heartbeat = seconds(5);
  int heartbeat_misses = 3;
  SimTime reserve_window = millis(10);
  SimTime reserve_lease = seconds(2);
  std::vector<RequestSpec> requests;
  std::optional<PoissonSpec> poisson;
  FaultScript faults;
  std::vector<int> fault_lines;
};

// Schema-level parsing. Throws Error(ScenarioError) with a
// "source:line:column: message" diagnostic.
Scenario parse_scenario(std::string_view text, std::string source = "<scenario>");
Scenario load_scenario(const std::string& path);

// Builds and composes the domains; throws the compose error codes.
Topology build_scenario_topology(const Scenario& scenario);

// Semantic checks (topology rules, hierarchy, workload, faults), each
// anchored to a line where one is known. Empty = valid.
std::vector<std::string> validate_scenario(const Scenario& scenario);

std::uint64_t effective_seed(const Scenario& scenario, std::optional<std::uint64_t> override_seed);

// Explicit requests plus Poisson arrivals, sorted by time, ids from 1.
std::vector<KeyServiceRequest> expand_workload(const Scenario& scenario, std::uint64_t seed);

// Hash of topology, workload and seed; equal fingerprints mean comparable runs.
std::string fingerprint(const Scenario& scenario, std::uint64_t seed);

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<Model> model;
};

struct RunResult {
  std::unique_ptr<Engine> engine;
  Model model = Model::Hierarchical;
  std::uint64_t seed = 0;
  std::string fingerprint;
  std::vector<KeyServiceRequest> requests;

  const std::vector<TraceRecord>& trace() const { return engine->trace(); }
};

// Builds the engine for the scenario without running it.
RunResult prepare_run(const Scenario& scenario, const RunOptions& options = {});
RunResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

}  // namespace qkdnet
