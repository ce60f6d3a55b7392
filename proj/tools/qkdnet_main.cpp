#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qkdnet/metrics.hpp"
#include "qkdnet/scenario.hpp"

namespace {

using namespace qkdnet;

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kBadInput = 2;

// --seed, then the scenario's seed, then QKDNET_SEED, then 0.
std::optional<std::uint64_t> seed_override(const Scenario& s, const std::optional<std::uint64_t>& flag) {
  if (flag) return flag;
  if (s.seed) return std::nullopt;
  if (const char* env = std::getenv("QKDNET_SEED"); env && *env) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(Errc::ScenarioError, std::string("QKDNET_SEED is not an integer: ") + env);
    }
  }
  return std::nullopt;
}

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    return false;
  }
  return true;
}

bool report_problems(const Scenario& s) {
  const auto problems = validate_scenario(s);
  for (const auto& p : problems) std::cerr << p << "\n";
  return problems.empty();
}

RunReport report_for(const RunResult& run) {
  auto rep = summarize(run.trace());
  rep.model = std::string(to_string(run.model));
  rep.seed = run.seed;
  rep.fingerprint = run.fingerprint;
  return rep;
}

int cmd_validate(const std::string& path) {
  const auto s = load_scenario(path);
  if (!report_problems(s)) return kFailed;
  const auto topo = build_scenario_topology(s);
  std::cout << path << ": ok (" << topo.domains.size() << " domains, " << topo.nodes.size() << " nodes, "
            << topo.links.size() << " links, model " << to_string(s.model) << ")\n";
  return kOk;
}

int cmd_run(const std::string& path, const std::optional<std::uint64_t>& seed, const std::string& trace_out,
            const std::string& report_out) {
  const auto s = load_scenario(path);
  if (!report_problems(s)) return kFailed;
  RunOptions opts;
  opts.seed = seed_override(s, seed);
  const auto run = run_scenario(s, opts);
  const auto rep = report_for(run);
  if (!trace_out.empty() && !write_file(trace_out, write_trace(run.trace()))) return kFailed;
  if (!report_out.empty() && !write_file(report_out, report_to_json(rep))) return kFailed;
  std::cout << "model " << rep.model << ", seed " << rep.seed << ", fingerprint " << rep.fingerprint << "\n"
            << "requests " << rep.requests.size() << ": delivered " << rep.delivered << ", failed " << rep.failed
            << ", unfinished " << rep.unfinished << "\n"
            << "messages " << rep.total_messages << " (control " << rep.control_messages << ")\n";
  for (const auto& r : rep.requests) {
    std::cout << "  r" << r.request_id.value << " " << to_string(r.outcome) << " control=" << r.control_messages
              << " hops=" << r.relay_hops;
    if (r.setup_latency_ms) std::cout << " setup_ms=" << *r.setup_latency_ms;
    if (!r.error.empty()) std::cout << " error=" << r.error;
    std::cout << "\n";
  }
  return kOk;
}

int cmd_compare(const std::string& path, const std::string& models, const std::optional<std::uint64_t>& seed,
                const std::string& json_out) {
  const auto s = load_scenario(path);
  std::vector<Model> list;
  std::stringstream in(models);
  for (std::string item; std::getline(in, item, ',');) {
    try {
      list.push_back(model_from_string(item));
    } catch (const Error&) {
      std::cerr << "error: unknown model '" << item << "'\n";
      return kBadInput;
    }
  }
  if (list.size() != 2) {
    std::cerr << "error: --models needs exactly two models\n";
    return kBadInput;
  }
  for (Model m : list) {
    Scenario copy = s;
    copy.model = m;
    if (!report_problems(copy)) return kFailed;
  }
  RunOptions opts;
  opts.seed = seed_override(s, seed);
  opts.model = list[0];
  const auto a = report_for(run_scenario(s, opts));
  opts.model = list[1];
  const auto b = report_for(run_scenario(s, opts));
  const auto cmp = compare(a, b);
  std::cout << format_table(cmp);
  if (!json_out.empty() && !write_file(json_out, comparison_to_json(cmp))) return kFailed;
  return kOk;
}

int cmd_trace(const std::string& path, const std::optional<std::uint64_t>& request) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << path << ": cannot open file\n";
    return kBadInput;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto trace = read_trace(buf.str());
  if (!request) {
    std::cout << report_to_json(summarize(trace));
    return kOk;
  }
  if (session_records(trace, RequestId{*request}).empty()) {
    std::cerr << "no records for request " << *request << "\n";
    return kFailed;
  }
  std::cout << format_session(trace, RequestId{*request});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-domain QKD network control-plane simulator"};
  app.require_subcommand(1);

  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string trace_out;
  std::string report_out;
  std::string models = "hierarchical,distributed";
  std::string json_out;
  std::string trace_file;
  std::optional<std::uint64_t> request;

  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("scenario", scenario, "Scenario file")->required();

  auto* run = app.add_subcommand("run", "Run a scenario");
  run->add_option("scenario", scenario, "Scenario file")->required();
  run->add_option("--seed", seed, "Seed override");
  run->add_option("--trace", trace_out, "Write the trace (JSON lines)");
  run->add_option("--report", report_out, "Write the run report (JSON)");

  auto* cmp = app.add_subcommand("compare", "Run two models on one scenario and compare");
  cmp->add_option("scenario", scenario, "Scenario file")->required();
  cmp->add_option("--models", models, "Two comma-separated models")->capture_default_str();
  cmp->add_option("--seed", seed, "Seed override");
  cmp->add_option("--json", json_out, "Also write the comparison as JSON");

  auto* tr = app.add_subcommand("trace", "Show one session from a trace file");
  tr->add_option("file", trace_file, "Trace file")->required();
  tr->add_option("--request", request, "Request id");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadInput;
  }

  try {
    if (*validate) return cmd_validate(scenario);
    if (*run) return cmd_run(scenario, seed, trace_out, report_out);
    if (*cmp) return cmd_compare(scenario, models, seed, json_out);
    if (*tr) return cmd_trace(trace_file, request);
  } catch (const Error& e) {
    std::cerr << "error: " << (e.code() == Errc::ScenarioError ? "" : std::string(to_string(e.code())) + ": ")
              << e.what() << "\n";
    return e.code() == Errc::ScenarioError ? kBadInput : kFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kOk;
}
