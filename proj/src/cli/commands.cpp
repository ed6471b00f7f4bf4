#include "eqhs/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "eqhs/analysis.hpp"
#include "eqhs/io.hpp"
#include "eqhs/linalg.hpp"

namespace eqhs::cli {

namespace {

namespace fs = std::filesystem;

void configure_logging() {
  static bool done = false;
  if (done) return;
  done = true;
  auto logger = spdlog::stderr_logger_st("eqhs");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("EQHS_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

struct TopologyArgs {
  std::string kind;
  int n = 0;
  int m = 1;
  double current = 0.5;
  std::string drop;
  std::string out;
  bool print_matrix = false;
};

struct AnalyzeArgs {
  std::string topology;
  std::string drop;
  double capacity = 3.1;
  std::string capacities;
  double eta = 1.0;
  double t0 = 1.0;
  std::optional<double> gain;
  std::string x0;
  std::string epsilon = "0.1%";
};

struct SimulateArgs {
  std::string scenario;
  std::string out;
  bool force = false;
  std::optional<std::size_t> stride;
};

struct McArgs {
  std::string study;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  unsigned workers = 0;
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io::InputError(path.string(), "cannot open for writing");
  os << content;
  if (!os) throw io::InputError(path.string(), "write failed");
}

int cmd_topology(const TopologyArgs& a, std::ostream& out) {
  Topology topo = [&] {
    try {
      return make_topology(parse_topology_kind(a.kind), a.n, a.m, a.current);
    } catch (const std::invalid_argument& e) {
      throw io::InputError("topology", e.what());
    }
  }();
  if (!a.drop.empty()) {
    try {
      topo = topo.without_edges(io::parse_int_list(a.drop));
    } catch (const std::exception& e) {
      throw io::InputError("--drop-edges", e.what());
    }
  }
  const std::string text = io::topology_to_json(topo).dump(2) + "\n";
  if (a.out.empty()) {
    out << text;
  } else {
    write_file(a.out, text);
    spdlog::info("wrote {} equalizers to {}", topo.edge_count(), a.out);
  }
  if (a.print_matrix) out << io::format_incidence(topo);
  return kSuccess;
}

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  Topology topo = io::read_topology_file(a.topology);
  if (!a.drop.empty()) {
    try {
      topo = topo.without_edges(io::parse_int_list(a.drop));
    } catch (const std::exception& e) {
      throw io::InputError("--drop-edges", e.what());
    }
  }
  const int m = topo.modules().value_or(1);
  const PackConfig pack = [&] {
    try {
      if (!a.capacities.empty()) {
        return PackConfig(topo.n(), m, io::parse_number_list(a.capacities), a.eta, a.t0);
      }
      return PackConfig(topo.n(), m, a.capacity, a.eta, a.t0);
    } catch (const std::invalid_argument& e) {
      throw io::InputError("pack", e.what());
    }
  }();

  AnalysisReport report = controllability(pack, topo);
  if (a.gain && !a.x0.empty()) {
    const auto x0v = io::parse_soc_list(a.x0);
    if (static_cast<int>(x0v.size()) != topo.n()) {
      throw io::InputError("--x0", "expected " + std::to_string(topo.n()) + " values");
    }
    const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(x0v.data(), topo.n());
    try {
      report.te_bound_seconds = te_upper_bound(pack, topo, *a.gain, x0, io::parse_soc(a.epsilon));
    } catch (const std::exception& e) {
      spdlog::warn("no equalization-time bound: {}", e.what());
    }
  }
  out << io::report_to_json(report).dump(2) << "\n";
  return report.verdict == Verdict::Uncontrollable ? kNegative : kSuccess;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  const io::Scenario sc = io::read_scenario_file(a.scenario);
  SimulationOptions opts;
  opts.force = a.force;
  opts.external = sc.external;
  opts.record_stride = a.out.empty() ? 0 : a.stride.value_or(sc.record_stride);
  opts.max_steps = sc.max_steps.value_or(
      default_max_steps(sc.pack, sc.topology, sc.policy, sc.x0, sc.epsilon));
  if (opts.max_steps < 1) throw io::InputError("max_steps", "must be >= 1");

  SimRun run;
  try {
    run = simulate_until_balanced(sc.pack, sc.topology, sc.policy, sc.x0, sc.epsilon, opts);
  } catch (const UncontrollableError& e) {
    err << e.what() << " (use --force to simulate anyway)\n";
    return kNegative;
  }
  if (run.clamped) spdlog::warn("SOC saturated at 0 or 1 during the run");
  if (!a.out.empty()) {
    std::ostringstream csv;
    io::write_trajectory_csv(csv, run, sc.pack.sample_period());
    write_file(a.out, csv.str());
  }
  if (run.converged) {
    out << "T_e = " << io::format_human(*run.te_seconds) << " s (" << run.steps << " steps)\n";
    return kSuccess;
  }
  out << "NOT CONVERGED after " << run.steps << " steps, imbalance = "
      << io::format_human(run.final_imbalance) << "\n";
  return kNegative;
}

int cmd_mc(const McArgs& a, std::ostream& out) {
  if (!a.seed) throw io::InputError("--seed", "randomized commands need an explicit --seed");
  McStudy study = io::read_study_file(a.study);
  study.seed = *a.seed;

  const McReport report = run_study(study, a.workers);

  fs::create_directories(a.out_dir);
  std::ostringstream csv;
  io::write_report_csv(csv, report);
  write_file(fs::path(a.out_dir) / "report.csv", csv.str());
  for (const auto& c : report.cells) {
    std::ostringstream h;
    io::write_histogram_csv(h, c.hist);
    const std::string name = "hist_" + std::string(to_string(c.topology)) + "_n" +
                             std::to_string(c.size.n) + "_m" + std::to_string(c.size.m) + ".csv";
    write_file(fs::path(a.out_dir) / name, h.str());
  }

  for (const auto& size : study.pack_sizes) {
    out << "n=" << size.n << " m=" << size.m << "\n";
    out << "  topology     lambda2   mean T_e (s)  converged\n";
    for (const auto& c : report.cells) {
      if (c.size.n != size.n || c.size.m != size.m) continue;
      std::string name(to_string(c.topology));
      name.resize(12, ' ');
      std::string lam = io::format_human(c.lambda2);
      lam.resize(9, ' ');
      std::string mean = io::format_human(c.mean_te_s);
      mean.resize(13, ' ');
      out << "  " << name << " " << lam << " " << mean << " " << c.converged << "/" << c.samples
          << "\n";
    }
    out << "  ranking by mean T_e: ";
    const auto order = rank_by_mean_te(report, size);
    for (std::size_t i = 0; i < order.size(); ++i) {
      out << (i ? " < " : "") << to_string(order[i]);
    }
    out << "\n";
  }
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_logging();

  CLI::App app{"Hypergraph model of active battery equalization systems"};
  app.require_subcommand(1);

  TopologyArgs ta;
  auto* topo = app.add_subcommand("topology", "Generate a canonical equalizer topology");
  topo->add_option("--kind", ta.kind,
                   "series-cc | module-cc | layer-cc | cpc | module-cpc | switch-cpc")
      ->required();
  topo->add_option("--n", ta.n, "Number of cells")->required();
  topo->add_option("--m", ta.m, "Number of modules (module-based kinds)");
  topo->add_option("--current", ta.current, "Equalizer current limit in amperes");
  topo->add_option("--drop-edges", ta.drop, "Comma-separated equalizer labels to remove");
  topo->add_option("--out", ta.out, "Output JSON path (stdout when omitted)");
  topo->add_flag("--print-matrix", ta.print_matrix, "Print the incidence matrix");

  AnalyzeArgs aa;
  auto* ana = app.add_subcommand("analyze", "Controllability, lambda2 and time bound");
  ana->add_option("--topology", aa.topology, "Topology JSON file")->required();
  ana->add_option("--drop-edges", aa.drop, "Comma-separated equalizer labels to remove");
  ana->add_option("--capacity", aa.capacity, "Cell capacity in Ah (all cells)");
  ana->add_option("--capacities", aa.capacities, "Comma-separated per-cell capacities in Ah");
  ana->add_option("--eta", aa.eta, "Coulombic efficiency");
  ana->add_option("--t0", aa.t0, "Sampling period in seconds");
  ana->add_option("--gain", aa.gain, "Smallest proportional gain k_s (enables the time bound)");
  ana->add_option("--x0", aa.x0, "Initial SOCs for the time bound, e.g. 62%,48%,63%,42%");
  ana->add_option("--epsilon", aa.epsilon, "Imbalance tolerance (fraction or percent)");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Run a balancing scenario until equalized");
  sim->add_option("--scenario", sa.scenario, "Scenario JSON file")->required();
  sim->add_option("--out", sa.out, "Trajectory CSV path");
  sim->add_flag("--force", sa.force, "Simulate even if the topology is uncontrollable");
  sim->add_option("--stride", sa.stride, "Record every k-th step");

  McArgs ma;
  auto* mc = app.add_subcommand("mc", "Monte Carlo comparison of topologies");
  mc->add_option("--study", ma.study, "Study JSON file")->required();
  mc->add_option("--out-dir", ma.out_dir, "Directory for report and histogram CSVs")->required();
  mc->add_option("--seed", ma.seed, "64-bit seed (required)");
  mc->add_option("--workers", ma.workers, "Worker threads, 0 = auto");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kInputError;
  }

  try {
    if (*topo) return cmd_topology(ta, out);
    if (*ana) return cmd_analyze(aa, out);
    if (*sim) return cmd_simulate(sa, out, err);
    if (*mc) return cmd_mc(ma, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace eqhs::cli
