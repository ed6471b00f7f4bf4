#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "eqhs/analysis.hpp"
#include "eqhs/dynamics.hpp"
#include "eqhs/hypergraph.hpp"
#include "eqhs/montecarlo.hpp"

namespace eqhs::io {

using nlohmann::json;

/// Malformed input file or flag. `where` names the offending location.
class InputError : public std::runtime_error {
 public:
  InputError(const std::string& where, const std::string& what)
      : std::runtime_error(where.empty() ? what : where + ": " + what) {}
};

/// SOC literal: a fraction in [0, 1], or a percentage such as "62%" / "33.37%".
double parse_soc(std::string_view text);
double parse_soc(const json& value, const std::string& where);
/// Comma-separated SOC list.
std::vector<double> parse_soc_list(std::string_view text);
std::vector<double> parse_number_list(std::string_view text);
std::vector<int> parse_int_list(std::string_view text);

json topology_to_json(const Topology& topology);
Topology topology_from_json(const json& j);
Topology read_topology_file(const std::string& path);

json report_to_json(const AnalysisReport& report);

/// Rational entries right-aligned in columns.
std::string format_incidence(const Topology& topology);

/// Everything needed for one Algorithm-style balancing run.
struct Scenario {
  PackConfig pack;
  Topology topology;
  ControlPolicy policy;
  Eigen::VectorXd x0;
  ExternalCurrent external = ExternalCurrent::zero();
  double epsilon = 0.001;
  std::optional<std::size_t> max_steps;
  std::size_t record_stride = 1;
};

/// `base_dir` resolves a relative "topology": {"file": ...} reference.
Scenario scenario_from_json(const json& j, const std::string& base_dir = ".");
Scenario read_scenario_file(const std::string& path);

McStudy study_from_json(const json& j);
McStudy read_study_file(const std::string& path);

/// 17 significant digits, '.' decimal separator regardless of locale.
std::string format_machine(double v);
/// 4 significant digits for summaries.
std::string format_human(double v);

void write_trajectory_csv(std::ostream& os, const SimRun& run, double sample_period);
void write_report_csv(std::ostream& os, const McReport& report);
void write_histogram_csv(std::ostream& os, const Histogram& hist);

json read_json_file(const std::string& path);

}  // namespace eqhs::io
