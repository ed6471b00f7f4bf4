#include "eqhs/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace eqhs::io {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

double parse_double(std::string_view text, const std::string& where) {
  const std::string t = trim(text);
  double value = 0.0;
  const char* begin = t.data();
  if (!t.empty() && t.front() == '+') ++begin;
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (t.empty() || ec != std::errc() || ptr != end) {
    throw InputError(where, "expected a number, got '" + std::string(text) + "'");
  }
  return value;
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw InputError(where, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(where + "." + key, e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return get_field<T>(j, key, where);
}

double get_soc_or(const json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return parse_soc(j.at(key), where + "." + key);
}

std::vector<double> soc_array(const json& j, const std::string& where) {
  if (!j.is_array()) throw InputError(where, "expected an array of SOC values");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(parse_soc(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<int> int_array(const json& j, const std::string& where) {
  try {
    return j.get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw InputError(where, e.what());
  }
}

}  // namespace

double parse_soc(std::string_view text) {
  std::string t = trim(text);
  if (!t.empty() && t.back() == '%') {
    t.pop_back();
    return parse_double(t, "SOC") / 100.0;
  }
  return parse_double(t, "SOC");
}

double parse_soc(const json& value, const std::string& where) {
  if (value.is_number()) return value.get<double>();
  if (value.is_string()) {
    try {
      return parse_soc(value.get<std::string>());
    } catch (const InputError& e) {
      throw InputError(where, e.what());
    }
  }
  throw InputError(where, "expected a number or a percentage string");
}

std::vector<double> parse_soc_list(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
    out.push_back(parse_soc(piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    out.push_back(parse_double(
        text.substr(start, comma == std::string_view::npos ? text.npos : comma - start), ""));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<int> parse_int_list(std::string_view text) {
  std::vector<int> out;
  if (trim(text).empty()) return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string piece =
        trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
    int v = 0;
    auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), v);
    if (piece.empty() || ec != std::errc() || ptr != piece.data() + piece.size()) {
      throw InputError("", "expected an integer list, got '" + std::string(text) + "'");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

json topology_to_json(const Topology& topology) {
  json edges = json::array();
  for (const auto& e : topology.edges()) {
    edges.push_back({
        {"kind", std::string(to_string(e.kind))},
        {"head", e.head},
        {"tail", e.tail},
        {"head_weight", e.head_weight.to_string()},
        {"tail_weight", e.tail_weight.to_string()},
        {"current_limit_a", e.current_limit},
    });
  }
  json j;
  j["n"] = topology.n();
  j["m"] = topology.modules() ? json(*topology.modules()) : json(nullptr);
  j["switched"] = topology.switched();
  j["edges"] = std::move(edges);
  return j;
}

Topology topology_from_json(const json& j) {
  const std::string root = "topology";
  if (!j.is_object()) throw InputError(root, "expected a JSON object");
  const int n = get_field<int>(j, "n", root);
  std::optional<int> m;
  if (j.contains("m") && !j.at("m").is_null()) m = get_field<int>(j, "m", root);
  const bool switched = get_or<bool>(j, "switched", false, root);
  if (!j.contains("edges") || !j.at("edges").is_array()) {
    throw InputError(root, "missing array field 'edges'");
  }
  std::vector<Hyperedge> edges;
  const auto& arr = j.at("edges");
  for (std::size_t l = 0; l < arr.size(); ++l) {
    const std::string where = "edges[" + std::to_string(l) + "]";
    const auto& ej = arr[l];
    if (!ej.is_object()) throw InputError(where, "expected an object");
    try {
      const auto kind = parse_edge_kind(get_field<std::string>(ej, "kind", where));
      auto edge = make_edge(kind, int_array(ej.value("head", json::array()), where + ".head"),
                            int_array(ej.value("tail", json::array()), where + ".tail"),
                            get_field<double>(ej, "current_limit_a", where));
      if (ej.contains("head_weight") &&
          Rational::parse(get_field<std::string>(ej, "head_weight", where)) != edge.head_weight) {
        throw InputError(where, "head_weight does not match the " +
                                    std::string(to_string(kind)) + " weight " +
                                    edge.head_weight.to_string());
      }
      if (ej.contains("tail_weight") &&
          Rational::parse(get_field<std::string>(ej, "tail_weight", where)) != edge.tail_weight) {
        throw InputError(where, "tail_weight does not match the " +
                                    std::string(to_string(kind)) + " weight " +
                                    edge.tail_weight.to_string());
      }
      validate_edge(edge, n);
      edges.push_back(std::move(edge));
    } catch (const std::invalid_argument& e) {
      throw InputError(where, e.what());
    }
  }
  try {
    return Topology(n, std::move(edges), switched, m);
  } catch (const std::invalid_argument& e) {
    throw InputError(root, e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path, "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path, e.what());
  }
}

Topology read_topology_file(const std::string& path) {
  const json j = read_json_file(path);
  try {
    return topology_from_json(j);
  } catch (const InputError& e) {
    throw InputError(path, e.what());
  }
}

json report_to_json(const AnalysisReport& report) {
  json j;
  j["rank_C"] = report.rank_C;
  j["rank_LDC"] = report.rank_LDC;
  if (report.verdict == Verdict::Switched) {
    j["controllable"] = "switched";
  } else {
    j["controllable"] = report.verdict == Verdict::Controllable;
  }
  j["lambda2"] = report.lambda2;
  j["te_bound_s"] = report.te_bound_seconds ? json(*report.te_bound_seconds) : json(nullptr);
  return j;
}

std::string format_incidence(const Topology& topology) {
  const int n = topology.n();
  const int ne = topology.edge_count();
  std::vector<std::vector<std::string>> cells(static_cast<std::size_t>(n),
                                              std::vector<std::string>(static_cast<std::size_t>(ne), "0"));
  for (int l = 0; l < ne; ++l) {
    const auto& e = topology.edges()[static_cast<std::size_t>(l)];
    for (int p : e.head) cells[static_cast<std::size_t>(p - 1)][static_cast<std::size_t>(l)] = e.head_weight.to_string();
    for (int p : e.tail) cells[static_cast<std::size_t>(p - 1)][static_cast<std::size_t>(l)] = e.tail_weight.to_string();
  }
  std::size_t width = 0;
  for (const auto& row : cells) {
    for (const auto& c : row) width = std::max(width, c.size());
  }
  std::ostringstream os;
  os << (topology.switched() ? "C (switched template, head relocates to the highest-SOC cell)"
                             : "C")
     << " = " << n << " x " << ne << "\n";
  for (const auto& row : cells) {
    for (std::size_t l = 0; l < row.size(); ++l) {
      os << (l == 0 ? "  " : " ") << std::string(width - row[l].size(), ' ') << row[l];
    }
    os << "\n";
  }
  return os.str();
}

Scenario scenario_from_json(const json& j, const std::string& base_dir) {
  const std::string root = "scenario";
  if (!j.is_object()) throw InputError(root, "expected a JSON object");

  // Topology: a canonical kind, a file reference, or an inline topology.
  if (!j.contains("topology")) throw InputError(root, "missing field 'topology'");
  const json& tj = j.at("topology");
  const std::string tw = root + ".topology";
  std::optional<Topology> topology;
  try {
    if (tj.contains("edges")) {
      topology = topology_from_json(tj);
    } else if (tj.contains("file")) {
      std::filesystem::path p = get_field<std::string>(tj, "file", tw);
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      topology = read_topology_file(p.string());
    } else {
      const auto kind = parse_topology_kind(get_field<std::string>(tj, "kind", tw));
      topology = make_topology(kind, get_field<int>(tj, "n", tw), get_or<int>(tj, "m", 1, tw),
                               get_or<double>(tj, "current_limit_a", 0.5, tw));
    }
    if (tj.contains("drop_edges")) {
      const auto drop = int_array(tj.at("drop_edges"), tw + ".drop_edges");
      if (!drop.empty()) topology = topology->without_edges(drop);
    }
  } catch (const std::invalid_argument& e) {
    throw InputError(tw, e.what());
  } catch (const std::out_of_range& e) {
    throw InputError(tw, e.what());
  }
  const int n = topology->n();

  const json pj = j.value("pack", json::object());
  const std::string pw = root + ".pack";
  std::optional<PackConfig> pack;
  try {
    const int m = get_or<int>(pj, "m", topology->modules().value_or(1), pw);
    const double eta = get_or<double>(pj, "coulombic_efficiency", 1.0, pw);
    const double t0 = get_or<double>(pj, "sample_period_s", 1.0, pw);
    if (pj.contains("capacities_ah")) {
      pack.emplace(n, m, get_field<std::vector<double>>(pj, "capacities_ah", pw), eta, t0);
    } else {
      pack.emplace(n, m, get_or<double>(pj, "capacity_ah", 3.1, pw), eta, t0);
    }
  } catch (const std::invalid_argument& e) {
    throw InputError(pw, e.what());
  }

  const json polj = j.value("policy", json{{"mode", "sign-constant"}});
  const std::string polw = root + ".policy";
  const std::string mode = get_or<std::string>(polj, "mode", "sign-constant", polw);
  std::optional<ControlPolicy> policy;
  try {
    const auto ne = static_cast<std::size_t>(topology->edge_count());
    if (mode == "sign-constant") {
      if (polj.contains("currents_a")) {
        policy = ControlPolicy::sign_constant(get_field<std::vector<double>>(polj, "currents_a", polw));
      } else if (polj.contains("current_a")) {
        policy = ControlPolicy::sign_constant(
            std::vector<double>(ne, get_field<double>(polj, "current_a", polw)));
      } else {
        policy = ControlPolicy::sign_constant(*topology);
      }
    } else if (mode == "proportional") {
      std::vector<double> gains;
      if (polj.contains("gains")) {
        gains = get_field<std::vector<double>>(polj, "gains", polw);
      } else {
        gains.assign(ne, get_field<double>(polj, "gain", polw));
      }
      policy = ControlPolicy::proportional(std::move(gains), *pack, *topology);
    } else {
      throw InputError(polw + ".mode", "expected 'sign-constant' or 'proportional', got '" + mode + "'");
    }
  } catch (const std::invalid_argument& e) {
    throw InputError(polw, e.what());
  }

  if (!j.contains("x0")) throw InputError(root, "missing field 'x0'");
  const auto x0v = soc_array(j.at("x0"), root + ".x0");
  if (static_cast<int>(x0v.size()) != n) {
    throw InputError(root + ".x0", "has " + std::to_string(x0v.size()) + " entries for " +
                                       std::to_string(n) + " cells");
  }
  for (double v : x0v) {
    if (!(v >= 0.0 && v <= 1.0)) throw InputError(root + ".x0", "SOC values must lie in [0, 1]");
  }
  Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(x0v.data(), n);

  ExternalCurrent external = ExternalCurrent::zero();
  if (j.contains("external_current")) {
    const json& ej = j.at("external_current");
    const std::string ew = root + ".external_current";
    if (ej.is_number()) {
      external = ExternalCurrent::constant(ej.get<double>());
    } else if (ej.is_object() && ej.contains("constant_a")) {
      external = ExternalCurrent::constant(get_field<double>(ej, "constant_a", ew));
    } else if (ej.is_object() && ej.contains("table_a")) {
      external = ExternalCurrent::table(get_field<std::vector<double>>(ej, "table_a", ew));
    } else if (!ej.is_null()) {
      throw InputError(ew, "expected a number, {\"constant_a\": ...} or {\"table_a\": [...]}");
    }
  }

  const double epsilon = get_soc_or(j, "epsilon", 0.001, root);
  if (!(epsilon > 0.0)) throw InputError(root + ".epsilon", "must be positive");
  std::optional<std::size_t> max_steps;
  if (j.contains("max_steps")) max_steps = get_field<std::size_t>(j, "max_steps", root);
  const auto stride = get_or<std::size_t>(j, "record_stride", 1, root);
  if (stride < 1) throw InputError(root + ".record_stride", "must be >= 1");

  return Scenario{std::move(*pack),  std::move(*topology), std::move(*policy),
                  std::move(x0),     std::move(external),  epsilon,
                  max_steps,         stride};
}

Scenario read_scenario_file(const std::string& path) {
  const json j = read_json_file(path);
  const auto dir = std::filesystem::path(path).parent_path().string();
  try {
    return scenario_from_json(j, dir.empty() ? "." : dir);
  } catch (const InputError& e) {
    throw InputError(path, e.what());
  }
}

McStudy study_from_json(const json& j) {
  const std::string root = "study";
  if (!j.is_object()) throw InputError(root, "expected a JSON object");
  McStudy s;
  if (!j.contains("pack_sizes") || !j.at("pack_sizes").is_array()) {
    throw InputError(root, "missing array field 'pack_sizes'");
  }
  const auto& sizes = j.at("pack_sizes");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const std::string where = root + ".pack_sizes[" + std::to_string(i) + "]";
    const auto& sj = sizes[i];
    if (sj.is_array() && sj.size() == 2) {
      s.pack_sizes.push_back({sj[0].get<int>(), sj[1].get<int>()});
    } else if (sj.is_object()) {
      s.pack_sizes.push_back({get_field<int>(sj, "n", where), get_or<int>(sj, "m", 1, where)});
    } else {
      throw InputError(where, "expected {\"n\": .., \"m\": ..} or [n, m]");
    }
  }
  const auto names = get_field<std::vector<std::string>>(j, "topologies", root);
  for (std::size_t i = 0; i < names.size(); ++i) {
    try {
      s.topologies.push_back(parse_topology_kind(names[i]));
    } catch (const std::invalid_argument& e) {
      throw InputError(root + ".topologies[" + std::to_string(i) + "]", e.what());
    }
  }
  s.samples = get_or<int>(j, "samples", s.samples, root);
  s.seed = get_or<std::uint64_t>(j, "seed", s.seed, root);
  s.soc_low = get_soc_or(j, "soc_low", s.soc_low, root);
  s.soc_high = get_soc_or(j, "soc_high", s.soc_high, root);
  s.current_a = get_or<double>(j, "current_a", s.current_a, root);
  s.epsilon = get_soc_or(j, "epsilon", s.epsilon, root);
  s.sample_period_s = get_or<double>(j, "sample_period_s", s.sample_period_s, root);
  s.capacity_ah = get_or<double>(j, "capacity_ah", s.capacity_ah, root);
  s.bins = get_or<int>(j, "bins", s.bins, root);
  s.max_steps = get_or<std::size_t>(j, "max_steps", s.max_steps, root);
  s.max_steps_switched = get_or<std::size_t>(j, "max_steps_switched", s.max_steps_switched, root);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(root, e.what());
  }
  return s;
}

McStudy read_study_file(const std::string& path) {
  const json j = read_json_file(path);
  try {
    return study_from_json(j);
  } catch (const InputError& e) {
    throw InputError(path, e.what());
  }
}

std::string format_machine(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

std::string format_human(double v) {
  if (std::isnan(v)) return "nan";
  const double mag = std::abs(v);
  char buf[64];
  if (mag < 1e15 && v == std::floor(v)) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, static_cast<long long>(v));
    return std::string(buf, ptr);
  }
  int decimals = 4;
  if (mag >= 1.0) decimals = std::max(0, 3 - static_cast<int>(std::floor(std::log10(mag))));
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  return std::string(buf, ptr);
}

void write_trajectory_csv(std::ostream& os, const SimRun& run, double sample_period) {
  const Eigen::Index n = run.final_soc.size();
  os << "step,t_seconds";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",soc_" << i;
  os << ",imbalance\n";
  for (const auto& s : run.trajectory) {
    os << s.step << ',' << format_machine(static_cast<double>(s.step) * sample_period);
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << format_machine(s.soc[i]);
    os << ',' << format_machine(imbalance(s.soc)) << '\n';
  }
}

void write_report_csv(std::ostream& os, const McReport& report) {
  os << "topology,n,m,lambda2,mean_te_s,std_te_s,converged,samples\n";
  for (const auto& c : report.cells) {
    os << to_string(c.topology) << ',' << c.size.n << ',' << c.size.m << ','
       << format_machine(c.lambda2) << ',' << format_machine(c.mean_te_s) << ','
       << format_machine(c.std_te_s) << ',' << c.converged << ',' << c.samples << '\n';
  }
}

void write_histogram_csv(std::ostream& os, const Histogram& hist) {
  os << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < hist.counts.size(); ++b) {
    os << format_machine(hist.edges[b]) << ',' << format_machine(hist.edges[b + 1]) << ','
       << hist.counts[b] << '\n';
  }
}

}  // namespace eqhs::io
