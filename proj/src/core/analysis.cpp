#include "eqhs/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eqhs/linalg.hpp"

namespace eqhs {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Controllable:
      return "controllable";
    case Verdict::Uncontrollable:
      return "uncontrollable";
    case Verdict::Switched:
      return "switched";
  }
  return "?";
}

AnalysisReport controllability(const PackConfig& pack, const Topology& topology) {
  if (pack.n() != topology.n()) {
    throw std::invalid_argument("pack has " + std::to_string(pack.n()) +
                                " cells but topology has " + std::to_string(topology.n()));
  }
  const int n = topology.n();
  const Eigen::MatrixXd c = structural_incidence(topology);
  const Eigen::MatrixXd ldc = difference_matrix(n) * pack.d().asDiagonal() * c;

  AnalysisReport report;
  report.rank_C = rank(c);
  report.rank_LDC = rank(ldc);
  report.min_equalizers_needed = n - 1;
  report.lambda2 = second_smallest_eigenvalue(laplacian(c));
  if (topology.switched()) {
    report.verdict = Verdict::Switched;
  } else {
    report.verdict = report.rank_LDC == n - 1 ? Verdict::Controllable : Verdict::Uncontrollable;
  }
  return report;
}

SimRun simulate_until_balanced(const PackConfig& pack, const Topology& topology,
                               const ControlPolicy& policy, const Eigen::VectorXd& x0,
                               double epsilon, const SimulationOptions& options) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("tolerance epsilon must be positive");
  if (options.max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
  if (x0.size() != topology.n()) {
    throw std::invalid_argument("initial SOC vector has " + std::to_string(x0.size()) +
                                " entries, topology has " + std::to_string(topology.n()) +
                                " cells");
  }
  if (!x0.allFinite()) throw std::invalid_argument("initial SOC contains NaN or infinity");
  if (!topology.switched() && !options.force) {
    const auto report = controllability(pack, topology);
    if (report.verdict == Verdict::Uncontrollable) {
      throw UncontrollableError("The equalization cannot be achieved! rank(LDC) = " +
                                std::to_string(report.rank_LDC) + " < n-1 = " +
                                std::to_string(topology.n() - 1));
    }
  }

  const ClosedLoop loop(pack, topology, policy);
  const double t0 = pack.sample_period();
  const std::size_t stride = options.record_stride;

  SimRun run;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(loop.edge_count());

  auto record = [&](std::size_t k) {
    run.trajectory.push_back({k, x});
    if (options.record_controls) {
      Eigen::VectorXd uk;
      loop.currents(x, uk);
      run.controls.push_back(std::move(uk));
    }
  };

  std::size_t k = 0;
  double current_imbalance = imbalance(x);
  for (;;) {
    const bool done = current_imbalance <= epsilon || k >= options.max_steps;
    if (stride > 0 && (k % stride == 0 || done)) record(k);
    if (current_imbalance <= epsilon) {
      run.converged = true;
      run.te_seconds = static_cast<double>(k) * t0;
      break;
    }
    if (k >= options.max_steps) break;
    run.clamped |= loop.advance(x, options.external.at(k), u);
    ++k;
    current_imbalance = imbalance(x);
  }
  run.steps = k;
  run.final_imbalance = current_imbalance;
  run.final_soc = std::move(x);
  return run;
}

double te_upper_bound(const PackConfig& pack, const Topology& topology, double k_s,
                      const Eigen::VectorXd& x0, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("tolerance epsilon must be positive");
  if (x0.size() != topology.n()) throw std::invalid_argument("initial SOC length mismatch");
  if (!(k_s > 0.0)) throw std::invalid_argument("smallest gain k_s must be positive");

  const int n = topology.n();
  const double lambda2 = second_smallest_eigenvalue(laplacian(structural_incidence(topology)));
  if (!(lambda2 > 0.0)) {
    throw std::domain_error("lambda2 = 0: the bound is infinite for this topology");
  }
  const double rate = pack.d_smallest() * k_s * lambda2;
  if (!(rate < 1.0)) {
    throw std::invalid_argument("d_s * k_s * lambda2 = " + std::to_string(rate) +
                                " must lie in (0, 1)");
  }
  const double deviation = (x0.array() - x0.mean()).matrix().norm();
  const double numerator = std::log(deviation) - std::log(n * epsilon);
  if (!(numerator > 0.0)) throw std::domain_error("already within tolerance");
  const double steps = numerator / -std::log1p(-rate);
  return std::ceil(steps) * pack.sample_period();
}

double te_upper_bound(const PackConfig& pack, const Topology& topology,
                      const ControlPolicy& policy, const Eigen::VectorXd& x0, double epsilon) {
  if (policy.mode() != PolicyMode::Proportional) {
    throw std::invalid_argument("the equalization-time bound applies to proportional control only");
  }
  return te_upper_bound(pack, topology, policy.smallest_gain(), x0, epsilon);
}

std::size_t default_max_steps(const PackConfig& pack, const Topology& topology,
                              const ControlPolicy& policy, const Eigen::VectorXd& x0,
                              double epsilon) {
  constexpr std::size_t fallback = 10'000'000;
  if (policy.mode() != PolicyMode::Proportional) return fallback;
  try {
    const double bound = te_upper_bound(pack, topology, policy, x0, epsilon);
    return std::max<std::size_t>(1, static_cast<std::size_t>(10.0 * bound / pack.sample_period()));
  } catch (const std::exception&) {
    return fallback;
  }
}

}  // namespace eqhs
