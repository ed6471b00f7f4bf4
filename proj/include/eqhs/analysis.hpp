#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "eqhs/dynamics.hpp"
#include "eqhs/hypergraph.hpp"

namespace eqhs {

enum class Verdict { Controllable, Uncontrollable, Switched };

std::string_view to_string(Verdict v);

struct AnalysisReport {
  int rank_C = 0;
  int rank_LDC = 0;
  Verdict verdict = Verdict::Uncontrollable;
  int min_equalizers_needed = 0;  // n - 1
  double lambda2 = 0.0;           // second smallest eigenvalue of CC^T
  std::optional<double> te_bound_seconds;

  /// True for controllable and for switched (balance reachable by relocation).
  bool can_balance() const { return verdict != Verdict::Uncontrollable; }
};

/// Thrown when a simulation is requested on a topology that fails the rank test.
class UncontrollableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rank test rank(L D C) = n - 1 plus lambda2 of CC^T. Switched topologies skip
/// the rank test and report Verdict::Switched; their ranks and lambda2 are those
/// of the relocatable template column.
AnalysisReport controllability(const PackConfig& pack, const Topology& topology);

struct SimulationOptions {
  std::size_t max_steps = 10'000'000;
  /// Record every k-th state (and the final one); 0 records nothing.
  std::size_t record_stride = 0;
  bool record_controls = false;
  /// Simulate even when the rank test fails.
  bool force = false;
  ExternalCurrent external = ExternalCurrent::zero();
};

struct SimRun {
  bool converged = false;
  std::size_t steps = 0;                   // k at termination
  std::optional<double> te_seconds;        // k * T0 when converged
  double final_imbalance = 0.0;
  bool clamped = false;                    // SOC saturation happened at least once
  Eigen::VectorXd final_soc;
  std::vector<SocState> trajectory;        // per record_stride
  std::vector<Eigen::VectorXd> controls;   // u(k) paired with trajectory entries
};

/// Iterates the closed loop until (1/n)||x - mean|| <= epsilon (first crossing)
/// or max_steps is reached. Throws UncontrollableError for rank-deficient
/// fixed topologies unless options.force is set.
SimRun simulate_until_balanced(const PackConfig& pack, const Topology& topology,
                               const ControlPolicy& policy, const Eigen::VectorXd& x0,
                               double epsilon, const SimulationOptions& options = {});

/// Upper bound on the equalization time under proportional control with
/// smallest gain k_s:
///
///   T_e <= T0 * ceil( (log||x0 - mean|| - log(n eps)) / -log(1 - d_s k_s lambda2) )
///
/// with d_s = eta T0 / (3600 max Q_i). The ceiling is the smallest whole
/// number of steps for which the contraction estimate reaches tolerance.
double te_upper_bound(const PackConfig& pack, const Topology& topology, double k_s,
                      const Eigen::VectorXd& x0, double epsilon);

/// Same, taking k_s from a proportional policy. Rejects SignConstant policies.
double te_upper_bound(const PackConfig& pack, const Topology& topology,
                      const ControlPolicy& policy, const Eigen::VectorXd& x0, double epsilon);

/// 10 * bound / T0 when a proportional bound exists, else 10^7.
std::size_t default_max_steps(const PackConfig& pack, const Topology& topology,
                              const ControlPolicy& policy, const Eigen::VectorXd& x0,
                              double epsilon);

}  // namespace eqhs
