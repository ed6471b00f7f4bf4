#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "eqhs/hypergraph.hpp"

namespace eqhs {

/// Cell capacities and sampling settings of a series pack.
class PackConfig {
 public:
  /// Equal capacities.
  PackConfig(int n, int m, double capacity_ah, double coulombic_efficiency = 1.0,
             double sample_period_s = 1.0);
  PackConfig(int n, int m, std::vector<double> capacities_ah,
             double coulombic_efficiency = 1.0, double sample_period_s = 1.0);

  int n() const { return n_; }
  int modules() const { return m_; }
  const std::vector<double>& capacities() const { return capacities_; }
  double coulombic_efficiency() const { return eta_; }
  double sample_period() const { return t0_; }

  /// Diagonal of D: eta * T0 / (3600 * Q_i).
  Eigen::VectorXd d() const;
  /// eta * T0 / (3600 * max Q_i), the smallest diagonal entry of D.
  double d_smallest() const;
  double d_largest() const;

 private:
  int n_;
  int m_;
  std::vector<double> capacities_;
  double eta_;
  double t0_;
};

struct SocState {
  std::size_t step = 0;
  Eigen::VectorXd soc;
};

enum class PolicyMode { SignConstant, Proportional };

/// Balancing control law producing the equalizer currents u(k).
///
/// SignConstant drives each equalizer at its magnitude limit in the direction
/// of sgn(c_l^T x), capped near balance so a single equalizer never pushes the
/// quantity it measures past zero within one step. Proportional applies
/// u_l = k_l * c_l^T x.
class ControlPolicy {
 public:
  static ControlPolicy sign_constant(std::vector<double> magnitudes_a);
  /// Uses each equalizer's own current limit.
  static ControlPolicy sign_constant(const Topology& topology);
  /// Throws if the closed loop is not guaranteed contractive, i.e. unless
  /// max(D) * max(k) * lambda_max(CC^T) < 1.
  static ControlPolicy proportional(std::vector<double> gains, const PackConfig& pack,
                                    const Topology& topology);

  PolicyMode mode() const { return mode_; }
  const std::vector<double>& gains() const { return gains_; }
  double smallest_gain() const;

 private:
  ControlPolicy(PolicyMode mode, std::vector<double> gains);

  PolicyMode mode_;
  std::vector<double> gains_;
};

/// Incidence in force at the given state: the fixed C, or for switched
/// topologies the column relocated to the highest-SOC cell.
Eigen::MatrixXd active_incidence(const Topology& topology, const Eigen::VectorXd& soc);

/// Equalizer currents u(k) in amperes, one per column of the active incidence.
Eigen::VectorXd control_step(const ControlPolicy& policy, const PackConfig& pack,
                             const Topology& topology, const SocState& state);

struct StepResult {
  Eigen::VectorXd soc;
  bool clamped = false;  // some entry left [0, 1] and was saturated
};

/// x(k+1) = x(k) - D C u - D 1 I_s.
StepResult step(const PackConfig& pack, const Eigen::VectorXd& soc,
                const Eigen::MatrixXd& incidence, const Eigen::VectorXd& currents,
                double external_current_a);

/// (1/n) * ||x - mean(x)||_2.
double imbalance(const Eigen::VectorXd& soc);

/// A pack, topology and policy compiled into sparse columns for repeated
/// stepping. Holds no mutable state; one instance may serve many runs.
class ClosedLoop {
 public:
  ClosedLoop(const PackConfig& pack, const Topology& topology, const ControlPolicy& policy);

  int n() const { return n_; }
  int edge_count() const { return static_cast<int>(columns_.size()); }

  /// u(k) for state x; `u` is resized to edge_count().
  void currents(const Eigen::VectorXd& x, Eigen::VectorXd& u) const;

  /// In-place x <- x - D C u(x) - D 1 I_s, saturating at [0, 1]. Returns
  /// true when saturation occurred. `u` receives u(k).
  bool advance(Eigen::VectorXd& x, double external_current_a, Eigen::VectorXd& u) const;

 private:
  struct Column {
    std::vector<int> rows;
    std::vector<double> weights;
    double cdc = 0.0;  // c^T D c
  };

  int head_of(const Eigen::VectorXd& x) const;
  double current_for(std::size_t l, double sigma, double cdc) const;

  int n_;
  bool switched_;
  PolicyMode mode_;
  std::vector<double> gains_;
  Eigen::VectorXd d_;
  std::vector<Column> columns_;
  double switched_head_w_ = 0.0;
  double switched_tail_w_ = 0.0;
};

/// Pack current I_s(k) seen by every cell. Tabulated profiles are zero past
/// their last entry.
class ExternalCurrent {
 public:
  static ExternalCurrent zero() { return ExternalCurrent({}, 0.0); }
  static ExternalCurrent constant(double amps) { return ExternalCurrent({}, amps); }
  static ExternalCurrent table(std::vector<double> per_step) {
    return ExternalCurrent(std::move(per_step), 0.0);
  }

  double at(std::size_t k) const {
    if (table_.empty()) return constant_;
    return k < table_.size() ? table_[k] : 0.0;
  }
  bool is_zero() const;

 private:
  ExternalCurrent(std::vector<double> table, double constant)
      : table_(std::move(table)), constant_(constant) {}

  std::vector<double> table_;
  double constant_;
};

}  // namespace eqhs
