#include "eqhs/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "eqhs/linalg.hpp"

namespace eqhs {

namespace {

void check_soc(const Eigen::VectorXd& soc, int n) {
  if (soc.size() != n) {
    throw std::invalid_argument("SOC vector has " + std::to_string(soc.size()) +
                                " entries, pack has " + std::to_string(n) + " cells");
  }
  if (!soc.allFinite()) throw std::invalid_argument("SOC vector contains NaN or infinity");
}

}  // namespace

PackConfig::PackConfig(int n, int m, double capacity_ah, double coulombic_efficiency,
                       double sample_period_s)
    : PackConfig(n, m, std::vector<double>(static_cast<std::size_t>(std::max(n, 0)), capacity_ah),
                 coulombic_efficiency, sample_period_s) {}

PackConfig::PackConfig(int n, int m, std::vector<double> capacities_ah,
                       double coulombic_efficiency, double sample_period_s)
    : n_(n), m_(m), capacities_(std::move(capacities_ah)), eta_(coulombic_efficiency),
      t0_(sample_period_s) {
  if (n_ < 1) throw std::invalid_argument("pack needs at least one cell");
  if (m_ < 1 || n_ % m_ != 0) throw std::invalid_argument("module count must divide n");
  if (static_cast<int>(capacities_.size()) != n_) {
    throw std::invalid_argument("expected " + std::to_string(n_) + " capacities, got " +
                                std::to_string(capacities_.size()));
  }
  for (double q : capacities_) {
    if (!(q > 0.0) || !std::isfinite(q)) {
      throw std::invalid_argument("cell capacities must be positive");
    }
  }
  if (!(eta_ > 0.0 && eta_ <= 1.0)) {
    throw std::invalid_argument("coulombic efficiency must lie in (0, 1]");
  }
  if (!(t0_ > 0.0) || !std::isfinite(t0_)) {
    throw std::invalid_argument("sample period must be positive");
  }
}

Eigen::VectorXd PackConfig::d() const {
  Eigen::VectorXd d(n_);
  for (int i = 0; i < n_; ++i) {
    d[i] = eta_ * t0_ / (3600.0 * capacities_[static_cast<std::size_t>(i)]);
  }
  return d;
}

double PackConfig::d_smallest() const {
  return eta_ * t0_ / (3600.0 * *std::max_element(capacities_.begin(), capacities_.end()));
}

double PackConfig::d_largest() const {
  return eta_ * t0_ / (3600.0 * *std::min_element(capacities_.begin(), capacities_.end()));
}

ControlPolicy::ControlPolicy(PolicyMode mode, std::vector<double> gains)
    : mode_(mode), gains_(std::move(gains)) {
  if (gains_.empty()) throw std::invalid_argument("policy needs one gain per equalizer");
  for (double g : gains_) {
    if (!(g >= 0.0) || !std::isfinite(g)) {
      throw std::invalid_argument("policy gains and current magnitudes must be finite and >= 0");
    }
  }
}

ControlPolicy ControlPolicy::sign_constant(std::vector<double> magnitudes_a) {
  return ControlPolicy(PolicyMode::SignConstant, std::move(magnitudes_a));
}

ControlPolicy ControlPolicy::sign_constant(const Topology& topology) {
  std::vector<double> limits;
  for (const auto& e : topology.edges()) limits.push_back(e.current_limit);
  return sign_constant(std::move(limits));
}

ControlPolicy ControlPolicy::proportional(std::vector<double> gains, const PackConfig& pack,
                                          const Topology& topology) {
  ControlPolicy policy(PolicyMode::Proportional, std::move(gains));
  if (static_cast<int>(policy.gains_.size()) != topology.edge_count()) {
    throw std::invalid_argument("proportional policy needs one gain per equalizer");
  }
  const double lambda_max = largest_eigenvalue(laplacian(structural_incidence(topology)));
  const double k_max = *std::max_element(policy.gains_.begin(), policy.gains_.end());
  const double loop = pack.d_largest() * k_max * lambda_max;
  if (!(loop < 1.0)) {
    throw std::invalid_argument("proportional gains too large: max(D)*max(k)*lambda_max = " +
                                std::to_string(loop) + " (must be < 1)");
  }
  return policy;
}

double ControlPolicy::smallest_gain() const {
  return *std::min_element(gains_.begin(), gains_.end());
}

bool ExternalCurrent::is_zero() const {
  if (table_.empty()) return constant_ == 0.0;
  return std::all_of(table_.begin(), table_.end(), [](double v) { return v == 0.0; });
}

Eigen::MatrixXd active_incidence(const Topology& topology, const Eigen::VectorXd& soc) {
  return topology.switched() ? incidence_switched(topology, soc) : incidence_matrix(topology);
}

double imbalance(const Eigen::VectorXd& soc) {
  if (soc.size() == 0) throw std::invalid_argument("imbalance of an empty SOC vector");
  const double mean = soc.mean();
  return (soc.array() - mean).matrix().norm() / static_cast<double>(soc.size());
}

StepResult step(const PackConfig& pack, const Eigen::VectorXd& soc,
                const Eigen::MatrixXd& incidence, const Eigen::VectorXd& currents,
                double external_current_a) {
  check_soc(soc, pack.n());
  if (incidence.rows() != pack.n() || incidence.cols() != currents.size()) {
    throw std::invalid_argument("step: incidence is " + std::to_string(incidence.rows()) + "x" +
                                std::to_string(incidence.cols()) + ", expected " +
                                std::to_string(pack.n()) + "x" +
                                std::to_string(currents.size()));
  }
  const Eigen::VectorXd d = pack.d();
  const Eigen::VectorXd cell_current =
      (incidence * currents).array() + external_current_a;
  StepResult out;
  out.soc = soc - d.cwiseProduct(cell_current);
  for (Eigen::Index i = 0; i < out.soc.size(); ++i) {
    if (out.soc[i] < 0.0 || out.soc[i] > 1.0) {
      out.soc[i] = std::clamp(out.soc[i], 0.0, 1.0);
      out.clamped = true;
    }
  }
  return out;
}

Eigen::VectorXd control_step(const ControlPolicy& policy, const PackConfig& pack,
                             const Topology& topology, const SocState& state) {
  check_soc(state.soc, topology.n());
  Eigen::VectorXd u;
  ClosedLoop(pack, topology, policy).currents(state.soc, u);
  return u;
}

ClosedLoop::ClosedLoop(const PackConfig& pack, const Topology& topology,
                       const ControlPolicy& policy)
    : n_(topology.n()),
      switched_(topology.switched()),
      mode_(policy.mode()),
      gains_(policy.gains()),
      d_(pack.d()) {
  if (pack.n() != topology.n()) {
    throw std::invalid_argument("pack has " + std::to_string(pack.n()) +
                                " cells but topology has " + std::to_string(topology.n()));
  }
  if (static_cast<int>(gains_.size()) != topology.edge_count()) {
    throw std::invalid_argument("policy has " + std::to_string(gains_.size()) +
                                " gains for " + std::to_string(topology.edge_count()) +
                                " equalizers");
  }
  if (switched_) {
    const auto& tmpl = topology.edges().front();
    switched_head_w_ = tmpl.head_weight.to_double();
    switched_tail_w_ = tmpl.tail_weight.to_double();
    columns_.resize(1);
    return;
  }
  for (const auto& e : topology.edges()) {
    Column col;
    const double wh = e.head_weight.to_double();
    const double wt = e.tail_weight.to_double();
    for (int p : e.head) {
      col.rows.push_back(p - 1);
      col.weights.push_back(wh);
    }
    for (int p : e.tail) {
      col.rows.push_back(p - 1);
      col.weights.push_back(wt);
    }
    for (std::size_t k = 0; k < col.rows.size(); ++k) {
      col.cdc += col.weights[k] * col.weights[k] * d_[col.rows[k]];
    }
    columns_.push_back(std::move(col));
  }
}

int ClosedLoop::head_of(const Eigen::VectorXd& x) const {
  int head = 0;
  for (int i = 1; i < n_; ++i) {
    if (x[i] > x[head]) head = i;
  }
  return head;
}

double ClosedLoop::current_for(std::size_t l, double sigma, double cdc) const {
  if (mode_ == PolicyMode::Proportional) return gains_[l] * sigma;
  if (sigma == 0.0) return 0.0;
  // Largest current that does not carry sigma past zero in one step.
  const double no_overshoot = std::abs(sigma) / cdc;
  const double magnitude = std::min(gains_[l], no_overshoot);
  return sigma > 0.0 ? magnitude : -magnitude;
}

void ClosedLoop::currents(const Eigen::VectorXd& x, Eigen::VectorXd& u) const {
  u.resize(static_cast<Eigen::Index>(columns_.size()));
  if (switched_) {
    const int head = head_of(x);
    double sigma = 0.0;
    double cdc = 0.0;
    for (int r = 0; r < n_; ++r) {
      const double w = r == head ? switched_head_w_ : switched_tail_w_;
      sigma += w * x[r];
      cdc += w * w * d_[r];
    }
    u[0] = current_for(0, sigma, cdc);
    return;
  }
  for (std::size_t l = 0; l < columns_.size(); ++l) {
    const Column& col = columns_[l];
    double sigma = 0.0;
    for (std::size_t k = 0; k < col.rows.size(); ++k) sigma += col.weights[k] * x[col.rows[k]];
    u[static_cast<Eigen::Index>(l)] = current_for(l, sigma, col.cdc);
  }
}

bool ClosedLoop::advance(Eigen::VectorXd& x, double external_current_a,
                         Eigen::VectorXd& u) const {
  if (switched_) {
    const int head = head_of(x);
    currents(x, u);
    const double ul = u[0];
    for (int r = 0; r < n_; ++r) {
      const double w = r == head ? switched_head_w_ : switched_tail_w_;
      x[r] -= d_[r] * (w * ul + external_current_a);
    }
  } else {
    currents(x, u);
    for (std::size_t l = 0; l < columns_.size(); ++l) {
      const Column& col = columns_[l];
      const double ul = u[static_cast<Eigen::Index>(l)];
      if (ul == 0.0) continue;
      for (std::size_t k = 0; k < col.rows.size(); ++k) {
        x[col.rows[k]] -= d_[col.rows[k]] * col.weights[k] * ul;
      }
    }
    if (external_current_a != 0.0) x -= d_ * external_current_a;
  }
  bool clamped = false;
  for (int r = 0; r < n_; ++r) {
    if (x[r] < 0.0 || x[r] > 1.0) {
      x[r] = std::clamp(x[r], 0.0, 1.0);
      clamped = true;
    }
  }
  return clamped;
}

}  // namespace eqhs
