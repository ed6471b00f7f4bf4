#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "eqhs/analysis.hpp"
#include "eqhs/dynamics.hpp"
#include "eqhs/linalg.hpp"
#include "support.hpp"

using namespace eqhs;
using eqhs::test::vec;

namespace {

constexpr double kStep = 0.5 / (3600.0 * 3.1);  // 0.5 A for 1 s into 3.1 Ah

double sgn(double v) { return (v > 0) - (v < 0); }

double mean_of(const Eigen::VectorXd& x, const std::vector<int>& one_based) {
  double s = 0.0;
  for (int i : one_based) s += x[i - 1];
  return s / static_cast<double>(one_based.size());
}

}  // namespace

TEST_CASE("pack configuration") {
  const PackConfig pack(4, 1, std::vector<double>{3.1, 3.1, 6.2, 3.1}, 1.0, 2.0);
  CHECK(pack.d()[2] == doctest::Approx(2.0 / (3600.0 * 6.2)));
  CHECK(pack.d_smallest() == doctest::Approx(2.0 / (3600.0 * 6.2)));
  CHECK(pack.d_largest() == doctest::Approx(2.0 / (3600.0 * 3.1)));
  CHECK_THROWS(PackConfig(4, 1, -1.0));
  CHECK_THROWS(PackConfig(4, 1, 3.1, 1.5));
  CHECK_THROWS(PackConfig(4, 3, 3.1));
  CHECK_THROWS(PackConfig(4, 1, std::vector<double>{3.1, 3.1}));
}

TEST_CASE("single step arithmetic") {
  const PackConfig pack(2, 1, 3.1);
  Eigen::MatrixXd c(2, 1);
  c << 1, -1;
  const Eigen::VectorXd x = vec({0.6, 0.4});

  SUBCASE("no current leaves x unchanged") {
    const auto r = step(pack, x, c, vec({0.0}), 0.0);
    CHECK(r.soc == x);
    CHECK_FALSE(r.clamped);
  }
  SUBCASE("CC equalizer at 0.5 A") {
    const auto r = step(pack, x, c, vec({0.5}), 0.0);
    CHECK(std::abs(kStep - 4.4803e-5) < 5e-10);
    CHECK(r.soc[0] == doctest::Approx(0.6 - kStep).epsilon(1e-14));
    CHECK(r.soc[1] == doctest::Approx(0.4 + kStep).epsilon(1e-14));
  }
  SUBCASE("external discharge lowers every cell") {
    const auto r = step(pack, x, c, vec({0.0}), 0.5);
    CHECK(r.soc[0] == doctest::Approx(0.6 - kStep).epsilon(1e-14));
    CHECK(r.soc[1] == doctest::Approx(0.4 - kStep).epsilon(1e-14));
  }
  SUBCASE("saturation is flagged") {
    const auto r = step(pack, vec({1e-6, 0.5}), c, vec({0.0}), 1.0);
    CHECK(r.soc[0] == 0.0);
    CHECK(r.clamped);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS(step(pack, x, c, vec({0.5, 0.5}), 0.0));
    CHECK_THROWS(step(pack, vec({0.5}), c, vec({0.5}), 0.0));
  }
}

TEST_CASE("control examples") {
  SUBCASE("sign-constant CC") {
    const PackConfig pack(2, 1, 3.1);
    const Topology t(2, {make_edge(EdgeKind::CC, {1}, {2}, 0.5)});
    const auto policy = ControlPolicy::sign_constant(t);
    CHECK(control_step(policy, pack, t, {0, vec({0.6, 0.4})})[0] == 0.5);
    CHECK(control_step(policy, pack, t, {0, vec({0.4, 0.6})})[0] == -0.5);
    CHECK(control_step(policy, pack, t, {0, vec({0.5, 0.5})})[0] == 0.0);
  }
  SUBCASE("proportional CPC") {
    const PackConfig pack(4, 1, 3.1);
    const Topology t(4, {make_edge(EdgeKind::CPC, {1}, {2, 3, 4}, 0.5)});
    const auto policy = ControlPolicy::proportional({1.0}, pack, t);
    const double u = control_step(policy, pack, t, {0, vec({0.7, 0.5, 0.5, 0.5})})[0];
    CHECK(u == doctest::Approx(0.15).epsilon(1e-14));
  }
  SUBCASE("switched topology idles when balanced") {
    const PackConfig pack(3, 1, 3.1);
    const auto t = make_topology(TopologyKind::SwitchCPC, 3, 1, 0.5);
    const auto policy = ControlPolicy::sign_constant(t);
    CHECK(control_step(policy, pack, t, {0, vec({0.5, 0.5, 0.5})})[0] == 0.0);
    CHECK(control_step(policy, pack, t, {0, vec({0.5, 0.7, 0.6})})[0] == 0.5);
  }
  SUBCASE("anti-chatter cap near balance") {
    const PackConfig pack(2, 1, 3.1);
    const Topology t(2, {make_edge(EdgeKind::CC, {1}, {2}, 0.5)});
    const auto policy = ControlPolicy::sign_constant(t);
    // sigma = 2e-5 is less than one full-current transfer of 2 * kStep.
    const double u = control_step(policy, pack, t, {0, vec({0.50001, 0.49999})})[0];
    CHECK(u == doctest::Approx(2e-5 / (2.0 * pack.d()[0])).epsilon(1e-9));
    const auto next = step(pack, vec({0.50001, 0.49999}), incidence_matrix(t), vec({u}), 0.0);
    CHECK(std::abs(next.soc[0] - next.soc[1]) <= 1e-15);
  }
}

TEST_CASE("unstable proportional gains are rejected") {
  const PackConfig pack(8, 1, 3.1);
  const auto t = make_topology(TopologyKind::SeriesCC, 8, 1, 0.5);
  const double lmax = largest_eigenvalue(laplacian(incidence_matrix(t)));
  const double limit = 1.0 / (pack.d_largest() * lmax);
  CHECK_NOTHROW(ControlPolicy::proportional(std::vector<double>(7, 0.99 * limit), pack, t));
  CHECK_THROWS(ControlPolicy::proportional(std::vector<double>(7, 1.01 * limit), pack, t));
  CHECK_THROWS(ControlPolicy::proportional(std::vector<double>(6, 1.0), pack, t));
  CHECK_THROWS(ControlPolicy::proportional(std::vector<double>(7, -1.0), pack, t));
}

TEST_CASE("imbalance examples") {
  CHECK(imbalance(vec({0.5, 0.5, 0.5})) == 0.0);
  CHECK(imbalance(vec({0.6, 0.4})) == doctest::Approx(0.5 * std::sqrt(0.02)));
  CHECK(std::abs(imbalance(vec({0.6, 0.4})) - 0.0707) < 5e-5);
  // Deviations from the mean 0.5375 are [0.0825, -0.0575, 0.0925, -0.1175].
  const double dev = std::sqrt(0.0825 * 0.0825 + 0.0575 * 0.0575 + 0.0925 * 0.0925 +
                               0.1175 * 0.1175);
  CHECK(imbalance(vec({0.62, 0.48, 0.63, 0.42})) == doctest::Approx(dev / 4.0).epsilon(1e-12));
  CHECK(std::abs(imbalance(vec({0.62, 0.48, 0.63, 0.42})) - 0.045052) < 1e-6);
}

TEST_CASE("sigma has the sign of the physical balancing argument") {
  std::mt19937_64 rng(5);
  const int n = 8;
  const auto cc = make_edge(EdgeKind::CC, {3}, {4}, 0.5);
  const auto mm = make_edge(EdgeKind::MM, {1, 2, 3, 4}, {5, 6, 7, 8}, 0.5);
  const auto cpc = make_edge(EdgeKind::CPC, {2}, {1, 3, 4, 5, 6, 7, 8}, 0.5);
  const auto cmc = make_edge(EdgeKind::CMC, {6}, {5, 7, 8}, 0.5);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::VectorXd x = eqhs::test::uniform_soc(rng, n, 0.0, 1.0);
    const double s_cc = incidence_vector(cc, n).dot(x);
    CHECK(sgn(s_cc) == sgn(x[2] - x[3]));
    CHECK(std::abs(s_cc - (x[2] - x[3])) <= 1e-15);

    const double s_mm = incidence_vector(mm, n).dot(x);
    const double dm = mean_of(x, {1, 2, 3, 4}) - mean_of(x, {5, 6, 7, 8});
    CHECK(sgn(s_mm) == sgn(dm));
    CHECK(std::abs(s_mm - 4.0 * dm) <= 1e-14);

    const double s_cpc = incidence_vector(cpc, n).dot(x);
    CHECK(sgn(s_cpc) == sgn(x[1] - x.mean()));

    const double s_cmc = incidence_vector(cmc, n).dot(x);
    CHECK(sgn(s_cmc) == sgn(x[5] - mean_of(x, {5, 6, 7, 8})));
  }
}

TEST_CASE("closed loop matches the dense step formula") {
  std::mt19937_64 rng(11);
  const TopologyKind kinds[] = {TopologyKind::SeriesCC, TopologyKind::ModuleCC,
                                TopologyKind::LayerCC,  TopologyKind::CPC,
                                TopologyKind::ModuleCPC, TopologyKind::SwitchCPC};
  for (auto kind : kinds) {
    const auto t = make_topology(kind, 8, 2, 0.5);
    const PackConfig pack(8, 2, std::vector<double>{3.1, 2.9, 3.3, 3.0, 3.1, 3.2, 2.8, 3.1});
    const auto policy = ControlPolicy::sign_constant(t);
    const ClosedLoop loop(pack, t, policy);
    Eigen::VectorXd x = eqhs::test::uniform_soc(rng, 8);
    Eigen::VectorXd u;
    for (int k = 0; k < 200; ++k) {
      const Eigen::VectorXd uk = control_step(policy, pack, t, {0, x});
      const auto dense = step(pack, x, active_incidence(t, x), uk, 0.1);
      loop.advance(x, 0.1, u);
      CHECK(u == uk);
      CHECK((x - dense.soc).cwiseAbs().maxCoeff() <= 1e-15);
    }
  }
}

TEST_CASE("charge conservation") {
  std::mt19937_64 rng(3);
  const TopologyKind kinds[] = {TopologyKind::SeriesCC, TopologyKind::ModuleCC,
                                TopologyKind::LayerCC,  TopologyKind::CPC,
                                TopologyKind::ModuleCPC, TopologyKind::SwitchCPC};
  for (auto kind : kinds) {
    const auto t = make_topology(kind, 8, 2, 0.5);
    {  // equal capacities keep the mean
      const PackConfig pack(8, 2, 3.1);
      const ClosedLoop loop(pack, t, ControlPolicy::sign_constant(t));
      Eigen::VectorXd x = eqhs::test::uniform_soc(rng, 8);
      const double mean0 = x.mean();
      Eigen::VectorXd u;
      for (int k = 0; k < 5000; ++k) {
        const double before = x.mean();
        loop.advance(x, 0.0, u);
        CHECK(std::abs(x.mean() - before) <= 1e-12);
      }
      CHECK(std::abs(x.mean() - mean0) <= 1e-9);
    }
    {  // unequal capacities keep total charge
      std::vector<double> q{3.1, 2.5, 3.6, 3.0, 2.8, 3.3, 2.9, 3.4};
      const PackConfig pack(8, 2, q);
      const ClosedLoop loop(pack, t, ControlPolicy::sign_constant(t));
      const Eigen::VectorXd qv = Eigen::Map<const Eigen::VectorXd>(q.data(), 8);
      Eigen::VectorXd x = eqhs::test::uniform_soc(rng, 8);
      const double charge0 = qv.dot(x);
      Eigen::VectorXd u;
      for (int k = 0; k < 5000; ++k) loop.advance(x, 0.0, u);
      CHECK(std::abs(qv.dot(x) - charge0) / charge0 <= 1e-9);
    }
  }
}

TEST_CASE("proportional closed loop is monotone and fixes the ones vector") {
  std::mt19937_64 rng(17);
  const TopologyKind kinds[] = {TopologyKind::SeriesCC, TopologyKind::ModuleCC,
                                TopologyKind::LayerCC, TopologyKind::CPC,
                                TopologyKind::ModuleCPC};
  for (auto kind : kinds) {
    const auto t = make_topology(kind, 8, 2, 0.5);
    const PackConfig pack(8, 2, 3.1);
    const Eigen::MatrixXd c = incidence_matrix(t);
    const double lmax = largest_eigenvalue(laplacian(c));
    const double gain = 0.8 / (pack.d_largest() * lmax);
    const auto policy =
        ControlPolicy::proportional(std::vector<double>(static_cast<std::size_t>(c.cols()), gain),
                                    pack, t);
    const Eigen::MatrixXd a =
        Eigen::MatrixXd::Identity(8, 8) - pack.d().asDiagonal() * c * gain * c.transpose();
    CHECK((a * Eigen::VectorXd::Ones(8) - Eigen::VectorXd::Ones(8)).cwiseAbs().maxCoeff() <=
          1e-15);

    const ClosedLoop loop(pack, t, policy);
    Eigen::VectorXd x = eqhs::test::uniform_soc(rng, 8);
    Eigen::VectorXd u;
    double prev = imbalance(x);
    for (int k = 0; k < 2000; ++k) {
      loop.advance(x, 0.0, u);
      const double now = imbalance(x);
      CHECK(now <= prev * (1.0 + 1e-12) + 1e-15);  // rounding floor
      prev = now;
    }
  }
}

TEST_CASE("sign-constant imbalance never re-crosses the tolerance") {
  std::mt19937_64 rng(23);
  const TopologyKind kinds[] = {TopologyKind::SeriesCC, TopologyKind::ModuleCC,
                                TopologyKind::LayerCC,  TopologyKind::CPC,
                                TopologyKind::ModuleCPC, TopologyKind::SwitchCPC};
  const double eps = 1e-3;
  for (auto kind : kinds) {
    const auto t = make_topology(kind, 8, 2, 0.5);
    const PackConfig pack(8, 2, 3.1);
    const ClosedLoop loop(pack, t, ControlPolicy::sign_constant(t));
    for (int trial = 0; trial < 3; ++trial) {
      Eigen::VectorXd x = eqhs::test::uniform_soc(rng, 8);
      Eigen::VectorXd u;
      bool reached = false;
      bool recrossed = false;
      const int steps = t.switched() ? 300000 : 60000;
      for (int k = 0; k < steps; ++k) {
        loop.advance(x, 0.0, u);
        const double now = imbalance(x);
        if (now <= eps) reached = true;
        else if (reached) recrossed = true;
      }
      CAPTURE(to_string(kind));
      CHECK(reached);
      CHECK_FALSE(recrossed);
    }
  }
}

TEST_CASE("external current profiles") {
  CHECK(ExternalCurrent::zero().is_zero());
  CHECK(ExternalCurrent::constant(0.3).at(1000) == 0.3);
  const auto table = ExternalCurrent::table({0.1, 0.2});
  CHECK(table.at(1) == 0.2);
  CHECK(table.at(2) == 0.0);
  CHECK_FALSE(table.is_zero());
}
