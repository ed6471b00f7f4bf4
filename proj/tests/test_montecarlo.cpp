#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "eqhs/linalg.hpp"
#include "eqhs/montecarlo.hpp"

using namespace eqhs;

namespace {

McStudy small_study() {
  McStudy s;
  s.pack_sizes = {{8, 2}};
  s.topologies = {TopologyKind::SeriesCC, TopologyKind::ModuleCC, TopologyKind::LayerCC,
                  TopologyKind::CPC, TopologyKind::ModuleCPC};
  s.samples = 40;
  s.seed = 12345;
  s.epsilon = 0.002;
  s.bins = 10;
  return s;
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

double spearman_sign(const std::vector<double>& a, const std::vector<double>& b) {
  // +1 when the two lists are ordered identically, otherwise anything less.
  int agree = 0;
  int pairs = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      ++pairs;
      agree += (a[i] < a[j]) == (b[i] < b[j]);
    }
  }
  return static_cast<double>(agree) / pairs;
}

}  // namespace

TEST_CASE("histogram examples") {
  const auto one = histogram({1, 1, 1}, 1);
  CHECK(one.counts == std::vector<std::size_t>{3});
  const auto two = histogram({0, 10}, 2);
  CHECK(two.edges == std::vector<double>{0, 5, 10});
  CHECK(two.counts == std::vector<std::size_t>{1, 1});
  const auto flat = histogram({4, 4, 4}, 5);
  CHECK(flat.counts[0] == 3);
  CHECK_THROWS(histogram({}, 3));
  CHECK_THROWS(histogram({1.0}, 0));

  std::vector<double> many;
  for (int i = 0; i < 1000; ++i) many.push_back(std::sin(i) * 100.0);
  std::size_t total = 0;
  for (auto c : histogram(many, 30).counts) total += c;
  CHECK(total == many.size());
}

TEST_CASE("study validation") {
  McStudy s = small_study();
  CHECK_NOTHROW(s.validate());
  s.soc_low = 0.9;
  CHECK_THROWS(s.validate());
  s = small_study();
  s.pack_sizes = {{6, 2}};
  s.topologies = {TopologyKind::LayerCC};
  CHECK_THROWS_WITH(s.validate(), doctest::Contains("power-of-2"));
  s = small_study();
  s.samples = 0;
  CHECK_THROWS(s.validate());
}

TEST_CASE("initial draws depend only on their key") {
  const McStudy s = small_study();
  const auto a = draw_initial_soc(s, TopologyKind::CPC, 8, 3);
  CHECK(a == draw_initial_soc(s, TopologyKind::CPC, 8, 3));
  CHECK(a != draw_initial_soc(s, TopologyKind::CPC, 8, 4));
  CHECK(a != draw_initial_soc(s, TopologyKind::SeriesCC, 8, 3));
  for (double v : a) {
    CHECK(v >= s.soc_low);
    CHECK(v < s.soc_high);
  }
}

TEST_CASE("reports are bit-identical across worker counts") {
  const McStudy s = small_study();
  const auto one = run_study(s, 1);
  for (unsigned workers : {2u, 4u, 8u}) {
    const auto other = run_study(s, workers);
    REQUIRE(other.cells.size() == one.cells.size());
    for (std::size_t c = 0; c < one.cells.size(); ++c) {
      CHECK(bit_equal(one.cells[c].mean_te_s, other.cells[c].mean_te_s));
      CHECK(bit_equal(one.cells[c].std_te_s, other.cells[c].std_te_s));
      CHECK(one.cells[c].te_samples == other.cells[c].te_samples);
      CHECK(one.cells[c].hist.counts == other.cells[c].hist.counts);
    }
  }
}

TEST_CASE("degenerate bounds give zero equalization time") {
  McStudy s = small_study();
  s.samples = 1;
  s.soc_low = s.soc_high = 0.6;
  s.topologies = {TopologyKind::SeriesCC, TopologyKind::SwitchCPC};
  const auto report = run_study(s, 1);
  for (const auto& cell : report.cells) {
    CHECK(cell.converged == 1);
    CHECK(cell.mean_te_s == 0.0);
  }
}

TEST_CASE("report lambda2 equals the linalg value") {
  const McStudy s = small_study();
  const auto report = run_study(s, 1);
  for (const auto& cell : report.cells) {
    const auto t = make_topology(cell.topology, cell.size.n, cell.size.m, s.current_a);
    CHECK(cell.lambda2 == second_smallest_eigenvalue(laplacian(structural_incidence(t))));
    CHECK(cell.samples == static_cast<std::size_t>(s.samples));
    CHECK(cell.converged == cell.samples);
  }
}

TEST_CASE("doubling the sample count moves the mean by less than three standard errors") {
  McStudy s = small_study();
  s.topologies = {TopologyKind::CPC, TopologyKind::SeriesCC};
  s.samples = 60;
  const auto base = run_study(s, 0);
  s.samples = 120;
  const auto doubled = run_study(s, 0);
  for (std::size_t c = 0; c < base.cells.size(); ++c) {
    const double se = base.cells[c].std_te_s / std::sqrt(60.0);
    CHECK(std::abs(doubled.cells[c].mean_te_s - base.cells[c].mean_te_s) < 3.0 * se);
  }
}

TEST_CASE("mean time decreases with algebraic connectivity") {
  McStudy s = small_study();
  s.samples = 300;  // 40 samples cannot separate cpc from module-cc
  const auto report = run_study(s, 0);
  std::vector<double> inv_lambda;
  std::vector<double> mean;
  for (const auto& cell : report.cells) {
    inv_lambda.push_back(1.0 / cell.lambda2);
    mean.push_back(cell.mean_te_s);
  }
  // CPC and module-CPC share lambda2 = 1; their tie is unordered.
  const auto ranking = rank_by_mean_te(report, {8, 2});
  CHECK(ranking.front() == TopologyKind::LayerCC);
  CHECK(ranking.back() == TopologyKind::SeriesCC);
  CHECK(spearman_sign(inv_lambda, mean) >= 0.9);
}

TEST_CASE("switched cells hitting the step cap are reported as not converged") {
  McStudy s = small_study();
  s.samples = 5;
  s.topologies = {TopologyKind::SwitchCPC};
  s.max_steps_switched = 10;
  const auto report = run_study(s, 1);
  CHECK(report.cells[0].converged == 0);
  CHECK(std::isnan(report.cells[0].mean_te_s));
}

TEST_CASE("more modules shorten module CC equalization at n=64") {
  McStudy s;
  s.pack_sizes = {{64, 2}, {64, 4}, {64, 8}};
  s.topologies = {TopologyKind::ModuleCC};
  s.samples = 60;
  s.seed = 99;
  const auto report = run_study(s, 0);
  REQUIRE(report.cells.size() == 3);
  CHECK(report.cells[0].mean_te_s > report.cells[1].mean_te_s);
  CHECK(report.cells[1].mean_te_s > report.cells[2].mean_te_s);
  CHECK(report.cells[0].lambda2 < report.cells[1].lambda2);
}
