#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "eqhs/hypergraph.hpp"

namespace eqhs {

struct PackSize {
  int n = 0;
  int m = 1;
};

/// A seeded comparison of topologies over random initial SOC vectors.
struct McStudy {
  std::vector<PackSize> pack_sizes;
  std::vector<TopologyKind> topologies;
  int samples = 1000;
  std::uint64_t seed = 0;
  double soc_low = 0.4;
  double soc_high = 0.8;
  double current_a = 0.5;
  double epsilon = 0.001;
  double sample_period_s = 1.0;
  double capacity_ah = 3.1;
  int bins = 30;
  /// Step cap for fixed topologies and for the switched one.
  std::size_t max_steps = 10'000'000;
  std::size_t max_steps_switched = 2'000'000;

  /// Throws std::invalid_argument on any invalid field or combination.
  void validate() const;
};

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [min, max]; the last bin is closed on the right.
Histogram histogram(const std::vector<double>& samples, int bins);

struct McCell {
  TopologyKind topology = TopologyKind::SeriesCC;
  PackSize size;
  double lambda2 = 0.0;
  double mean_te_s = 0.0;  // NaN when nothing converged
  double std_te_s = 0.0;   // sample standard deviation
  std::size_t converged = 0;
  std::size_t samples = 0;
  Histogram hist;
  std::vector<double> te_samples;  // converged samples in sample-index order
};

struct McReport {
  std::vector<McCell> cells;  // pack-size major, topology minor, in study order
};

/// Initial SOC vector for one sample. Each draw has its own counter-based
/// stream keyed by (seed, topology, n, sample index), so results do not
/// depend on evaluation order.
std::vector<double> draw_initial_soc(const McStudy& study, TopologyKind topology, int n,
                                     std::size_t sample_index);

/// Runs the study. workers = 0 picks the hardware concurrency. The report is
/// bit-identical for any worker count.
McReport run_study(const McStudy& study, unsigned workers = 0);

/// Topologies of one pack size ordered by ascending mean equalization time.
std::vector<TopologyKind> rank_by_mean_te(const McReport& report, PackSize size);

}  // namespace eqhs
