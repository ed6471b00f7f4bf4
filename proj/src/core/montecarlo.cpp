#include "eqhs/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>

#include "eqhs/analysis.hpp"
#include "eqhs/dynamics.hpp"
#include "eqhs/linalg.hpp"

namespace eqhs {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// SplitMix64 stream.
class SampleStream {
 public:
  explicit SampleStream(std::uint64_t key) : state_(key) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

std::uint64_t stream_key(std::uint64_t seed, TopologyKind topology, int n, std::size_t sample) {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  h = mix64(h ^ (static_cast<std::uint64_t>(topology) + 1));
  h = mix64(h ^ static_cast<std::uint64_t>(n));
  return mix64(h ^ static_cast<std::uint64_t>(sample));
}

}  // namespace

void McStudy::validate() const {
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  if (!(soc_low >= 0.0 && soc_low <= soc_high && soc_high <= 1.0)) {
    throw std::invalid_argument("SOC bounds must satisfy 0 <= soc_low <= soc_high <= 1");
  }
  if (!(current_a >= 0.0)) throw std::invalid_argument("current must be >= 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(sample_period_s > 0.0)) throw std::invalid_argument("sample period must be positive");
  if (!(capacity_ah > 0.0)) throw std::invalid_argument("capacity must be positive");
  if (bins < 1) throw std::invalid_argument("bins must be >= 1");
  if (pack_sizes.empty() || topologies.empty()) {
    throw std::invalid_argument("study needs at least one pack size and one topology");
  }
  for (const auto& size : pack_sizes) {
    for (auto kind : topologies) {
      try {
        canonical_edge_count(kind, size.n, size.m);
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string(to_string(kind)) + " at n=" +
                                    std::to_string(size.n) + ", m=" + std::to_string(size.m) +
                                    ": " + e.what());
      }
    }
  }
}

Histogram histogram(const std::vector<double>& samples, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
  if (samples.empty()) throw std::invalid_argument("histogram of an empty sample list");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double width = (hi - lo) / bins;

  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.edges[static_cast<std::size_t>(i)] = lo + width * i;
  h.edges.back() = hi;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : samples) {
    std::size_t idx = 0;
    if (width > 0.0) {
      idx = static_cast<std::size_t>(std::floor((v - lo) / width));
      idx = std::min(idx, static_cast<std::size_t>(bins - 1));
    }
    ++h.counts[idx];
  }
  return h;
}

std::vector<double> draw_initial_soc(const McStudy& study, TopologyKind topology, int n,
                                     std::size_t sample_index) {
  SampleStream stream(stream_key(study.seed, topology, n, sample_index));
  std::vector<double> x(static_cast<std::size_t>(n));
  const double span = study.soc_high - study.soc_low;
  for (auto& v : x) v = study.soc_low + span * stream.uniform();
  return x;
}

McReport run_study(const McStudy& study, unsigned workers) {
  study.validate();
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());

  struct Job {
    std::size_t cell;
    std::size_t sample;
  };
  struct CellSetup {
    Topology topology;
    PackConfig pack;
    ControlPolicy policy;
    std::size_t max_steps;
  };

  McReport report;
  std::vector<CellSetup> setups;
  for (const auto& size : study.pack_sizes) {
    for (auto kind : study.topologies) {
      Topology topo = make_topology(kind, size.n, size.m, study.current_a);
      PackConfig pack(size.n, size.m, study.capacity_ah, 1.0, study.sample_period_s);
      McCell cell;
      cell.topology = kind;
      cell.size = size;
      cell.samples = static_cast<std::size_t>(study.samples);
      cell.lambda2 = second_smallest_eigenvalue(laplacian(structural_incidence(topo)));
      report.cells.push_back(std::move(cell));
      const std::size_t cap = topo.switched() ? study.max_steps_switched : study.max_steps;
      auto policy = ControlPolicy::sign_constant(topo);
      setups.push_back({std::move(topo), pack, std::move(policy), cap});
    }
  }

  const std::size_t per_cell = static_cast<std::size_t>(study.samples);
  const std::size_t total = setups.size() * per_cell;
  // NaN marks a sample that hit the step cap.
  std::vector<double> te(total, std::numeric_limits<double>::quiet_NaN());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t job = next.fetch_add(1);
      if (job >= total) return;
      const std::size_t c = job / per_cell;
      const std::size_t s = job % per_cell;
      const auto& setup = setups[c];
      const auto& cell = report.cells[c];
      const auto draw = draw_initial_soc(study, cell.topology, cell.size.n, s);
      const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(draw.data(), cell.size.n);
      SimulationOptions opts;
      opts.max_steps = setup.max_steps;
      opts.force = true;  // every canonical topology is controllable or switched
      const auto run =
          simulate_until_balanced(setup.pack, setup.topology, setup.policy, x0, study.epsilon, opts);
      if (run.converged) te[job] = *run.te_seconds;
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  // Aggregate in sample-index order so the sums never depend on scheduling.
  for (std::size_t c = 0; c < report.cells.size(); ++c) {
    auto& cell = report.cells[c];
    for (std::size_t s = 0; s < per_cell; ++s) {
      const double v = te[c * per_cell + s];
      if (!std::isnan(v)) cell.te_samples.push_back(v);
    }
    cell.converged = cell.te_samples.size();
    if (cell.converged == 0) {
      cell.mean_te_s = std::numeric_limits<double>::quiet_NaN();
      cell.std_te_s = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double sum = 0.0;
    for (double v : cell.te_samples) sum += v;
    cell.mean_te_s = sum / static_cast<double>(cell.converged);
    double ss = 0.0;
    for (double v : cell.te_samples) ss += (v - cell.mean_te_s) * (v - cell.mean_te_s);
    cell.std_te_s =
        cell.converged > 1 ? std::sqrt(ss / static_cast<double>(cell.converged - 1)) : 0.0;
    cell.hist = histogram(cell.te_samples, study.bins);
  }
  return report;
}

std::vector<TopologyKind> rank_by_mean_te(const McReport& report, PackSize size) {
  std::vector<const McCell*> cells;
  for (const auto& c : report.cells) {
    if (c.size.n == size.n && c.size.m == size.m) cells.push_back(&c);
  }
  // Cells with no converged sample sort last.
  std::stable_sort(cells.begin(), cells.end(), [](const McCell* a, const McCell* b) {
    const double ma = std::isnan(a->mean_te_s) ? std::numeric_limits<double>::infinity() : a->mean_te_s;
    const double mb = std::isnan(b->mean_te_s) ? std::numeric_limits<double>::infinity() : b->mean_te_s;
    return ma < mb;
  });
  std::vector<TopologyKind> out;
  for (const auto* c : cells) out.push_back(c->topology);
  return out;
}

}  // namespace eqhs
