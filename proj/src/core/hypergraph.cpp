#include "eqhs/hypergraph.hpp"

#include <algorithm>
#include <iterator>
#include <array>
#include <charconv>
#include <stdexcept>
#include <utility>

namespace eqhs {

namespace {

constexpr std::array<std::pair<EdgeKind, std::string_view>, 4> kEdgeNames{{
    {EdgeKind::CC, "CC"},
    {EdgeKind::MM, "MM"},
    {EdgeKind::CPC, "CPC"},
    {EdgeKind::CMC, "CMC"},
}};

constexpr std::array<std::pair<TopologyKind, std::string_view>, 6> kTopologyNames{{
    {TopologyKind::SeriesCC, "series-cc"},
    {TopologyKind::ModuleCC, "module-cc"},
    {TopologyKind::LayerCC, "layer-cc"},
    {TopologyKind::CPC, "cpc"},
    {TopologyKind::ModuleCPC, "module-cpc"},
    {TopologyKind::SwitchCPC, "switch-cpc"},
}};

std::vector<int> range_inclusive(int first, int last) {
  std::vector<int> out;
  for (int i = first; i <= last; ++i) out.push_back(i);
  return out;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

int block_size(TopologyKind kind, int n, int m) {
  if (m < 1) throw std::invalid_argument("module count must be at least 1");
  if (n % m != 0) {
    throw std::invalid_argument("module count m=" + std::to_string(m) +
                                " does not divide n=" + std::to_string(n));
  }
  const int b = n / m;
  if (kind == TopologyKind::ModuleCPC && b < 2) {
    throw std::invalid_argument("module-based CPC needs at least 2 cells per module");
  }
  return b;
}

void check_common(TopologyKind kind, int n, int m) {
  if (n < 2) throw std::invalid_argument("a pack needs at least 2 cells");
  if (kind == TopologyKind::LayerCC && !is_power_of_two(n)) {
    throw std::invalid_argument("layer-based requires power-of-2 n (got n=" +
                                std::to_string(n) + ")");
  }
  if (kind == TopologyKind::ModuleCC || kind == TopologyKind::ModuleCPC) {
    block_size(kind, n, m);
  }
}

}  // namespace

Rational Rational::parse(std::string_view text) {
  auto parse_int = [&](std::string_view part) {
    std::int64_t value = 0;
    if (!part.empty() && part.front() == '+') part.remove_prefix(1);
    const auto* end = part.data() + part.size();
    auto [ptr, ec] = std::from_chars(part.data(), end, value);
    if (part.empty() || ec != std::errc() || ptr != end) {
      throw std::invalid_argument("malformed rational '" + std::string(text) + "'");
    }
    return value;
  };
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return Rational(parse_int(text));
  return {parse_int(text.substr(0, slash)), parse_int(text.substr(slash + 1))};
}

std::string_view to_string(EdgeKind kind) {
  for (const auto& [k, name] : kEdgeNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::string_view to_string(TopologyKind kind) {
  for (const auto& [k, name] : kTopologyNames) {
    if (k == kind) return name;
  }
  return "?";
}

EdgeKind parse_edge_kind(std::string_view text) {
  for (const auto& [k, name] : kEdgeNames) {
    if (name == text) return k;
  }
  throw std::invalid_argument("unknown equalizer kind '" + std::string(text) +
                              "' (expected CC, MM, CPC or CMC)");
}

TopologyKind parse_topology_kind(std::string_view text) {
  for (const auto& [k, name] : kTopologyNames) {
    if (name == text) return k;
  }
  throw std::invalid_argument("unknown topology kind '" + std::string(text) + "'");
}

Hyperedge make_edge(EdgeKind kind, std::vector<int> head, std::vector<int> tail,
                    double current_limit) {
  std::sort(head.begin(), head.end());
  std::sort(tail.begin(), tail.end());
  if (head.empty() || tail.empty()) {
    throw std::invalid_argument("equalizer head and tail must be non-empty");
  }
  if (!(current_limit >= 0.0)) {
    throw std::invalid_argument("equalizer current limit must be >= 0");
  }
  if (std::adjacent_find(head.begin(), head.end()) != head.end() ||
      std::adjacent_find(tail.begin(), tail.end()) != tail.end()) {
    throw std::invalid_argument("equalizer lists a cell twice");
  }
  std::vector<int> common;
  std::set_intersection(head.begin(), head.end(), tail.begin(), tail.end(),
                        std::back_inserter(common));
  if (!common.empty()) {
    throw std::invalid_argument("cell " + std::to_string(common.front()) +
                                " is in both head and tail");
  }

  Hyperedge edge;
  edge.kind = kind;
  edge.current_limit = current_limit;
  switch (kind) {
    case EdgeKind::CC:
      if (head.size() != 1 || tail.size() != 1) {
        throw std::invalid_argument("CC equalizer connects exactly one head and one tail cell");
      }
      edge.head_weight = Rational(1);
      edge.tail_weight = Rational(-1);
      break;
    case EdgeKind::MM:
      if (head.size() != tail.size()) {
        throw std::invalid_argument("MM equalizer needs equally sized head and tail modules");
      }
      edge.head_weight = Rational(1);
      edge.tail_weight = Rational(-1);
      break;
    case EdgeKind::CPC:
    case EdgeKind::CMC: {
      if (head.size() != 1) {
        throw std::invalid_argument(std::string(to_string(kind)) +
                                    " equalizer has exactly one head cell");
      }
      const auto s = static_cast<std::int64_t>(tail.size() + 1);
      edge.head_weight = Rational(s - 1, s);
      edge.tail_weight = Rational(-1, s);
      break;
    }
  }
  edge.head = std::move(head);
  edge.tail = std::move(tail);
  return edge;
}

void validate_edge(const Hyperedge& e, int n) {
  auto in_range = [n](int i) { return i >= 1 && i <= n; };
  if (!std::all_of(e.head.begin(), e.head.end(), in_range) ||
      !std::all_of(e.tail.begin(), e.tail.end(), in_range)) {
    throw std::invalid_argument("cell index out of range [1, " + std::to_string(n) + "]");
  }
  if (!std::is_sorted(e.head.begin(), e.head.end()) ||
      !std::is_sorted(e.tail.begin(), e.tail.end()) ||
      std::adjacent_find(e.head.begin(), e.head.end()) != e.head.end() ||
      std::adjacent_find(e.tail.begin(), e.tail.end()) != e.tail.end()) {
    throw std::invalid_argument("head and tail must be sets of distinct cells");
  }
  std::vector<int> both;
  std::set_intersection(e.head.begin(), e.head.end(), e.tail.begin(), e.tail.end(),
                        std::back_inserter(both));
  if (!both.empty()) {
    throw std::invalid_argument("cell " + std::to_string(both.front()) +
                                " appears in both head and tail");
  }
  if (e.kind == EdgeKind::CPC && static_cast<int>(e.tail.size()) != n - 1) {
    throw std::invalid_argument("CPC equalizer tail must cover the other n-1 cells");
  }
  const Rational sum = e.head_weight * Rational(static_cast<std::int64_t>(e.head.size())) +
                       e.tail_weight * Rational(static_cast<std::int64_t>(e.tail.size()));
  if (sum != Rational(0)) {
    throw std::invalid_argument("equalizer weights do not balance (column sum " +
                                sum.to_string() + ")");
  }
}

Topology::Topology(int n, std::vector<Hyperedge> edges, bool switched,
                   std::optional<int> modules)
    : n_(n), edges_(std::move(edges)), switched_(switched), modules_(modules) {
  if (n_ < 2) throw std::invalid_argument("a pack needs at least 2 cells");
  if (edges_.empty()) throw std::invalid_argument("a topology needs at least one equalizer");
  for (const auto& e : edges_) validate_edge(e, n_);
  if (switched_ && (edges_.size() != 1 || edges_.front().kind != EdgeKind::CPC)) {
    throw std::invalid_argument("a switched topology holds exactly one CPC equalizer");
  }
  if (modules_ && (*modules_ < 1 || n_ % *modules_ != 0)) {
    throw std::invalid_argument("module count must divide n");
  }
}

const Hyperedge& Topology::edge(int one_based) const {
  if (one_based < 1 || one_based > edge_count()) {
    throw std::out_of_range("equalizer e_" + std::to_string(one_based) + " does not exist");
  }
  return edges_[static_cast<std::size_t>(one_based - 1)];
}

Topology Topology::without_edges(std::span<const int> one_based) const {
  if (switched_) throw std::invalid_argument("cannot remove the only switched equalizer");
  std::vector<bool> drop(edges_.size(), false);
  for (int l : one_based) {
    edge(l);
    drop[static_cast<std::size_t>(l - 1)] = true;
  }
  std::vector<Hyperedge> kept;
  for (std::size_t l = 0; l < edges_.size(); ++l) {
    if (!drop[l]) kept.push_back(edges_[l]);
  }
  return Topology(n_, std::move(kept), false, modules_);
}

Eigen::VectorXd incidence_vector(const Hyperedge& edge, int n) {
  validate_edge(edge, n);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  const double wh = edge.head_weight.to_double();
  const double wt = edge.tail_weight.to_double();
  for (int p : edge.head) c[p - 1] = wh;
  for (int p : edge.tail) c[p - 1] = wt;
  return c;
}

Eigen::MatrixXd incidence_matrix(const Topology& topology) {
  if (topology.switched()) {
    throw std::invalid_argument(
        "switched topology has a state-dependent incidence matrix; use incidence_switched");
  }
  Eigen::MatrixXd C(topology.n(), topology.edge_count());
  for (int l = 0; l < topology.edge_count(); ++l) {
    C.col(l) = incidence_vector(topology.edges()[static_cast<std::size_t>(l)], topology.n());
  }
  return C;
}

Eigen::MatrixXd incidence_switched(const Topology& topology, const Eigen::VectorXd& soc) {
  if (!topology.switched()) {
    throw std::invalid_argument("incidence_switched needs a switched topology");
  }
  if (soc.size() == 0) throw std::invalid_argument("empty SOC vector");
  if (soc.size() != topology.n()) {
    throw std::invalid_argument("SOC vector length " + std::to_string(soc.size()) +
                                " does not match n=" + std::to_string(topology.n()));
  }
  Eigen::Index head = 0;
  for (Eigen::Index i = 1; i < soc.size(); ++i) {
    if (soc[i] > soc[head]) head = i;
  }
  const auto& tmpl = topology.edges().front();
  Eigen::MatrixXd C(topology.n(), 1);
  C.col(0).setConstant(tmpl.tail_weight.to_double());
  C(head, 0) = tmpl.head_weight.to_double();
  return C;
}

Eigen::MatrixXd structural_incidence(const Topology& topology) {
  if (!topology.switched()) return incidence_matrix(topology);
  Eigen::MatrixXd C(topology.n(), 1);
  C.col(0) = incidence_vector(topology.edges().front(), topology.n());
  return C;
}

int canonical_edge_count(TopologyKind kind, int n, int m) {
  check_common(kind, n, m);
  switch (kind) {
    case TopologyKind::SeriesCC:
    case TopologyKind::LayerCC:
      return n - 1;
    case TopologyKind::ModuleCC:
      return (n - m) + (m - 1);
    case TopologyKind::CPC:
      return n;
    case TopologyKind::ModuleCPC:
      return n + (m - 1);
    case TopologyKind::SwitchCPC:
      return 1;
  }
  return 0;
}

Topology make_topology(TopologyKind kind, int n, int m, double current_limit) {
  check_common(kind, n, m);
  std::vector<Hyperedge> edges;
  auto cc = [&](int i, int j) {
    edges.push_back(make_edge(EdgeKind::CC, {i}, {j}, current_limit));
  };
  auto mm = [&](int first_head, int first_tail, int b) {
    edges.push_back(make_edge(EdgeKind::MM, range_inclusive(first_head, first_head + b - 1),
                              range_inclusive(first_tail, first_tail + b - 1), current_limit));
  };
  // Star edge with the given head inside the block [lo, hi].
  auto star = [&](EdgeKind k, int head, int lo, int hi) {
    std::vector<int> tail;
    for (int p = lo; p <= hi; ++p) {
      if (p != head) tail.push_back(p);
    }
    edges.push_back(make_edge(k, {head}, std::move(tail), current_limit));
  };

  // Equalizers are labelled CC first, then MM, then CPC, then CMC.
  switch (kind) {
    case TopologyKind::SeriesCC:
      for (int i = 1; i < n; ++i) cc(i, i + 1);
      return Topology(n, std::move(edges));

    case TopologyKind::ModuleCC: {
      const int b = block_size(kind, n, m);
      for (int mod = 0; mod < m; ++mod) {
        for (int i = mod * b + 1; i < (mod + 1) * b; ++i) cc(i, i + 1);
      }
      for (int mod = 0; mod + 1 < m; ++mod) mm(mod * b + 1, (mod + 1) * b + 1, b);
      return Topology(n, std::move(edges), false, m);
    }

    case TopologyKind::LayerCC:
      for (int i = 1; i < n; i += 2) cc(i, i + 1);
      for (int half = 2; half < n; half *= 2) {
        for (int start = 1; start <= n; start += 2 * half) mm(start, start + half, half);
      }
      return Topology(n, std::move(edges));

    case TopologyKind::CPC:
      for (int i = 1; i <= n; ++i) star(EdgeKind::CPC, i, 1, n);
      return Topology(n, std::move(edges));

    case TopologyKind::ModuleCPC: {
      const int b = block_size(kind, n, m);
      for (int mod = 0; mod + 1 < m; ++mod) mm(mod * b + 1, (mod + 1) * b + 1, b);
      for (int i = 1; i <= n; ++i) {
        const int lo = ((i - 1) / b) * b + 1;
        star(EdgeKind::CMC, i, lo, lo + b - 1);
      }
      return Topology(n, std::move(edges), false, m);
    }

    case TopologyKind::SwitchCPC:
      star(EdgeKind::CPC, 1, 1, n);
      return Topology(n, std::move(edges), true);
  }
  throw std::invalid_argument("unknown topology kind");
}

}  // namespace eqhs
