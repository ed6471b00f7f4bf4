#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "eqhs/rational.hpp"

namespace eqhs {

/// Equalizer kind: cell-cell, module-module, cell-pack-cell, cell-module-cell.
enum class EdgeKind { CC, MM, CPC, CMC };

/// The six canonical equalization system layouts.
enum class TopologyKind { SeriesCC, ModuleCC, LayerCC, CPC, ModuleCPC, SwitchCPC };

std::string_view to_string(EdgeKind kind);
std::string_view to_string(TopologyKind kind);
EdgeKind parse_edge_kind(std::string_view text);
TopologyKind parse_topology_kind(std::string_view text);

/// One equalizer as a directed hyperedge. Cell indices are 1-based.
///
/// The weights follow from the kind and the head/tail sizes, so they are
/// derived by make_edge() rather than supplied by callers:
///   CC, MM   head +1, tail -1
///   CPC, CMC head (s-1)/s, tail -1/s, where s = 1 + |tail|
struct Hyperedge {
  EdgeKind kind = EdgeKind::CC;
  std::vector<int> head;
  std::vector<int> tail;
  Rational head_weight{1};
  Rational tail_weight{-1};
  double current_limit = 0.0;  // amperes, magnitude bound
};

/// Builds an edge, sorting the index sets and deriving the weights. Throws
/// std::invalid_argument when the head/tail shape does not fit the kind.
Hyperedge make_edge(EdgeKind kind, std::vector<int> head, std::vector<int> tail,
                    double current_limit);

/// Checks every edge invariant against a pack of n cells.
void validate_edge(const Hyperedge& edge, int n);

/// An ordered equalizer set over n cells. Immutable once built.
///
/// A switched topology holds exactly one CPC edge spanning the whole pack;
/// it acts as a template whose head is relocated to the highest-SOC cell at
/// every step (see incidence_switched).
class Topology {
 public:
  Topology(int n, std::vector<Hyperedge> edges, bool switched = false,
           std::optional<int> modules = std::nullopt);

  int n() const { return n_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  bool switched() const { return switched_; }
  std::optional<int> modules() const { return modules_; }
  const std::vector<Hyperedge>& edges() const { return edges_; }
  const Hyperedge& edge(int one_based) const;

  /// Copy with the listed equalizers (1-based labels e_l) removed.
  Topology without_edges(std::span<const int> one_based) const;

 private:
  int n_;
  std::vector<Hyperedge> edges_;
  bool switched_;
  std::optional<int> modules_;
};

/// Column of C for one equalizer.
Eigen::VectorXd incidence_vector(const Hyperedge& edge, int n);

/// The n x n_e incidence matrix. Rejects switched topologies.
Eigen::MatrixXd incidence_matrix(const Topology& topology);

/// The single active column of a switched topology for the given SOC vector.
/// The head is the highest-SOC cell; ties go to the lowest index.
Eigen::MatrixXd incidence_switched(const Topology& topology, const Eigen::VectorXd& soc);

/// Incidence matrix of the relocatable template itself (head at cell 1) for
/// switched topologies, the ordinary matrix otherwise. Used for spectra.
Eigen::MatrixXd structural_incidence(const Topology& topology);

/// Generates a canonical topology. Modules are contiguous blocks of n/m cells.
/// `m` is ignored for SeriesCC, CPC and SwitchCPC.
Topology make_topology(TopologyKind kind, int n, int m, double current_limit);

/// Number of equalizers make_topology produces for (kind, n, m).
int canonical_edge_count(TopologyKind kind, int n, int m);

}  // namespace eqhs
