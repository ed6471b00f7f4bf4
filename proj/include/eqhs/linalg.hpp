#pragma once

#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

namespace eqhs {

/// Dense symmetric matrix. The constructor symmetrizes by averaging A and A^T.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(const Eigen::MatrixXd& a);

  int order() const { return static_cast<int>(a_.rows()); }
  const Eigen::MatrixXd& dense() const { return a_; }
  double operator()(int i, int j) const { return a_(i, j); }

 private:
  Eigen::MatrixXd a_;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EigenOptions {
  /// Input is known to be positive semi-definite: eigenvalues in
  /// [-psd_clamp, 0) are reported as 0 and anything more negative throws.
  bool assume_psd = false;
  double psd_clamp = 1e-10;
  int max_sweeps = 100;
  /// Stop once the off-diagonal Frobenius norm drops below this times ||A||_F.
  double off_diagonal_tol = 1e-12;
};

struct EigenDecomposition {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // column i pairs with values[i]
};

/// Cyclic Jacobi eigensolver. Throws ConvergenceError after max_sweeps.
EigenDecomposition eigen_symmetric(const SymmetricMatrix& a, const EigenOptions& opts = {});

/// Eigenvalues only, ascending.
Eigen::VectorXd eigenvalues_symmetric(const SymmetricMatrix& a, const EigenOptions& opts = {});

/// The second smallest eigenvalue (algebraic connectivity) of a Laplacian.
double second_smallest_eigenvalue(const SymmetricMatrix& laplacian);

/// Largest eigenvalue of a PSD matrix.
double largest_eigenvalue(const SymmetricMatrix& a);

/// C * C^T.
SymmetricMatrix laplacian(const Eigen::MatrixXd& incidence);

/// max(rows, cols) * machine epsilon * 64.
double default_rank_tolerance(const Eigen::MatrixXd& m);

/// Numerical rank by Householder QR with column pivoting: the number of
/// pivots whose magnitude exceeds rel_tol times the largest pivot.
int rank(const Eigen::MatrixXd& m, std::optional<double> rel_tol = std::nullopt);

/// (n-1) x n matrix whose row i is e_{i+1} - e_1.
Eigen::MatrixXd difference_matrix(int n);

}  // namespace eqhs
