#include "eqhs/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace eqhs {

SymmetricMatrix::SymmetricMatrix(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("symmetric matrix must be square");
  if (!a.allFinite()) throw std::invalid_argument("matrix has non-finite entries");
  a_ = 0.5 * (a + a.transpose());
}

namespace {

double off_diagonal_norm(const Eigen::MatrixXd& a) {
  double sum = 0.0;
  for (Eigen::Index q = 1; q < a.cols(); ++q) {
    for (Eigen::Index p = 0; p < q; ++p) sum += a(p, q) * a(p, q);
  }
  return std::sqrt(2.0 * sum);
}

// One Jacobi rotation zeroing a(p, q); p < q.
void rotate(Eigen::MatrixXd& a, Eigen::MatrixXd& v, Eigen::Index p, Eigen::Index q) {
  const double apq = a(p, q);
  if (apq == 0.0) return;
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;

  const Eigen::Index n = a.rows();
  for (Eigen::Index r = 0; r < n; ++r) {
    if (r == p || r == q) continue;
    const double arp = a(r, p);
    const double arq = a(r, q);
    a(r, p) = a(p, r) = c * arp - s * arq;
    a(r, q) = a(q, r) = s * arp + c * arq;
  }
  a(p, p) -= t * apq;
  a(q, q) += t * apq;
  a(p, q) = a(q, p) = 0.0;

  for (Eigen::Index r = 0; r < n; ++r) {
    const double vrp = v(r, p);
    const double vrq = v(r, q);
    v(r, p) = c * vrp - s * vrq;
    v(r, q) = s * vrp + c * vrq;
  }
}

}  // namespace

EigenDecomposition eigen_symmetric(const SymmetricMatrix& sym, const EigenOptions& opts) {
  Eigen::MatrixXd a = sym.dense();
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = a.norm();

  if (scale > 0.0) {
    const double target = opts.off_diagonal_tol * scale;
    int sweep = 0;
    while (off_diagonal_norm(a) > target) {
      if (sweep++ >= opts.max_sweeps) {
        throw ConvergenceError("Jacobi eigensolver did not converge in " +
                               std::to_string(opts.max_sweeps) + " sweeps");
      }
      for (Eigen::Index p = 0; p + 1 < n; ++p) {
        for (Eigen::Index q = p + 1; q < n; ++q) rotate(a, v, p, q);
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });

  EigenDecomposition out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double lambda = a(order[k], order[k]);
    if (opts.assume_psd && lambda < 0.0) {
      if (lambda < -opts.psd_clamp) {
        throw std::domain_error("matrix declared PSD has eigenvalue " + std::to_string(lambda));
      }
      lambda = 0.0;
    }
    out.values[k] = lambda;
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

Eigen::VectorXd eigenvalues_symmetric(const SymmetricMatrix& a, const EigenOptions& opts) {
  return eigen_symmetric(a, opts).values;
}

double second_smallest_eigenvalue(const SymmetricMatrix& lap) {
  if (lap.order() < 2) throw std::invalid_argument("need order >= 2 for a second eigenvalue");
  EigenOptions opts;
  opts.assume_psd = true;
  return eigenvalues_symmetric(lap, opts)[1];
}

double largest_eigenvalue(const SymmetricMatrix& a) {
  EigenOptions opts;
  opts.assume_psd = true;
  const auto values = eigenvalues_symmetric(a, opts);
  return values[values.size() - 1];
}

SymmetricMatrix laplacian(const Eigen::MatrixXd& incidence) {
  if (incidence.rows() == 0) throw std::invalid_argument("incidence matrix has no rows");
  return SymmetricMatrix(incidence * incidence.transpose());
}

double default_rank_tolerance(const Eigen::MatrixXd& m) {
  return static_cast<double>(std::max(m.rows(), m.cols())) *
         std::numeric_limits<double>::epsilon() * 64.0;
}

int rank(const Eigen::MatrixXd& m, std::optional<double> rel_tol) {
  if (!m.allFinite()) throw std::invalid_argument("rank of a matrix with non-finite entries");
  const double tol = rel_tol.value_or(default_rank_tolerance(m));
  if (!(tol > 0.0)) throw std::invalid_argument("rank tolerance must be positive");

  Eigen::MatrixXd r = m;
  const Eigen::Index rows = r.rows();
  const Eigen::Index cols = r.cols();
  const Eigen::Index steps = std::min(rows, cols);
  double first_pivot = 0.0;
  int rank = 0;

  for (Eigen::Index k = 0; k < steps; ++k) {
    // Pivot on the remaining column with the largest trailing norm.
    Eigen::Index best = k;
    double best_norm = -1.0;
    for (Eigen::Index j = k; j < cols; ++j) {
      const double nj = r.col(j).tail(rows - k).norm();
      if (nj > best_norm) {
        best_norm = nj;
        best = j;
      }
    }
    if (k == 0) {
      first_pivot = best_norm;
      if (first_pivot == 0.0) return 0;
    }
    if (best_norm <= tol * first_pivot) break;
    ++rank;
    r.col(k).swap(r.col(best));

    Eigen::VectorXd x = r.col(k).tail(rows - k);
    const double alpha = x[0] >= 0.0 ? -best_norm : best_norm;
    x[0] -= alpha;
    const double vnorm2 = x.squaredNorm();
    if (vnorm2 > 0.0) {
      for (Eigen::Index j = k; j < cols; ++j) {
        auto col = r.col(j).tail(rows - k);
        col -= (2.0 * x.dot(col) / vnorm2) * x;
      }
    }
  }
  return rank;
}

Eigen::MatrixXd difference_matrix(int n) {
  if (n < 2) throw std::invalid_argument("difference matrix needs n >= 2");
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n - 1, n);
  for (int i = 0; i < n - 1; ++i) {
    l(i, 0) = -1.0;
    l(i, i + 1) = 1.0;
  }
  return l;
}

}  // namespace eqhs
