#include "kbl/psd.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace kbl {

namespace {

double escalate_jitter(double lam_min, double lam_max, double trace) {
  const double eps = std::numeric_limits<double>::epsilon();
  const double floor_ratio = 1e-13;
  if (lam_min >= floor_ratio * lam_max) return 0.0;
  const double base = eps * std::max(trace, 0.0);
  for (int step = 0; step <= 24; ++step) {
    const double jit = base * std::pow(10.0, step);
    if (lam_min + jit >= floor_ratio * (lam_max + jit) && lam_min + jit > 0.0) return jit;
  }
  throw std::runtime_error("psd_factor: matrix is singular beyond jitter");
}

}  // namespace

PsdFactor psd_factor(const Eigen::MatrixXd& p) {
  if (p.rows() != p.cols()) throw std::invalid_argument("psd_factor: matrix must be square");
  if (!p.allFinite()) throw std::invalid_argument("psd_factor: non-finite entries");

  bool diag_only = true;
  for (Eigen::Index j = 0; j < p.cols() && diag_only; ++j) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      if (i != j && p(i, j) != 0.0) {
        diag_only = false;
        break;
      }
    }
  }
  PsdFactor f;
  if (diag_only) {
    // Diagonal matrices factor exactly; identity and delta-kernel priors keep
    // zero structure bitwise through the downstream solves.
    const Eigen::VectorXd lam = p.diagonal();
    const double lam_max = lam.maxCoeff();
    if (!(lam_max > 0.0)) throw std::runtime_error("psd_factor: matrix is singular beyond jitter");
    f.jitter = escalate_jitter(lam.minCoeff(), lam_max, p.trace());
    f.eigvecs = Eigen::MatrixXd::Identity(p.rows(), p.cols());
    f.eigvals = lam.array() + f.jitter;
    f.sqrt_m = Eigen::MatrixXd(f.eigvals.cwiseSqrt().asDiagonal());
    f.inv_sqrt_m = Eigen::MatrixXd(f.eigvals.cwiseSqrt().cwiseInverse().asDiagonal());
    return f;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p);
  if (eig.info() != Eigen::Success) throw std::runtime_error("psd_factor: eigensolver failed");
  const Eigen::VectorXd& lam = eig.eigenvalues();  // ascending
  const double lam_max = lam[lam.size() - 1];
  if (!(lam_max > 0.0)) throw std::runtime_error("psd_factor: matrix is singular beyond jitter");

  f.jitter = escalate_jitter(lam[0], lam_max, p.trace());
  f.eigvecs = eig.eigenvectors();
  f.eigvals = lam.array() + f.jitter;
  const Eigen::VectorXd s = f.eigvals.cwiseSqrt();
  f.sqrt_m = f.eigvecs * s.asDiagonal() * f.eigvecs.transpose();
  f.inv_sqrt_m = f.eigvecs * s.cwiseInverse().asDiagonal() * f.eigvecs.transpose();
  return f;
}

namespace {

// Pivoted Cholesky: K ~= L L^T with L n x r, stopping once the remaining
// trace falls below tol_rel * trace(K).
Eigen::MatrixXd pivoted_cholesky(const Eigen::MatrixXd& k, double tol_rel) {
  const Eigen::Index n = k.rows();
  Eigen::VectorXd d = k.diagonal();
  const double trace0 = std::max(d.sum(), 0.0);
  const double stop = tol_rel * std::max(trace0, std::numeric_limits<double>::min());

  Eigen::MatrixXd l(n, n);
  std::vector<Eigen::Index> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  Eigen::Index rank = 0;
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index best = col;
    for (Eigen::Index i = col + 1; i < n; ++i)
      if (d[perm[i]] > d[perm[best]]) best = i;
    std::swap(perm[col], perm[best]);
    const Eigen::Index pc = perm[col];

    double remaining = 0.0;
    for (Eigen::Index i = col; i < n; ++i) remaining += std::max(d[perm[i]], 0.0);
    if (remaining <= stop || d[pc] <= 0.0) break;

    const double pivot = std::sqrt(d[pc]);
    l(pc, col) = pivot;
    for (Eigen::Index i = col + 1; i < n; ++i) {
      const Eigen::Index pi = perm[i];
      double v = k(pi, pc);
      for (Eigen::Index j = 0; j < col; ++j) v -= l(pi, j) * l(pc, j);
      const double lij = v / pivot;
      l(pi, col) = lij;
      d[pi] -= lij * lij;
    }
    rank = col + 1;
  }

  // Rows above the pivot position were never written for a column; rebuild
  // compactly from the entries that were.
  Eigen::MatrixXd compact = Eigen::MatrixXd::Zero(n, rank);
  for (Eigen::Index col = 0; col < rank; ++col) {
    const Eigen::Index pc = perm[col];
    compact(pc, col) = l(pc, col);
    for (Eigen::Index i = col + 1; i < n; ++i) compact(perm[i], col) = l(perm[i], col);
  }
  return compact;
}

}  // namespace

LowRankSym low_rank_sym(const Eigen::MatrixXd& k, double tol_rel) {
  if (k.rows() != k.cols()) throw std::invalid_argument("low_rank_sym: matrix must be square");
  if (!k.allFinite()) throw std::invalid_argument("low_rank_sym: non-finite entries");
  const Eigen::Index n = k.rows();

  LowRankSym out;
  if (n > 400) {
    const Eigen::MatrixXd l = pivoted_cholesky(k, tol_rel * tol_rel);
    if (l.cols() == 0) throw std::runtime_error("low_rank_sym: zero matrix");
    // K = L L^T = Q R R^T Q^T; eigendecompose the small R R^T.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(l);
    const Eigen::MatrixXd r =
        qr.matrixQR().topRows(l.cols()).triangularView<Eigen::Upper>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r * r.transpose());
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, l.cols());
    // Ascending -> descending.
    const Eigen::Index m = eig.eigenvalues().size();
    Eigen::VectorXd lam(m);
    Eigen::MatrixXd v(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      lam[i] = eig.eigenvalues()[m - 1 - i];
      v.col(i) = eig.eigenvectors().col(m - 1 - i);
    }
    const double lam_max = lam[0];
    Eigen::Index keep = 0;
    while (keep < m && lam[keep] > tol_rel * lam_max) ++keep;
    if (keep == 0) throw std::runtime_error("low_rank_sym: zero matrix");
    out.u = q * v.leftCols(keep);
    out.lam = lam.head(keep);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
    if (eig.info() != Eigen::Success) throw std::runtime_error("low_rank_sym: eigensolver failed");
    const Eigen::Index m = n;
    const double lam_max = eig.eigenvalues()[m - 1];
    if (!(lam_max > 0.0)) throw std::runtime_error("low_rank_sym: zero matrix");
    Eigen::Index keep = 0;
    for (Eigen::Index i = m - 1; i >= 0; --i) {
      if (eig.eigenvalues()[i] > tol_rel * lam_max)
        ++keep;
      else
        break;
    }
    out.u.resize(n, keep);
    out.lam.resize(keep);
    for (Eigen::Index i = 0; i < keep; ++i) {
      out.lam[i] = eig.eigenvalues()[m - 1 - i];
      out.u.col(i) = eig.eigenvectors().col(m - 1 - i);
    }
  }
  return out;
}

}  // namespace kbl
