// Shared helpers for symmetric positive semidefinite matrices: jittered
// square-root/inverse-square-root factors and low-rank eigen factorization.
#pragma once

#include <Eigen/Dense>

namespace kbl {

// Eigen-based factor of a PSD matrix with escalating diagonal jitter so the
// inverse square root is well defined. `jitter` is the shift actually added.
struct PsdFactor {
  Eigen::MatrixXd eigvecs;     // V
  Eigen::VectorXd eigvals;     // jittered eigenvalues, ascending, all > 0
  Eigen::MatrixXd sqrt_m;      // V diag(sqrt(lam)) V^T
  Eigen::MatrixXd inv_sqrt_m;  // V diag(1/sqrt(lam)) V^T
  double jitter = 0.0;
};

// Throws std::runtime_error when the matrix stays singular beyond the jitter
// escalation, std::invalid_argument on a non-square or non-finite input.
PsdFactor psd_factor(const Eigen::MatrixXd& p);

// Rank-revealing factorization K ~= U diag(lam) U^T of a PSD matrix, keeping
// the eigenvalues above tol_rel * lam_max. Uses pivoted Cholesky for large
// matrices and a full eigendecomposition otherwise; both drop the trailing
// spectrum the same way.
struct LowRankSym {
  Eigen::MatrixXd u;    // n x r, orthonormal columns
  Eigen::VectorXd lam;  // r positive eigenvalues, descending
};

LowRankSym low_rank_sym(const Eigen::MatrixXd& k, double tol_rel = 1e-12);

}  // namespace kbl
