// Weighted group Lasso
//   min_gamma 1/2 ||z - sum_i M_i gamma_i||^2 + mu sum_i ||P_i^{1/2} gamma_i||
// solved by block coordinate descent with exact block minimization.
#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "kbl/psd.hpp"

namespace kbl {

struct Block {
  Eigen::MatrixXd design;   // M_i, N x d_i
  Eigen::MatrixXd penalty;  // P_i, d_i x d_i, symmetric PSD
};

struct BlockProblem {
  Eigen::VectorXd z;
  std::vector<Block> blocks;
  double mu = 0.0;
};

struct BlockSolution {
  std::vector<Eigen::VectorXd> gammas;
  std::vector<std::size_t> support;  // indices of blocks with gamma_i != 0
  double objective = 0.0;
  double certificate = 0.0;
  int sweeps = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // objective after each sweep
};

struct SolveOptions {
  double tol = 1e-10;            // relative objective decrease per sweep
  int max_sweeps = 1000;
  double certificate_tol = 1e-6; // stationarity residual required to stop
};

// Exact minimizer of 1/2 ||zi - M gamma||^2 + mu ||P^{1/2} gamma||.
// Returns the zero vector (bitwise) when ||P^{-1/2} M^T zi|| <= mu.
Eigen::VectorXd block_update(const Eigen::VectorXd& zi, const Eigen::MatrixXd& m,
                             const Eigen::MatrixXd& p, double mu);

double objective_value(const BlockProblem& problem,
                       const std::vector<Eigen::VectorXd>& gammas);

// Max over blocks of the stationarity residual: for active blocks
// ||M_i^T r - mu P_i gamma_i / ||P_i^{1/2} gamma_i||||, for zero blocks
// max(0, ||P_i^{-1/2} M_i^T r|| - mu), with r the fit residual.
double optimality_certificate(const BlockProblem& problem,
                              const std::vector<Eigen::VectorXd>& gammas);

// Precomputes per-block factorizations once so the same design can be solved
// across a grid of mu values.
class BcdSolver {
 public:
  BcdSolver(Eigen::VectorXd z, std::vector<Block> blocks);

  BlockSolution solve(double mu, const SolveOptions& options = {}) const;

  // Largest mu with a nonzero solution: max_i ||P_i^{-1/2} M_i^T z||.
  double critical_mu() const;

  const std::vector<Block>& blocks() const { return blocks_; }
  const Eigen::VectorXd& z() const { return z_; }

 private:
  struct BlockFactor {
    Eigen::MatrixXd a_hat;       // M P^{-1/2}
    Eigen::MatrixXd inv_sqrt_p;
    Eigen::MatrixXd q_vecs;      // eigenvectors of A^T A
    Eigen::VectorXd q_vals;      // eigenvalues, ascending, clamped at 0
    double q_max = 0.0;
  };

  Eigen::VectorXd z_;
  std::vector<Block> blocks_;
  std::vector<BlockFactor> factors_;
};

BlockSolution solve_bcd(const BlockProblem& problem, const SolveOptions& options = {});

}  // namespace kbl
