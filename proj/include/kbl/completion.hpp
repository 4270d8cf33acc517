// Low-rank completion of partially observed matrices with covariance-kernel
// priors on the factor columns, fit by alternating exact column updates, plus
// the sparse-coefficient dictionary variant and a nuclear-norm proximal
// solver used as a convex reference.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "kbl/psd.hpp"

namespace kbl {

struct MaskedMatrix {
  Eigen::MatrixXd z;  // M x N data, unobserved entries arbitrary
  Eigen::MatrixXd w;  // M x N mask, entries exactly 0 or 1
};

struct FactorPair {
  Eigen::MatrixXd c;  // M x P
  Eigen::MatrixXd b;  // N x P
};

// Row- and column-space covariance priors. Construction rescales r_b so the
// traces match (the factor is recorded) and caches jittered factorizations.
struct PriorPair {
  Eigen::MatrixXd r_c;   // M x M after any jitter-free rescale
  Eigen::MatrixXd r_b;   // N x N, rescaled
  double sigma2 = 0.0;   // noise variance, the fit's mu
  double rescale = 1.0;  // factor applied to r_b for trace matching
  PsdFactor fc;
  PsdFactor fb;
};

PriorPair make_priors(Eigen::MatrixXd r_c, Eigen::MatrixXd r_b, double sigma2);

struct CompletionResult {
  FactorPair factors;
  Eigen::MatrixXd zhat;     // C B^T
  Eigen::MatrixXd coeff_c;  // R_C^{-1} C
  Eigen::MatrixXd coeff_b;  // R_B^{-1} B
  std::vector<double> cost_trace;  // initial cost, then one value per sweep
  int sweeps = 0;
  bool converged = false;
};

// Seeded standard-normal factors, C drawn before B, column-major order.
FactorPair init_factors(Eigen::Index m, Eigen::Index n, int rank, std::uint64_t seed);

// Exact minimizer over column i of C of
//   1/2 ||(Z_i - c b_i^T) o W||_F^2 + (mu/2) c^T R_C^{-1} c,
// Z_i the residual with column i excluded. The solve runs through the prior's
// square root so singular priors stay well posed.
Eigen::VectorXd kmc_update_c(std::size_t i, const Eigen::MatrixXd& z,
                             const Eigen::MatrixXd& w, const Eigen::MatrixXd& b,
                             const Eigen::MatrixXd& c, const PsdFactor& kx, double mu);
Eigen::VectorXd kmc_update_b(std::size_t i, const Eigen::MatrixXd& z,
                             const Eigen::MatrixXd& w, const Eigen::MatrixXd& b,
                             const Eigen::MatrixXd& c, const PsdFactor& ky, double mu);

// 1/2 ||(Z - C B^T) o W||_F^2 + (mu/2)[tr(C^T R_C^{-1} C) + tr(B^T R_B^{-1} B)]
double kmc_cost(const MaskedMatrix& data, const PriorPair& priors,
                const FactorPair& factors, double mu);

// Alternating exact column updates, all of C then all of B per sweep, with
// mu = priors.sigma2. Stops when the cost change drops below eps; eps <= 0
// means 1e-8 times the initial cost. converged=false flags a sweep-limit
// exit.
CompletionResult kmc_fit(const MaskedMatrix& data, const PriorPair& priors, int rank,
                         double eps = -1.0, int max_sweeps = 500, std::uint64_t seed = 0);

// Same loop with the C update replaced by the minimizer of
//   1/2 c^T H c - c^T (W o Z_i) b_i + lambda ||c||_1,  H = Diag[W(b_i o b_i)] + mu R_C^{-1},
// solved by warm-started cyclic coordinate descent to duality gap 1e-10.
// lambda = 0 runs the identical code path as kmc_fit. The cost trace includes
// the lambda ||C||_1 term.
CompletionResult kdl_fit(const MaskedMatrix& data, const PriorPair& priors, int rank,
                         double mu, double lambda, double eps = -1.0, int max_sweeps = 500,
                         std::uint64_t seed = 0);

struct SvtResult {
  Eigen::MatrixXd zhat;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

// min_A 1/2 ||(Z - A) o W||_F^2 + mu ||A||_* by proximal gradient with unit
// step (singular-value soft thresholding). start, when nonempty, replaces the
// zero initial iterate.
SvtResult svt_oracle(const MaskedMatrix& data, double mu, double tol = 1e-10,
                     int max_iters = 100000,
                     const Eigen::MatrixXd& start = Eigen::MatrixXd());

double nuclear_norm(const Eigen::MatrixXd& a);
double factor_penalty(const FactorPair& factors);  // 1/2 (||B||_F^2 + ||C||_F^2)

}  // namespace kbl
