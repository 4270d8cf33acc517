// Additive kernel models fit by weighted group Lasso: per-coordinate
// components, kernel dictionaries, and basis-expansion models where each
// basis coefficient is a kernel-learned function of the inputs.
//
// Every builder reduces its model to a BlockProblem through the compact
// eigendecomposition of the Gram matrices: with K = U diag(lam) U^T of rank
// r, the block (M = D K, P = K) is reparametrized as (D U, diag(lam)^{-1})
// with the full coefficient vector recovered as U diag(lam)^{-1} gamma.
// Fitted values and objective are unchanged; the recovered coefficients are
// the minimum-norm representative.
#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "kbl/grouplasso.hpp"
#include "kbl/kernels.hpp"
#include "kbl/rng.hpp"

namespace kbl {

struct TrainingSet {
  std::vector<Point> inputs;  // N points
  Eigen::VectorXd targets;    // length N
  Eigen::VectorXd aux;        // length N auxiliary coordinate (basis models); else empty
};

struct Basis {
  std::string name;
  std::function<double(double)> fn;
};

using BasisSet = std::vector<Basis>;

enum class ModelKind { Spam, Mkl, Nbp };

// One entry per solver block.
struct ComponentInfo {
  explicit ComponentInfo(KernelSpec k) : kernel(std::move(k)) {}

  KernelSpec kernel;
  std::size_t coord = 0;        // Spam: input coordinate
  std::size_t basis = 0;        // Nbp: basis index
  std::size_t kernel_slot = 0;  // Mkl/Nbp: index into the kernel list
};

struct PreparedProblem {
  ModelKind kind = ModelKind::Spam;
  Eigen::VectorXd z;
  std::vector<Block> blocks;             // reduced blocks fed to the solver
  std::vector<Eigen::MatrixXd> recover;  // per block: N x r, gamma_full = recover * gamma_reduced
  std::vector<ComponentInfo> components;
  BasisSet bases;                        // Nbp only
  std::vector<std::size_t> dropped_bases;  // bases zero at every training aux value
  std::size_t n_samples = 0;
};

struct AdditiveModel {
  ModelKind kind = ModelKind::Spam;
  double mu = 0.0;
  std::vector<Point> anchors;       // training inputs
  Eigen::VectorXd aux;              // training aux values (Nbp)
  std::vector<ComponentInfo> components;
  BasisSet bases;                   // Nbp only
  std::vector<Eigen::VectorXd> gammas;  // per component, length N; bitwise zero when inactive
  std::vector<std::size_t> support;     // component indices with nonzero gamma
  Eigen::VectorXd fitted;           // model values at the training points
  double objective = 0.0;
  double certificate = 0.0;
  int sweeps = 0;
  bool converged = false;
};

PreparedProblem build_spam_problem(const TrainingSet& data,
                                   const std::vector<KernelSpec>& coord_kernels);
PreparedProblem build_mkl_problem(const TrainingSet& data,
                                  const std::vector<KernelSpec>& kernel_dict);
// One block per (basis, kernel) pair, basis-major order. Bases that vanish at
// every training aux value contribute no block (a warning goes to stderr).
PreparedProblem build_nbp_problem(const TrainingSet& data, const BasisSet& bases,
                                  const std::vector<KernelSpec>& kernels);

AdditiveModel fit_prepared(const PreparedProblem& prepared, const TrainingSet& data,
                           double mu, const SolveOptions& options = {});

AdditiveModel fit_spam(const TrainingSet& data, const std::vector<KernelSpec>& coord_kernels,
                       double mu, const SolveOptions& options = {});
AdditiveModel fit_mkl(const TrainingSet& data, const std::vector<KernelSpec>& kernel_dict,
                      double mu, const SolveOptions& options = {});
AdditiveModel fit_nbp(const TrainingSet& data, const BasisSet& bases,
                      const std::vector<KernelSpec>& kernels, double mu,
                      const SolveOptions& options = {});

// Kernel part of component i: for Spam the coordinate function, for Mkl the
// per-kernel function, for Nbp the basis coefficient function (no basis
// factor applied).
double predict_component(const AdditiveModel& model, std::size_t component,
                         const Point& x);

double predict(const AdditiveModel& model, const Point& x);            // Spam / Mkl
double predict(const AdditiveModel& model, const Point& x, double y);  // Nbp

// Indices of components whose coefficients exceed tol in Euclidean norm.
// Solver zeros are exact, so the default tol = 0 is meaningful.
std::vector<std::size_t> support(const AdditiveModel& model, double tol = 0.0);

// Largest mu with a nonzero solution for the prepared problem.
double critical_mu(const PreparedProblem& prepared);

// count log-spaced values spanning [1e-4, 1e+2] * data_scale, ascending.
std::vector<double> default_mu_grid(double data_scale, std::size_t count = 20);

// Mean squared held-out prediction error over shuffled folds. The kernel
// list is interpreted per kind (coordinate kernels, dictionary, or the Nbp
// kernel list with bases).
double kfold_cv_error(ModelKind kind, const TrainingSet& data,
                      const std::vector<KernelSpec>& kernels, const BasisSet& bases,
                      double mu, std::size_t folds, Rng& rng,
                      const SolveOptions& options = {});

}  // namespace kbl
