// Kernel evaluation, Gram matrices with diagonal-jitter repair, and kernel
// ridge regression (representer-theorem solution).
#pragma once

#include <Eigen/Dense>
#include <vector>

namespace kbl {

using Point = Eigen::VectorXd;

enum class KernelKind {
  GaussianRbf,      // exp(-||x - x'||^2 / theta^2)
  Sinc,             // sinc(x - x'), scalar inputs only
  KroneckerDelta,   // 1 if x == x' else 0
  Linear,           // x . x'
  Polynomial,       // (x . x')^degree
  ConvexCombination // sum_i a_i k_i, a_i >= 0, sum a_i = 1
};

class KernelSpec {
 public:
  static KernelSpec gaussian_rbf(double width);
  static KernelSpec sinc();
  static KernelSpec kronecker_delta();
  static KernelSpec linear();
  static KernelSpec polynomial(int degree);
  static KernelSpec convex_combination(std::vector<double> weights,
                                       std::vector<KernelSpec> children);

  KernelKind kind() const { return kind_; }
  double width() const { return width_; }
  int degree() const { return degree_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<KernelSpec>& children() const { return children_; }

 private:
  explicit KernelSpec(KernelKind kind) : kind_(kind) {}

  KernelKind kind_;
  double width_ = 0.0;
  int degree_ = 0;
  std::vector<double> weights_;
  std::vector<KernelSpec> children_;
};

// k(x, x'). Throws std::invalid_argument on dimension mismatch, non-finite
// coordinates, or a Sinc evaluation with non-scalar inputs.
double eval_kernel(const KernelSpec& spec, const Point& x, const Point& y);

// sin(pi t) / (pi t), with sinc(0) = 1.
double sinc(double t);

enum class JitterPolicy { Auto, None };

// Symmetric kernel matrix over a point set. `jitter` is the amount actually
// added to the diagonal (0 whenever the raw matrix factorizes).
struct GramMatrix {
  Eigen::MatrixXd entries;
  double jitter = 0.0;
};

// Builds the Gram matrix of `spec` over `points`. Under JitterPolicy::Auto a
// failed Cholesky factorization is repaired by adding the smallest
// power-of-ten multiple of eps * trace that makes it succeed.
GramMatrix gram(const KernelSpec& spec, const std::vector<Point>& points,
                JitterPolicy policy = JitterPolicy::Auto);

// Wraps an externally supplied covariance/kernel matrix (e.g. an empirical
// covariance) in the same jitter discipline as gram().
GramMatrix gram_from_matrix(Eigen::MatrixXd entries,
                            JitterPolicy policy = JitterPolicy::Auto);

// alpha = (K + mu I)^{-1} z via an SPD factorization plus one step of
// iterative refinement. Requires mu > 0.
Eigen::VectorXd ridge_solve(const GramMatrix& gram_k, const Eigen::VectorXd& z,
                            double mu);

struct RidgeModel {
  KernelSpec spec;
  std::vector<Point> anchors;
  Eigen::VectorXd alpha;
  double mu = 0.0;
};

RidgeModel ridge_fit(const KernelSpec& spec, std::vector<Point> anchors,
                     const Eigen::VectorXd& z, double mu,
                     JitterPolicy policy = JitterPolicy::Auto);

// f(x) = sum_n alpha_n k(x_n, x)
double ridge_predict(const RidgeModel& model, const Point& x);

// [k(x_1, x), ..., k(x_N, x)]
Eigen::VectorXd kernel_vector(const KernelSpec& spec,
                              const std::vector<Point>& anchors,
                              const Point& x);

// ||f||^2 = alpha^T K alpha for f = sum alpha_n k(x_n, .)
double rkhs_norm_sq(const GramMatrix& gram_k, const Eigen::VectorXd& alpha);

}  // namespace kbl
