#include "kbl/kernels.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace kbl {

namespace {

void check_finite(const Point& x, const char* what) {
  if (!x.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite coordinate");
}

}  // namespace

KernelSpec KernelSpec::gaussian_rbf(double width) {
  if (!(width > 0.0)) throw std::invalid_argument("gaussian_rbf: width must be > 0");
  KernelSpec s(KernelKind::GaussianRbf);
  s.width_ = width;
  return s;
}

KernelSpec KernelSpec::sinc() { return KernelSpec(KernelKind::Sinc); }

KernelSpec KernelSpec::kronecker_delta() { return KernelSpec(KernelKind::KroneckerDelta); }

KernelSpec KernelSpec::linear() { return KernelSpec(KernelKind::Linear); }

KernelSpec KernelSpec::polynomial(int degree) {
  if (degree < 1) throw std::invalid_argument("polynomial: degree must be >= 1");
  KernelSpec s(KernelKind::Polynomial);
  s.degree_ = degree;
  return s;
}

KernelSpec KernelSpec::convex_combination(std::vector<double> weights,
                                          std::vector<KernelSpec> children) {
  if (weights.empty() || weights.size() != children.size())
    throw std::invalid_argument("convex_combination: weights/children size mismatch");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("convex_combination: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("convex_combination: weights must sum to 1");
  KernelSpec s(KernelKind::ConvexCombination);
  s.weights_ = std::move(weights);
  s.children_ = std::move(children);
  return s;
}

double sinc(double t) {
  if (t == 0.0) return 1.0;
  const double pt = M_PI * t;
  return std::sin(pt) / pt;
}

double eval_kernel(const KernelSpec& spec, const Point& x, const Point& y) {
  if (x.size() != y.size()) throw std::invalid_argument("eval_kernel: dimension mismatch");
  if (x.size() == 0) throw std::invalid_argument("eval_kernel: empty point");
  check_finite(x, "eval_kernel");
  check_finite(y, "eval_kernel");

  switch (spec.kind()) {
    case KernelKind::GaussianRbf: {
      const double d2 = (x - y).squaredNorm();
      return std::exp(-d2 / (spec.width() * spec.width()));
    }
    case KernelKind::Sinc: {
      if (x.size() != 1) throw std::invalid_argument("eval_kernel: sinc needs scalar inputs");
      return sinc(x[0] - y[0]);
    }
    case KernelKind::KroneckerDelta:
      return x == y ? 1.0 : 0.0;
    case KernelKind::Linear:
      return x.dot(y);
    case KernelKind::Polynomial:
      return std::pow(x.dot(y), spec.degree());
    case KernelKind::ConvexCombination: {
      double v = 0.0;
      for (std::size_t i = 0; i < spec.children().size(); ++i)
        v += spec.weights()[i] * eval_kernel(spec.children()[i], x, y);
      return v;
    }
  }
  throw std::logic_error("eval_kernel: unknown kind");
}

namespace {

GramMatrix apply_jitter_policy(Eigen::MatrixXd k, JitterPolicy policy) {
  GramMatrix g;
  if (policy == JitterPolicy::None) {
    g.entries = std::move(k);
    return g;
  }
  const Eigen::Index n = k.rows();
  const double tr = k.trace();
  const double base =
      std::numeric_limits<double>::epsilon() * (tr > 0.0 ? tr : static_cast<double>(n));
  Eigen::MatrixXd trial = k;
  double jit = 0.0;
  for (int step = -1; step <= 24; ++step) {
    if (step >= 0) {
      jit = base * std::pow(10.0, step);
      trial = k + jit * Eigen::MatrixXd::Identity(n, n);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(trial);
    if (llt.info() == Eigen::Success) {
      g.entries = std::move(trial);
      g.jitter = step < 0 ? 0.0 : jit;
      return g;
    }
  }
  throw std::runtime_error("gram: factorization failed beyond jitter escalation");
}

}  // namespace

GramMatrix gram(const KernelSpec& spec, const std::vector<Point>& points, JitterPolicy policy) {
  if (points.empty()) throw std::invalid_argument("gram: empty point set");
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = eval_kernel(spec, points[i], points[j]);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return apply_jitter_policy(std::move(k), policy);
}

GramMatrix gram_from_matrix(Eigen::MatrixXd entries, JitterPolicy policy) {
  if (entries.rows() != entries.cols())
    throw std::invalid_argument("gram_from_matrix: matrix must be square");
  if (!entries.allFinite())
    throw std::invalid_argument("gram_from_matrix: non-finite entries");
  // Symmetrize so accumulated asymmetry in an empirical estimate cannot leak
  // into the factorizations downstream.
  entries = 0.5 * (entries + entries.transpose()).eval();
  return apply_jitter_policy(std::move(entries), policy);
}

Eigen::VectorXd ridge_solve(const GramMatrix& gram_k, const Eigen::VectorXd& z, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("ridge_solve: mu must be > 0");
  if (gram_k.entries.rows() != z.size())
    throw std::invalid_argument("ridge_solve: size mismatch");
  const Eigen::Index n = z.size();
  const Eigen::MatrixXd a =
      gram_k.entries + mu * Eigen::MatrixXd::Identity(n, n);
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("ridge_solve: factorization failed");
  Eigen::VectorXd alpha = llt.solve(z);
  // One refinement pass keeps the residual near machine precision.
  alpha += llt.solve(z - a * alpha);
  const double resid = (a * alpha - z).norm();
  if (resid > 1e-10 * std::max(1.0, z.norm()))
    throw std::runtime_error("ridge_solve: residual check failed");
  return alpha;
}

RidgeModel ridge_fit(const KernelSpec& spec, std::vector<Point> anchors,
                     const Eigen::VectorXd& z, double mu, JitterPolicy policy) {
  if (static_cast<Eigen::Index>(anchors.size()) != z.size())
    throw std::invalid_argument("ridge_fit: anchors/targets size mismatch");
  const GramMatrix g = gram(spec, anchors, policy);
  RidgeModel model{spec, std::move(anchors), ridge_solve(g, z, mu), mu};
  return model;
}

Eigen::VectorXd kernel_vector(const KernelSpec& spec, const std::vector<Point>& anchors,
                              const Point& x) {
  Eigen::VectorXd k(static_cast<Eigen::Index>(anchors.size()));
  for (std::size_t i = 0; i < anchors.size(); ++i)
    k[static_cast<Eigen::Index>(i)] = eval_kernel(spec, anchors[i], x);
  return k;
}

double ridge_predict(const RidgeModel& model, const Point& x) {
  return kernel_vector(model.spec, model.anchors, x).dot(model.alpha);
}

double rkhs_norm_sq(const GramMatrix& gram_k, const Eigen::VectorXd& alpha) {
  if (gram_k.entries.rows() != alpha.size())
    throw std::invalid_argument("rkhs_norm_sq: size mismatch");
  return alpha.dot(gram_k.entries * alpha);
}

}  // namespace kbl
