#include "kbl/completion.hpp"

#include <cmath>
#include <stdexcept>

#include "kbl/rng.hpp"

namespace kbl {
namespace {

void check_masked(const MaskedMatrix& data) {
  if (data.z.rows() != data.w.rows() || data.z.cols() != data.w.cols())
    throw std::invalid_argument("data and mask shapes differ");
  if (!data.z.allFinite()) throw std::invalid_argument("non-finite data entry");
  for (Eigen::Index j = 0; j < data.w.cols(); ++j) {
    for (Eigen::Index i = 0; i < data.w.rows(); ++i) {
      const double v = data.w(i, j);
      if (v != 0.0 && v != 1.0) throw std::invalid_argument("mask entries must be 0 or 1");
    }
  }
}

// (Diag(d) + mu K^{-1})^{-1} rhs without forming K^{-1}: route the solve
// through K^{1/2} so the system is SPD even for singular priors.
Eigen::VectorXd column_core(const Eigen::VectorXd& d, const Eigen::VectorXd& rhs,
                            const PsdFactor& k, double mu) {
  const Eigen::MatrixXd& s = k.sqrt_m;
  Eigen::MatrixXd mid = s * d.asDiagonal() * s;
  mid.diagonal().array() += mu;
  Eigen::LLT<Eigen::MatrixXd> llt(mid);
  if (llt.info() != Eigen::Success) throw std::runtime_error("column update solve failed");
  return s * llt.solve(s * rhs);
}

double soft(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// Warm-started cyclic coordinate descent on
//   1/2 c^T H c - c^T q + lambda ||c||_1,  H = Diag(d) + h_prior.
// Stopping via the strong-convexity gap bound ||s||^2 * lam_max(K) / (2 mu)
// with s the minimum-norm subgradient.
Eigen::VectorXd lasso_column(const Eigen::VectorXd& d, const Eigen::VectorXd& q,
                             const Eigen::MatrixXd& h_prior, double lambda,
                             Eigen::VectorXd c, double k_lam_max, double mu) {
  Eigen::MatrixXd h = h_prior;
  h.diagonal() += d;
  Eigen::VectorXd hc = h * c;
  const int max_passes = 20000;
  for (int pass = 0; pass < max_passes; ++pass) {
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      const double old = c[j];
      const double rho = q[j] - (hc[j] - h(j, j) * old);
      const double next = soft(rho, lambda) / h(j, j);
      if (next != old) {
        hc += h.col(j) * (next - old);
        c[j] = next;
      }
    }
    double sq = 0.0;
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      const double g = hc[j] - q[j];
      double r;
      if (c[j] > 0.0)
        r = g + lambda;
      else if (c[j] < 0.0)
        r = g - lambda;
      else
        r = std::max(0.0, std::abs(g) - lambda);
      sq += r * r;
    }
    const double fval = 0.5 * c.dot(hc) - c.dot(q) + lambda * c.lpNorm<1>();
    if (sq * k_lam_max / (2.0 * mu) <= 1e-10 * (1.0 + std::abs(fval))) break;
  }
  return c;
}

double fit_cost(const MaskedMatrix& data, const PriorPair& priors, const FactorPair& f,
                double mu, double lambda) {
  double cost = kmc_cost(data, priors, f, mu);
  if (lambda > 0.0) cost += lambda * f.c.lpNorm<1>();
  return cost;
}

CompletionResult alternating_fit(const MaskedMatrix& data, const PriorPair& priors, int rank,
                                 double mu, double lambda, double eps, int max_sweeps,
                                 std::uint64_t seed) {
  check_masked(data);
  const Eigen::Index m = data.z.rows();
  const Eigen::Index n = data.z.cols();
  if (priors.r_c.rows() != m || priors.r_b.rows() != n)
    throw std::invalid_argument("prior dimensions do not match the data");
  if (rank < 1) throw std::invalid_argument("rank budget must be at least 1");
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("lambda must be nonnegative");
  if (max_sweeps < 1) throw std::invalid_argument("max_sweeps must be at least 1");

  CompletionResult out;
  out.factors = init_factors(m, n, rank, seed);
  Eigen::MatrixXd& c = out.factors.c;
  Eigen::MatrixXd& b = out.factors.b;

  Eigen::MatrixXd h_prior;
  if (lambda > 0.0) h_prior = mu * (priors.fc.inv_sqrt_m * priors.fc.inv_sqrt_m);
  const double k_lam_max = priors.fc.eigvals.maxCoeff();

  double cost = fit_cost(data, priors, out.factors, mu, lambda);
  out.cost_trace.push_back(cost);
  const double thr = eps > 0.0 ? eps : std::max(1e-8 * cost, 1e-300);

  Eigen::MatrixXd resid = data.z - c * b.transpose();
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    for (int i = 0; i < rank; ++i) {
      const Eigen::MatrixXd zi = resid + c.col(i) * b.col(i).transpose();
      const Eigen::VectorXd d = data.w * b.col(i).cwiseAbs2();
      const Eigen::VectorXd rhs = data.w.cwiseProduct(zi) * b.col(i);
      const Eigen::VectorXd next =
          lambda > 0.0 ? lasso_column(d, rhs, h_prior, lambda, c.col(i), k_lam_max, mu)
                       : column_core(d, rhs, priors.fc, mu);
      resid += (c.col(i) - next) * b.col(i).transpose();
      c.col(i) = next;
    }
    for (int i = 0; i < rank; ++i) {
      const Eigen::MatrixXd zi = resid + c.col(i) * b.col(i).transpose();
      const Eigen::VectorXd d = data.w.transpose() * c.col(i).cwiseAbs2();
      const Eigen::VectorXd rhs = data.w.cwiseProduct(zi).transpose() * c.col(i);
      const Eigen::VectorXd next = column_core(d, rhs, priors.fb, mu);
      resid += c.col(i) * (b.col(i) - next).transpose();
      b.col(i) = next;
    }
    resid = data.z - c * b.transpose();

    const double prev = cost;
    cost = fit_cost(data, priors, out.factors, mu, lambda);
    out.cost_trace.push_back(cost);
    out.sweeps = sweep;
    if (std::abs(cost - prev) < thr) {
      out.converged = true;
      break;
    }
  }

  out.zhat = c * b.transpose();
  out.coeff_c = priors.fc.inv_sqrt_m * (priors.fc.inv_sqrt_m * c);
  out.coeff_b = priors.fb.inv_sqrt_m * (priors.fb.inv_sqrt_m * b);
  return out;
}

}  // namespace

PriorPair make_priors(Eigen::MatrixXd r_c, Eigen::MatrixXd r_b, double sigma2) {
  if (r_c.rows() != r_c.cols() || r_b.rows() != r_b.cols())
    throw std::invalid_argument("priors must be square");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw std::invalid_argument("sigma2 must be positive");
  const double tc = r_c.trace();
  const double tb = r_b.trace();
  if (!(tc > 0.0) || !(tb > 0.0)) throw std::invalid_argument("priors must have positive trace");

  PriorPair out;
  out.rescale = tc / tb;
  out.r_c = std::move(r_c);
  out.r_b = std::move(r_b);
  if (out.rescale != 1.0) out.r_b *= out.rescale;
  out.sigma2 = sigma2;
  out.fc = psd_factor(out.r_c);
  out.fb = psd_factor(out.r_b);
  return out;
}

FactorPair init_factors(Eigen::Index m, Eigen::Index n, int rank, std::uint64_t seed) {
  if (rank < 1) throw std::invalid_argument("rank budget must be at least 1");
  Rng rng(seed);
  FactorPair f;
  f.c = rng.normal_matrix(m, rank);
  f.b = rng.normal_matrix(n, rank);
  return f;
}

Eigen::VectorXd kmc_update_c(std::size_t i, const Eigen::MatrixXd& z,
                             const Eigen::MatrixXd& w, const Eigen::MatrixXd& b,
                             const Eigen::MatrixXd& c, const PsdFactor& kx, double mu) {
  if (i >= static_cast<std::size_t>(c.cols())) throw std::invalid_argument("column out of range");
  const Eigen::Index col = static_cast<Eigen::Index>(i);
  const Eigen::MatrixXd zi = z - c * b.transpose() + c.col(col) * b.col(col).transpose();
  const Eigen::VectorXd d = w * b.col(col).cwiseAbs2();
  const Eigen::VectorXd rhs = w.cwiseProduct(zi) * b.col(col);
  return column_core(d, rhs, kx, mu);
}

Eigen::VectorXd kmc_update_b(std::size_t i, const Eigen::MatrixXd& z,
                             const Eigen::MatrixXd& w, const Eigen::MatrixXd& b,
                             const Eigen::MatrixXd& c, const PsdFactor& ky, double mu) {
  if (i >= static_cast<std::size_t>(b.cols())) throw std::invalid_argument("column out of range");
  const Eigen::Index col = static_cast<Eigen::Index>(i);
  const Eigen::MatrixXd zi = z - c * b.transpose() + c.col(col) * b.col(col).transpose();
  const Eigen::VectorXd d = w.transpose() * c.col(col).cwiseAbs2();
  const Eigen::VectorXd rhs = w.cwiseProduct(zi).transpose() * c.col(col);
  return column_core(d, rhs, ky, mu);
}

double kmc_cost(const MaskedMatrix& data, const PriorPair& priors,
                const FactorPair& factors, double mu) {
  const double fit =
      0.5 * (data.z - factors.c * factors.b.transpose()).cwiseProduct(data.w).squaredNorm();
  const double pc = (priors.fc.inv_sqrt_m * factors.c).squaredNorm();
  const double pb = (priors.fb.inv_sqrt_m * factors.b).squaredNorm();
  return fit + 0.5 * mu * (pc + pb);
}

CompletionResult kmc_fit(const MaskedMatrix& data, const PriorPair& priors, int rank,
                         double eps, int max_sweeps, std::uint64_t seed) {
  return alternating_fit(data, priors, rank, priors.sigma2, 0.0, eps, max_sweeps, seed);
}

CompletionResult kdl_fit(const MaskedMatrix& data, const PriorPair& priors, int rank,
                         double mu, double lambda, double eps, int max_sweeps,
                         std::uint64_t seed) {
  return alternating_fit(data, priors, rank, mu, lambda, eps, max_sweeps, seed);
}

SvtResult svt_oracle(const MaskedMatrix& data, double mu, double tol, int max_iters,
                     const Eigen::MatrixXd& start) {
  check_masked(data);
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");

  SvtResult out;
  Eigen::MatrixXd a;
  double nuclear = 0.0;
  if (start.size() == 0) {
    a = Eigen::MatrixXd::Zero(data.z.rows(), data.z.cols());
  } else {
    if (start.rows() != data.z.rows() || start.cols() != data.z.cols())
      throw std::invalid_argument("start shape does not match the data");
    a = start;
    nuclear = nuclear_norm(a);
  }
  double obj = 0.5 * (data.z - a).cwiseProduct(data.w).squaredNorm() + mu * nuclear;

  for (int it = 1; it <= max_iters; ++it) {
    const Eigen::MatrixXd g = a - (a - data.z).cwiseProduct(data.w);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = (svd.singularValues().array() - mu).max(0.0).matrix();
    a = svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
    const double next = 0.5 * (data.z - a).cwiseProduct(data.w).squaredNorm() + mu * sv.sum();
    out.iterations = it;
    if (std::abs(next - obj) <= tol * std::max(1.0, std::abs(obj))) {
      obj = next;
      out.converged = true;
      break;
    }
    obj = next;
  }
  out.zhat = std::move(a);
  out.objective = obj;
  return out;
}

double nuclear_norm(const Eigen::MatrixXd& a) {
  return Eigen::BDCSVD<Eigen::MatrixXd>(a).singularValues().sum();
}

double factor_penalty(const FactorPair& factors) {
  return 0.5 * (factors.b.squaredNorm() + factors.c.squaredNorm());
}

}  // namespace kbl
