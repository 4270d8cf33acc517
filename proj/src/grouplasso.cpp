#include "kbl/grouplasso.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace kbl {

namespace {

constexpr double kRankTol = 1e-14;

// Root of g(s) = sum_j w_j^2 / (s lam_j + mu)^2 - 1 on s > 0, for the block
// subproblem stationarity condition. Safeguarded Newton on a sign-changing
// bracket; g is convex and strictly decreasing there.
double secular_root(const Eigen::VectorXd& lam, const Eigen::VectorXd& w, double mu) {
  double lam_min = std::numeric_limits<double>::infinity();
  double lam_max = 0.0;
  double wn2 = 0.0;
  for (Eigen::Index j = 0; j < lam.size(); ++j) {
    if (w[j] == 0.0) continue;
    lam_min = std::min(lam_min, lam[j]);
    lam_max = std::max(lam_max, lam[j]);
    wn2 += w[j] * w[j];
  }
  const double wn = std::sqrt(wn2);
  if (!(wn > mu) || lam_max <= 0.0) return 0.0;

  auto g = [&](double s, double& deriv) {
    double v = -1.0;
    deriv = 0.0;
    for (Eigen::Index j = 0; j < lam.size(); ++j) {
      if (w[j] == 0.0) continue;
      const double den = s * lam[j] + mu;
      const double t = w[j] / den;
      v += t * t;
      deriv -= 2.0 * t * t * lam[j] / den;
    }
    return v;
  };

  // g is convex and strictly decreasing with g(lo) >= 0 >= g(hi).
  double lo = (wn - mu) / lam_max;
  double hi = (wn - mu) / lam_min;
  double s = lo;
  for (int iter = 0; iter < 200; ++iter) {
    double deriv;
    const double gs = g(s, deriv);
    if (std::abs(gs) <= 1e-14) return s;
    if (gs > 0.0)
      lo = s;
    else
      hi = s;
    if (hi - lo <= 1e-16 * hi) return hi;
    double next = deriv < 0.0 ? s - gs / deriv : std::numeric_limits<double>::quiet_NaN();
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    s = next;
  }
  throw std::runtime_error("block_update: secular root finder exceeded 200 iterations");
}

// gamma' in the whitened coordinates; returns exact zero when thresholded.
Eigen::VectorXd whitened_update(const Eigen::MatrixXd& q_vecs, const Eigen::VectorXd& q_vals,
                                double q_max, const Eigen::VectorXd& w0, double mu) {
  if (w0.norm() <= mu) return Eigen::VectorXd::Zero(w0.size());
  Eigen::VectorXd w = q_vecs.transpose() * w0;
  // Null directions of A^T A carry no data; zero their weight so the secular
  // sum stays finite even at mu = 0.
  Eigen::VectorXd lam = q_vals;
  for (Eigen::Index j = 0; j < lam.size(); ++j) {
    if (lam[j] <= kRankTol * q_max) {
      lam[j] = 0.0;
      w[j] = 0.0;
    }
  }
  const double s = secular_root(lam, w, mu);
  if (s <= 0.0) return Eigen::VectorXd::Zero(w0.size());
  const double nu = mu / s;
  Eigen::VectorXd coef(w.size());
  for (Eigen::Index j = 0; j < w.size(); ++j)
    coef[j] = w[j] == 0.0 ? 0.0 : w[j] / (lam[j] + nu);
  return q_vecs * coef;
}

}  // namespace

Eigen::VectorXd block_update(const Eigen::VectorXd& zi, const Eigen::MatrixXd& m,
                             const Eigen::MatrixXd& p, double mu) {
  if (m.rows() != zi.size()) throw std::invalid_argument("block_update: design/target mismatch");
  if (p.rows() != m.cols() || p.cols() != m.cols())
    throw std::invalid_argument("block_update: penalty shape mismatch");
  if (mu < 0.0) throw std::invalid_argument("block_update: mu must be >= 0");

  const PsdFactor pf = psd_factor(p);
  const Eigen::MatrixXd a_hat = m * pf.inv_sqrt_m;
  const Eigen::VectorXd w0 = a_hat.transpose() * zi;
  if (w0.norm() <= mu) return Eigen::VectorXd::Zero(m.cols());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a_hat.transpose() * a_hat);
  const Eigen::VectorXd q_vals = eig.eigenvalues().cwiseMax(0.0);
  const double q_max = q_vals[q_vals.size() - 1];
  const Eigen::VectorXd gp = whitened_update(eig.eigenvectors(), q_vals, q_max, w0, mu);
  if (gp.isZero(0.0)) return Eigen::VectorXd::Zero(m.cols());
  return pf.inv_sqrt_m * gp;
}

double objective_value(const BlockProblem& problem, const std::vector<Eigen::VectorXd>& gammas) {
  if (gammas.size() != problem.blocks.size())
    throw std::invalid_argument("objective_value: gamma count mismatch");
  Eigen::VectorXd r = problem.z;
  double penalty = 0.0;
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    r -= problem.blocks[i].design * gammas[i];
    penalty += std::sqrt(std::max(0.0, gammas[i].dot(problem.blocks[i].penalty * gammas[i])));
  }
  return 0.5 * r.squaredNorm() + problem.mu * penalty;
}

double optimality_certificate(const BlockProblem& problem,
                              const std::vector<Eigen::VectorXd>& gammas) {
  if (gammas.size() != problem.blocks.size())
    throw std::invalid_argument("optimality_certificate: gamma count mismatch");
  Eigen::VectorXd r = problem.z;
  for (std::size_t i = 0; i < gammas.size(); ++i) r -= problem.blocks[i].design * gammas[i];

  double worst = 0.0;
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    const Block& b = problem.blocks[i];
    const Eigen::VectorXd mtr = b.design.transpose() * r;
    if (gammas[i].isZero(0.0)) {
      const PsdFactor pf = psd_factor(b.penalty);
      worst = std::max(worst, (pf.inv_sqrt_m * mtr).norm() - problem.mu);
    } else {
      const double pnorm = std::sqrt(std::max(0.0, gammas[i].dot(b.penalty * gammas[i])));
      worst = std::max(worst, (mtr - (problem.mu / pnorm) * (b.penalty * gammas[i])).norm());
    }
  }
  return std::max(0.0, worst);
}

BcdSolver::BcdSolver(Eigen::VectorXd z, std::vector<Block> blocks)
    : z_(std::move(z)), blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw std::invalid_argument("BcdSolver: no blocks");
  factors_.reserve(blocks_.size());
  for (const Block& b : blocks_) {
    if (b.design.rows() != z_.size())
      throw std::invalid_argument("BcdSolver: block design row mismatch");
    if (b.penalty.rows() != b.design.cols() || b.penalty.cols() != b.design.cols())
      throw std::invalid_argument("BcdSolver: block penalty shape mismatch");
    BlockFactor f;
    const PsdFactor pf = psd_factor(b.penalty);
    f.inv_sqrt_p = pf.inv_sqrt_m;
    f.a_hat = b.design * pf.inv_sqrt_m;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(f.a_hat.transpose() * f.a_hat);
    f.q_vecs = eig.eigenvectors();
    f.q_vals = eig.eigenvalues().cwiseMax(0.0);
    f.q_max = f.q_vals[f.q_vals.size() - 1];
    factors_.push_back(std::move(f));
  }
}

double BcdSolver::critical_mu() const {
  double mu = 0.0;
  for (const BlockFactor& f : factors_) mu = std::max(mu, (f.a_hat.transpose() * z_).norm());
  return mu;
}

BlockSolution BcdSolver::solve(double mu, const SolveOptions& options) const {
  if (mu < 0.0) throw std::invalid_argument("BcdSolver::solve: mu must be >= 0");
  const std::size_t nb = blocks_.size();
  std::vector<Eigen::VectorXd> gp(nb);
  for (std::size_t i = 0; i < nb; ++i)
    gp[i] = Eigen::VectorXd::Zero(blocks_[i].design.cols());

  Eigen::VectorXd r = z_;
  auto whitened_objective = [&]() {
    double penalty = 0.0;
    for (std::size_t i = 0; i < nb; ++i) penalty += gp[i].norm();
    return 0.5 * r.squaredNorm() + mu * penalty;
  };

  BlockProblem problem{z_, blocks_, mu};
  auto materialize = [&]() {
    std::vector<Eigen::VectorXd> gammas(nb);
    for (std::size_t i = 0; i < nb; ++i) {
      gammas[i] = gp[i].isZero(0.0) ? Eigen::VectorXd::Zero(gp[i].size()).eval()
                                    : (factors_[i].inv_sqrt_p * gp[i]).eval();
    }
    return gammas;
  };

  double obj = whitened_objective();
  BlockSolution out;
  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    for (std::size_t i = 0; i < nb; ++i) {
      const BlockFactor& f = factors_[i];
      Eigen::VectorXd zi = gp[i].isZero(0.0) ? r : (r + f.a_hat * gp[i]).eval();
      const Eigen::VectorXd w0 = f.a_hat.transpose() * zi;
      Eigen::VectorXd gnew = whitened_update(f.q_vecs, f.q_vals, f.q_max, w0, mu);
      if (gnew.isZero(0.0) && gp[i].isZero(0.0)) continue;
      r = zi - f.a_hat * gnew;
      gp[i] = std::move(gnew);
    }
    // Refresh the residual so incremental drift cannot accumulate.
    r = z_;
    for (std::size_t i = 0; i < nb; ++i)
      if (!gp[i].isZero(0.0)) r -= factors_[i].a_hat * gp[i];

    const double obj_new = whitened_objective();
    const bool settled = obj - obj_new < options.tol * (1.0 + std::abs(obj_new));
    obj = obj_new;
    out.objective_trace.push_back(obj_new);
    out.sweeps = sweep;
    if (settled) {
      const double cert = optimality_certificate(problem, materialize());
      if (cert <= options.certificate_tol) {
        out.converged = true;
        break;
      }
    }
  }

  out.gammas = materialize();
  out.objective = objective_value(problem, out.gammas);
  out.certificate = optimality_certificate(problem, out.gammas);
  for (std::size_t i = 0; i < nb; ++i)
    if (!out.gammas[i].isZero(0.0)) out.support.push_back(i);
  return out;
}

BlockSolution solve_bcd(const BlockProblem& problem, const SolveOptions& options) {
  BcdSolver solver(problem.z, problem.blocks);
  return solver.solve(problem.mu, options);
}

}  // namespace kbl
