#include "kbl/additive.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "kbl/psd.hpp"

namespace kbl {
namespace {

void check_training_set(const TrainingSet& data, bool need_aux) {
  const std::size_t n = data.inputs.size();
  if (n < 2) throw std::invalid_argument("training set needs at least 2 samples");
  if (static_cast<std::size_t>(data.targets.size()) != n)
    throw std::invalid_argument("targets length does not match inputs");
  const Eigen::Index dim = data.inputs.front().size();
  if (dim == 0) throw std::invalid_argument("empty input point");
  for (const Point& x : data.inputs) {
    if (x.size() != dim) throw std::invalid_argument("inconsistent input dimensions");
    if (!x.allFinite()) throw std::invalid_argument("non-finite input");
  }
  if (!data.targets.allFinite()) throw std::invalid_argument("non-finite target");
  if (need_aux) {
    if (static_cast<std::size_t>(data.aux.size()) != n)
      throw std::invalid_argument("aux length does not match inputs");
    if (!data.aux.allFinite()) throw std::invalid_argument("non-finite aux value");
  }
}

// Reduced block for design Diag(d) K and penalty K, K given by its compact
// eigendecomposition. An empty d means the identity scaling.
void push_reduced_block(PreparedProblem& out, const LowRankSym& f,
                        const Eigen::VectorXd& d, const ComponentInfo& info) {
  Block b;
  b.design = d.size() == 0 ? f.u : Eigen::MatrixXd(d.asDiagonal() * f.u);
  b.penalty = Eigen::MatrixXd(f.lam.cwiseInverse().asDiagonal());
  out.blocks.push_back(std::move(b));
  out.recover.push_back(f.u * f.lam.cwiseInverse().asDiagonal());
  out.components.push_back(info);
}

std::vector<Point> coordinate_slice(const std::vector<Point>& inputs, std::size_t coord) {
  std::vector<Point> out(inputs.size());
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    Point p(1);
    p[0] = inputs[n][static_cast<Eigen::Index>(coord)];
    out[n] = std::move(p);
  }
  return out;
}

}  // namespace

PreparedProblem build_spam_problem(const TrainingSet& data,
                                   const std::vector<KernelSpec>& coord_kernels) {
  check_training_set(data, false);
  const std::size_t dim = static_cast<std::size_t>(data.inputs.front().size());
  if (coord_kernels.size() != dim)
    throw std::invalid_argument("need one kernel per input coordinate");
  PreparedProblem out;
  out.kind = ModelKind::Spam;
  out.z = data.targets;
  out.n_samples = data.inputs.size();
  for (std::size_t i = 0; i < dim; ++i) {
    const GramMatrix g = gram(coord_kernels[i], coordinate_slice(data.inputs, i),
                              JitterPolicy::None);
    ComponentInfo info(coord_kernels[i]);
    info.coord = i;
    push_reduced_block(out, low_rank_sym(g.entries), Eigen::VectorXd(), info);
  }
  return out;
}

PreparedProblem build_mkl_problem(const TrainingSet& data,
                                  const std::vector<KernelSpec>& kernel_dict) {
  check_training_set(data, false);
  if (kernel_dict.empty()) throw std::invalid_argument("empty kernel dictionary");
  PreparedProblem out;
  out.kind = ModelKind::Mkl;
  out.z = data.targets;
  out.n_samples = data.inputs.size();
  for (std::size_t r = 0; r < kernel_dict.size(); ++r) {
    const GramMatrix g = gram(kernel_dict[r], data.inputs, JitterPolicy::None);
    ComponentInfo info(kernel_dict[r]);
    info.kernel_slot = r;
    push_reduced_block(out, low_rank_sym(g.entries), Eigen::VectorXd(), info);
  }
  return out;
}

PreparedProblem build_nbp_problem(const TrainingSet& data, const BasisSet& bases,
                                  const std::vector<KernelSpec>& kernels) {
  check_training_set(data, true);
  if (bases.empty()) throw std::invalid_argument("empty basis set");
  if (kernels.empty()) throw std::invalid_argument("empty kernel list");
  const std::size_t n = data.inputs.size();

  std::vector<Eigen::VectorXd> columns(bases.size());
  std::vector<bool> active(bases.size(), false);
  for (std::size_t i = 0; i < bases.size(); ++i) {
    Eigen::VectorXd d(n);
    for (std::size_t s = 0; s < n; ++s) {
      d[static_cast<Eigen::Index>(s)] = bases[i].fn(data.aux[static_cast<Eigen::Index>(s)]);
    }
    if (!d.allFinite())
      throw std::invalid_argument("basis '" + bases[i].name + "' not finite at a training point");
    columns[i] = std::move(d);
    active[i] = !columns[i].isZero(0.0);
  }

  PreparedProblem out;
  out.kind = ModelKind::Nbp;
  out.z = data.targets;
  out.bases = bases;
  out.n_samples = n;
  std::vector<LowRankSym> factors;
  factors.reserve(kernels.size());
  for (const KernelSpec& spec : kernels) {
    factors.push_back(low_rank_sym(gram(spec, data.inputs, JitterPolicy::None).entries));
  }
  for (std::size_t i = 0; i < bases.size(); ++i) {
    if (!active[i]) {
      std::cerr << "warning: basis '" << bases[i].name
                << "' vanishes at every training point; block dropped\n";
      out.dropped_bases.push_back(i);
      continue;
    }
    for (std::size_t r = 0; r < kernels.size(); ++r) {
      ComponentInfo info(kernels[r]);
      info.basis = i;
      info.kernel_slot = r;
      push_reduced_block(out, factors[r], columns[i], info);
    }
  }
  if (out.blocks.empty())
    throw std::invalid_argument("every basis vanishes at the training points");
  return out;
}

AdditiveModel fit_prepared(const PreparedProblem& prepared, const TrainingSet& data,
                           double mu, const SolveOptions& options) {
  BlockProblem problem;
  problem.z = prepared.z;
  problem.blocks = prepared.blocks;
  problem.mu = mu;
  const BlockSolution sol = solve_bcd(problem, options);

  AdditiveModel model;
  model.kind = prepared.kind;
  model.mu = mu;
  model.anchors = data.inputs;
  model.aux = data.aux;
  model.components = prepared.components;
  model.bases = prepared.bases;
  model.support = sol.support;
  model.objective = sol.objective;
  model.certificate = sol.certificate;
  model.sweeps = sol.sweeps;
  model.converged = sol.converged;

  const Eigen::Index n = prepared.z.size();
  model.fitted = Eigen::VectorXd::Zero(n);
  model.gammas.resize(prepared.blocks.size());
  for (std::size_t j = 0; j < prepared.blocks.size(); ++j) {
    if (sol.gammas[j].isZero(0.0)) {
      model.gammas[j] = Eigen::VectorXd::Zero(n);
    } else {
      model.gammas[j] = prepared.recover[j] * sol.gammas[j];
      model.fitted += prepared.blocks[j].design * sol.gammas[j];
    }
  }
  return model;
}

AdditiveModel fit_spam(const TrainingSet& data, const std::vector<KernelSpec>& coord_kernels,
                       double mu, const SolveOptions& options) {
  return fit_prepared(build_spam_problem(data, coord_kernels), data, mu, options);
}

AdditiveModel fit_mkl(const TrainingSet& data, const std::vector<KernelSpec>& kernel_dict,
                      double mu, const SolveOptions& options) {
  return fit_prepared(build_mkl_problem(data, kernel_dict), data, mu, options);
}

AdditiveModel fit_nbp(const TrainingSet& data, const BasisSet& bases,
                      const std::vector<KernelSpec>& kernels, double mu,
                      const SolveOptions& options) {
  return fit_prepared(build_nbp_problem(data, bases, kernels), data, mu, options);
}

double predict_component(const AdditiveModel& model, std::size_t component, const Point& x) {
  if (component >= model.components.size())
    throw std::invalid_argument("component index out of range");
  const ComponentInfo& info = model.components[component];
  const Eigen::VectorXd& g = model.gammas[component];
  if (g.isZero(0.0)) return 0.0;
  double value = 0.0;
  if (model.kind == ModelKind::Spam) {
    Point xi(1), ai(1);
    xi[0] = x[static_cast<Eigen::Index>(info.coord)];
    for (std::size_t n = 0; n < model.anchors.size(); ++n) {
      ai[0] = model.anchors[n][static_cast<Eigen::Index>(info.coord)];
      value += g[static_cast<Eigen::Index>(n)] * eval_kernel(info.kernel, ai, xi);
    }
  } else {
    for (std::size_t n = 0; n < model.anchors.size(); ++n) {
      value += g[static_cast<Eigen::Index>(n)] * eval_kernel(info.kernel, model.anchors[n], x);
    }
  }
  return value;
}

double predict(const AdditiveModel& model, const Point& x) {
  if (model.kind == ModelKind::Nbp)
    throw std::invalid_argument("basis-expansion model needs the aux coordinate");
  double value = 0.0;
  for (std::size_t j : model.support) value += predict_component(model, j, x);
  return value;
}

double predict(const AdditiveModel& model, const Point& x, double y) {
  if (model.kind != ModelKind::Nbp)
    throw std::invalid_argument("aux coordinate only applies to basis-expansion models");
  double value = 0.0;
  for (std::size_t j : model.support) {
    const double b = model.bases[model.components[j].basis].fn(y);
    if (b != 0.0) value += b * predict_component(model, j, x);
  }
  return value;
}

std::vector<std::size_t> support(const AdditiveModel& model, double tol) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < model.gammas.size(); ++j) {
    if (model.gammas[j].norm() > tol) out.push_back(j);
  }
  return out;
}

double critical_mu(const PreparedProblem& prepared) {
  BcdSolver solver(prepared.z, prepared.blocks);
  return solver.critical_mu();
}

std::vector<double> default_mu_grid(double data_scale, std::size_t count) {
  if (!(data_scale > 0.0) || !std::isfinite(data_scale))
    throw std::invalid_argument("data scale must be positive");
  if (count < 2) throw std::invalid_argument("grid needs at least 2 points");
  const double lo = std::log(1e-4 * data_scale);
  const double hi = std::log(1e+2 * data_scale);
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    grid[i] = std::exp(lo + t * (hi - lo));
  }
  return grid;
}

double kfold_cv_error(ModelKind kind, const TrainingSet& data,
                      const std::vector<KernelSpec>& kernels, const BasisSet& bases,
                      double mu, std::size_t folds, Rng& rng,
                      const SolveOptions& options) {
  const std::size_t n = data.inputs.size();
  if (folds < 2 || folds > n) throw std::invalid_argument("fold count out of range");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }

  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    TrainingSet train;
    std::vector<std::size_t> held;
    std::vector<double> train_targets, train_aux;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = order[i];
      if (i % folds == f) {
        held.push_back(idx);
      } else {
        train.inputs.push_back(data.inputs[idx]);
        train_targets.push_back(data.targets[static_cast<Eigen::Index>(idx)]);
        if (data.aux.size() > 0) train_aux.push_back(data.aux[static_cast<Eigen::Index>(idx)]);
      }
    }
    train.targets = Eigen::Map<const Eigen::VectorXd>(train_targets.data(),
                                                      static_cast<Eigen::Index>(train_targets.size()));
    if (!train_aux.empty()) {
      train.aux = Eigen::Map<const Eigen::VectorXd>(train_aux.data(),
                                                    static_cast<Eigen::Index>(train_aux.size()));
    }

    AdditiveModel model;
    switch (kind) {
      case ModelKind::Spam: model = fit_spam(train, kernels, mu, options); break;
      case ModelKind::Mkl: model = fit_mkl(train, kernels, mu, options); break;
      case ModelKind::Nbp: model = fit_nbp(train, bases, kernels, mu, options); break;
    }
    for (std::size_t idx : held) {
      const double truth = data.targets[static_cast<Eigen::Index>(idx)];
      const double pred = kind == ModelKind::Nbp
                              ? predict(model, data.inputs[idx], data.aux[static_cast<Eigen::Index>(idx)])
                              : predict(model, data.inputs[idx]);
      total += (pred - truth) * (pred - truth);
      ++counted;
    }
  }
  return total / static_cast<double>(counted);
}

}  // namespace kbl
