// Command line front end: the three canned experiment studies plus generic
// fit and sweep runs over user-supplied CSV matrices. Exit codes: 0 success,
// 2 config error, 3 non-convergence, 1 anything else.
#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kbl/completion.hpp"
#include "kbl/config.hpp"
#include "kbl/experiments.hpp"
#include "kbl/io.hpp"
#include "kbl/kernels.hpp"
#include "kbl/metrics.hpp"
#include "kbl/report.hpp"
#include "kbl/rng.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNoConverge = 3;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::string format = "csv";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

kbl::OutputFormat format_of(const CommonOpts& opts) {
  return opts.format == "json" ? kbl::OutputFormat::Json : kbl::OutputFormat::Csv;
}

kbl::Config load_config(const CommonOpts& opts) {
  if (opts.config_path.empty()) return kbl::Config::parse_string("", "<defaults>");
  return kbl::Config::parse_file(opts.config_path);
}

// Artifact names are stored relative to the report's directory, matching the
// experiment runners.
void write_matrix_out(const CommonOpts& opts, const std::string& stem,
                      const Eigen::MatrixXd& m, std::vector<std::string>& artifacts) {
  std::string name;
  if (format_of(opts) == kbl::OutputFormat::Csv) {
    name = stem + ".csv";
    kbl::write_matrix_csv(opts.out_dir + "/" + name, m);
  } else {
    name = stem + ".json";
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(std::move(row));
    }
    std::ofstream out(opts.out_dir + "/" + name);
    if (!out) throw std::runtime_error("cannot write " + opts.out_dir + "/" + name);
    out << rows.dump(2) << "\n";
  }
  artifacts.push_back(name);
}

void print_report(const kbl::ExperimentReport& report, const CommonOpts& opts) {
  for (const auto& [name, value] : report.metrics)
    std::cout << name << " = " << kbl::format_value(value) << "\n";
  for (const auto& [name, value] : report.flags)
    std::cout << name << " = " << (value ? "true" : "false") << "\n";
  std::cout << "report: " << opts.out_dir << "/report.json\n";
}

int gate_converged(const kbl::ExperimentReport& report,
                   const std::vector<const char*>& flags) {
  for (const char* f : flags) {
    if (!report.flag(f)) {
      std::cerr << "not converged: flag '" << f << "' is false\n";
      return kExitNoConverge;
    }
  }
  return 0;
}

int run_study(const std::string& which, CommonOpts& opts) {
  kbl::Config cfg = load_config(opts);
  kbl::ExperimentReport report;
  std::vector<const char*> gates;
  if (which == "cartography") {
    kbl::CartographyConfig config = kbl::cartography_config_from(cfg);
    if (opts.seed_set) config.seed = opts.seed;
    cfg.reject_unknown();
    report = kbl::run_cartography(config, opts.out_dir, format_of(opts));
    gates = {"converged"};
  } else if (which == "complete") {
    kbl::CompletionExperimentConfig config = kbl::completion_config_from(cfg);
    if (opts.seed_set) config.seed = opts.seed;
    cfg.reject_unknown();
    report = kbl::run_completion_experiment(config, opts.out_dir, format_of(opts));
    gates = {"kmc_converged", "svt_converged"};
  } else {
    kbl::TrafficExperimentConfig config = kbl::traffic_config_from(cfg);
    if (opts.seed_set) config.seed = opts.seed;
    cfg.reject_unknown();
    report = kbl::run_traffic_experiment(config, opts.out_dir, format_of(opts));
    gates = {"kmc_converged"};
  }
  print_report(report, opts);
  return gate_converged(report, gates);
}

// ---------------------------------------------------------------------------
// fit / sweep plumbing

std::uint64_t seed_of(kbl::Config& cfg, const CommonOpts& opts) {
  const auto from_cfg = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  return opts.seed_set ? opts.seed : from_cfg;
}

kbl::MaskedMatrix load_masked(kbl::Config& cfg) {
  kbl::MaskedMatrix data;
  data.z = kbl::read_matrix_csv(cfg.get_string("z"));
  if (cfg.has("mask"))
    data.w = kbl::read_matrix_csv(cfg.get_string("mask"));
  else
    data.w = Eigen::MatrixXd::Ones(data.z.rows(), data.z.cols());
  return data;
}

Eigen::MatrixXd load_prior(kbl::Config& cfg, const std::string& key, Eigen::Index dim) {
  if (cfg.has(key)) return kbl::read_matrix_csv(cfg.get_string(key));
  return Eigen::MatrixXd::Identity(dim, dim);
}

double observed_rmse(const kbl::MaskedMatrix& data, const Eigen::MatrixXd& zhat) {
  const double nobs = data.w.sum();
  if (nobs <= 0.0) return 0.0;
  const Eigen::MatrixXd diff = (zhat - data.z).cwiseProduct(data.w);
  return std::sqrt(diff.squaredNorm() / nobs);
}

kbl::KernelSpec kernel_from(kbl::Config& cfg) {
  const std::string name = cfg.get_string("kernel", "rbf");
  if (name == "rbf") return kbl::KernelSpec::gaussian_rbf(cfg.get_double("width"));
  if (name == "linear") return kbl::KernelSpec::linear();
  if (name == "poly") return kbl::KernelSpec::polynomial(cfg.get_int("degree"));
  if (name == "sinc") return kbl::KernelSpec::sinc();
  if (name == "delta") return kbl::KernelSpec::kronecker_delta();
  throw std::invalid_argument("unknown kernel '" + name + "'");
}

struct TrainTable {
  std::vector<kbl::Point> inputs;
  Eigen::VectorXd targets;
};

// Feature columns followed by one target column.
TrainTable load_train_table(const std::string& path) {
  const Eigen::MatrixXd table = kbl::read_matrix_csv(path);
  if (table.cols() < 2)
    throw std::invalid_argument("training table needs feature columns plus a target column");
  const Eigen::Index d = table.cols() - 1;
  TrainTable out;
  out.inputs.reserve(static_cast<std::size_t>(table.rows()));
  for (Eigen::Index i = 0; i < table.rows(); ++i)
    out.inputs.push_back(table.row(i).head(d).transpose());
  out.targets = table.col(d);
  return out;
}

void finish(kbl::ExperimentReport& report, const CommonOpts& opts) {
  report.timing_seconds = 0.0;
  kbl::write_report(opts.out_dir + "/report.json", report);
  print_report(report, opts);
}

int fit_masked(kbl::Config& cfg, CommonOpts& opts) {
  const kbl::MaskedMatrix data = load_masked(cfg);
  const int rank = cfg.get_int("rank");
  const double mu = cfg.get_double("mu");
  if (mu <= 0.0) throw std::invalid_argument("mu must be positive");
  const double lambda = cfg.get_double("lambda", 0.0);
  if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  const int max_sweeps = cfg.get_int("max_sweeps", 500);
  const std::uint64_t seed = seed_of(cfg, opts);
  const Eigen::MatrixXd r_c = load_prior(cfg, "prior_c", data.z.rows());
  const Eigen::MatrixXd r_b = load_prior(cfg, "prior_b", data.z.cols());
  cfg.reject_unknown();

  const kbl::PriorPair priors = kbl::make_priors(r_c, r_b, mu);
  const kbl::CompletionResult res =
      lambda > 0.0 ? kbl::kdl_fit(data, priors, rank, mu, lambda, -1.0, max_sweeps, seed)
                   : kbl::kmc_fit(data, priors, rank, -1.0, max_sweeps, seed);

  kbl::ExperimentReport report;
  report.experiment = "fit";
  report.add_metric("mu", mu);
  report.add_metric("lambda", lambda);
  report.add_metric("rank", rank);
  report.add_metric("sweeps", res.sweeps);
  report.add_metric("final_cost", res.cost_trace.back());
  report.add_metric("observed_rmse", observed_rmse(data, res.zhat));
  if (lambda > 0.0) {
    const double zeros = static_cast<double>(
        (res.factors.c.array() == 0.0).count());
    report.add_metric("c_zero_frac", zeros / static_cast<double>(res.factors.c.size()));
  }
  report.add_flag("converged", res.converged);

  Eigen::MatrixXd trace(static_cast<Eigen::Index>(res.cost_trace.size()), 1);
  for (Eigen::Index i = 0; i < trace.rows(); ++i)
    trace(i, 0) = res.cost_trace[static_cast<std::size_t>(i)];
  write_matrix_out(opts, "zhat", res.zhat, report.artifacts);
  write_matrix_out(opts, "factor_c", res.factors.c, report.artifacts);
  write_matrix_out(opts, "factor_b", res.factors.b, report.artifacts);
  write_matrix_out(opts, "cost_trace", trace, report.artifacts);
  finish(report, opts);
  return res.converged ? 0 : kExitNoConverge;
}

int fit_ridge(kbl::Config& cfg, CommonOpts& opts) {
  const TrainTable train = load_train_table(cfg.get_string("train"));
  const kbl::KernelSpec spec = kernel_from(cfg);
  const double mu = cfg.get_double("mu");
  const bool want_predict = cfg.has("predict");
  const std::string predict_path = want_predict ? cfg.get_string("predict") : "";
  cfg.reject_unknown();

  const kbl::GramMatrix g = kbl::gram(spec, train.inputs);
  const Eigen::VectorXd alpha = kbl::ridge_solve(g, train.targets, mu);
  const Eigen::VectorXd yhat = g.entries * alpha;
  const double n = static_cast<double>(train.targets.size());
  const double train_rmse = std::sqrt((yhat - train.targets).squaredNorm() / n);

  kbl::ExperimentReport report;
  report.experiment = "fit";
  report.add_metric("mu", mu);
  report.add_metric("n_train", n);
  report.add_metric("train_rmse", train_rmse);
  report.add_metric("rkhs_norm_sq", kbl::rkhs_norm_sq(g, alpha));
  report.add_metric("gram_jitter", g.jitter);
  report.add_flag("converged", true);

  write_matrix_out(opts, "alpha", alpha, report.artifacts);
  if (want_predict) {
    const Eigen::MatrixXd xs = kbl::read_matrix_csv(predict_path);
    if (xs.cols() != train.inputs.front().size())
      throw std::invalid_argument("predict table feature count differs from training");
    Eigen::MatrixXd preds(xs.rows(), 1);
    for (Eigen::Index i = 0; i < xs.rows(); ++i) {
      const kbl::Point x = xs.row(i).transpose();
      preds(i, 0) = kbl::kernel_vector(spec, train.inputs, x).dot(alpha);
    }
    write_matrix_out(opts, "predictions", preds, report.artifacts);
  }
  finish(report, opts);
  return 0;
}

int run_fit(CommonOpts& opts) {
  kbl::Config cfg = load_config(opts);
  const std::string method = cfg.get_string("method");
  if (method == "kmc") return fit_masked(cfg, opts);
  if (method == "ridge") return fit_ridge(cfg, opts);
  throw std::invalid_argument("unknown fit method '" + method + "' (want kmc or ridge)");
}

int sweep_masked(kbl::Config& cfg, CommonOpts& opts, const std::string& method) {
  const kbl::MaskedMatrix data = load_masked(cfg);
  const bool have_truth = cfg.has("truth");
  Eigen::MatrixXd truth;
  if (have_truth) {
    truth = kbl::read_matrix_csv(cfg.get_string("truth"));
    if (truth.rows() != data.z.rows() || truth.cols() != data.z.cols())
      throw std::invalid_argument("truth shape differs from the data");
  }
  const Eigen::MatrixXd wbar = Eigen::MatrixXd::Ones(data.w.rows(), data.w.cols()) - data.w;
  const bool any_hidden = wbar.sum() > 0.0;

  const std::vector<double> grid = cfg.get_doubles("mu_grid");
  if (grid.empty()) throw std::invalid_argument("mu_grid is empty");
  for (const double g : grid)
    if (g <= 0.0) throw std::invalid_argument("mu_grid entries must be positive");
  const int rank = method == "kmc" ? cfg.get_int("rank") : 0;
  const int max_sweeps = cfg.get_int("max_sweeps", 500);
  const std::uint64_t seed = seed_of(cfg, opts);
  Eigen::MatrixXd r_c, r_b;
  if (method == "kmc") {
    r_c = load_prior(cfg, "prior_c", data.z.rows());
    r_b = load_prior(cfg, "prior_b", data.z.cols());
  }
  cfg.reject_unknown();

  const int cols = have_truth ? 5 : 4;
  Eigen::MatrixXd table(static_cast<Eigen::Index>(grid.size()), cols);
  double best_metric = std::numeric_limits<double>::infinity();
  double best_mu = grid.front();
  bool best_converged = false;
  bool all_converged = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double mu = grid[i];
    Eigen::MatrixXd zhat;
    double iters = 0.0;
    bool converged = false;
    if (method == "kmc") {
      const kbl::PriorPair priors = kbl::make_priors(r_c, r_b, mu);
      const kbl::CompletionResult res =
          kbl::kmc_fit(data, priors, rank, -1.0, max_sweeps, seed);
      zhat = res.zhat;
      iters = res.sweeps;
      converged = res.converged;
    } else {
      const kbl::SvtResult res = kbl::svt_oracle(data, mu);
      zhat = res.zhat;
      iters = res.iterations;
      converged = res.converged;
    }
    const auto row = static_cast<Eigen::Index>(i);
    table(row, 0) = mu;
    table(row, 1) = observed_rmse(data, zhat);
    double score = table(row, 1);
    if (have_truth) {
      // hidden-entry recovery when the mask hides anything, whole matrix else
      const kbl::RecoveryError err =
          kbl::metric_recovery_db(zhat, truth, any_hidden ? wbar : data.w);
      table(row, 2) = err.db;
      score = err.db;
    }
    table(row, cols - 2) = iters;
    table(row, cols - 1) = converged ? 1.0 : 0.0;
    all_converged = all_converged && converged;
    if (score < best_metric) {
      best_metric = score;
      best_mu = mu;
      best_converged = converged;
    }
  }

  kbl::ExperimentReport report;
  report.experiment = "sweep";
  report.add_metric("n_points", static_cast<double>(grid.size()));
  report.add_metric("best_mu", best_mu);
  report.add_metric(have_truth ? "best_recovery_db" : "best_observed_rmse", best_metric);
  report.add_flag("all_converged", all_converged);
  report.add_flag("best_converged", best_converged);
  write_matrix_out(opts, "sweep", table, report.artifacts);
  finish(report, opts);
  return best_converged ? 0 : kExitNoConverge;
}

int sweep_kdl(kbl::Config& cfg, CommonOpts& opts) {
  const kbl::MaskedMatrix data = load_masked(cfg);
  const std::vector<double> grid = cfg.get_doubles("lambda_grid");
  if (grid.empty()) throw std::invalid_argument("lambda_grid is empty");
  for (const double g : grid)
    if (g < 0.0) throw std::invalid_argument("lambda_grid entries must be nonnegative");
  const int rank = cfg.get_int("rank");
  const double mu = cfg.get_double("mu");
  if (mu <= 0.0) throw std::invalid_argument("mu must be positive");
  const int max_sweeps = cfg.get_int("max_sweeps", 500);
  const std::uint64_t seed = seed_of(cfg, opts);
  const Eigen::MatrixXd r_c = load_prior(cfg, "prior_c", data.z.rows());
  const Eigen::MatrixXd r_b = load_prior(cfg, "prior_b", data.z.cols());
  cfg.reject_unknown();

  const kbl::PriorPair priors = kbl::make_priors(r_c, r_b, mu);
  Eigen::MatrixXd table(static_cast<Eigen::Index>(grid.size()), 5);
  bool all_converged = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const kbl::CompletionResult res =
        kbl::kdl_fit(data, priors, rank, mu, grid[i], -1.0, max_sweeps, seed);
    const auto row = static_cast<Eigen::Index>(i);
    const double zeros = static_cast<double>((res.factors.c.array() == 0.0).count());
    table(row, 0) = grid[i];
    table(row, 1) = res.cost_trace.back();
    table(row, 2) = zeros / static_cast<double>(res.factors.c.size());
    table(row, 3) = res.sweeps;
    table(row, 4) = res.converged ? 1.0 : 0.0;
    all_converged = all_converged && res.converged;
  }

  kbl::ExperimentReport report;
  report.experiment = "sweep";
  report.add_metric("n_points", static_cast<double>(grid.size()));
  report.add_metric("mu", mu);
  report.add_flag("all_converged", all_converged);
  write_matrix_out(opts, "sweep", table, report.artifacts);
  finish(report, opts);
  return all_converged ? 0 : kExitNoConverge;
}

int sweep_ridge(kbl::Config& cfg, CommonOpts& opts) {
  const TrainTable full = load_train_table(cfg.get_string("train"));
  const kbl::KernelSpec spec = kernel_from(cfg);
  const std::vector<double> grid = cfg.get_doubles("mu_grid");
  if (grid.empty()) throw std::invalid_argument("mu_grid is empty");
  for (const double g : grid)
    if (g <= 0.0) throw std::invalid_argument("mu_grid entries must be positive");
  const double holdout = cfg.get_double("holdout", 0.0);
  if (holdout < 0.0 || holdout >= 1.0)
    throw std::invalid_argument("holdout must lie in [0, 1)");
  const std::uint64_t seed = seed_of(cfg, opts);
  cfg.reject_unknown();

  const auto n = static_cast<int>(full.inputs.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  kbl::Rng rng(seed);
  for (int i = 0; i + 1 < n; ++i) {
    const int j = rng.uniform_int(i, n - 1);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  const int n_hold = static_cast<int>(holdout * n);
  const int n_train = n - n_hold;
  if (n_train < 1) throw std::invalid_argument("holdout leaves no training rows");

  std::vector<kbl::Point> train_x;
  Eigen::VectorXd train_y(n_train);
  for (int i = 0; i < n_train; ++i) {
    train_x.push_back(full.inputs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    train_y[i] = full.targets[order[static_cast<std::size_t>(i)]];
  }
  const kbl::GramMatrix g = kbl::gram(spec, train_x);

  const int cols = n_hold > 0 ? 4 : 3;
  Eigen::MatrixXd table(static_cast<Eigen::Index>(grid.size()), cols);
  double best_metric = std::numeric_limits<double>::infinity();
  double best_mu = grid.front();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double mu = grid[i];
    const Eigen::VectorXd alpha = kbl::ridge_solve(g, train_y, mu);
    const Eigen::VectorXd yhat = g.entries * alpha;
    const double train_rmse =
        std::sqrt((yhat - train_y).squaredNorm() / static_cast<double>(n_train));
    const auto row = static_cast<Eigen::Index>(i);
    table(row, 0) = mu;
    table(row, 1) = train_rmse;
    double score = train_rmse;
    if (n_hold > 0) {
      double sq = 0.0;
      for (int k = n_train; k < n; ++k) {
        const int idx = order[static_cast<std::size_t>(k)];
        const kbl::Point& x = full.inputs[static_cast<std::size_t>(idx)];
        const double pred = kbl::kernel_vector(spec, train_x, x).dot(alpha);
        const double diff = pred - full.targets[idx];
        sq += diff * diff;
      }
      table(row, 2) = std::sqrt(sq / n_hold);
      score = table(row, 2);
    }
    table(row, cols - 1) = kbl::rkhs_norm_sq(g, alpha);
    if (score < best_metric) {
      best_metric = score;
      best_mu = mu;
    }
  }

  kbl::ExperimentReport report;
  report.experiment = "sweep";
  report.add_metric("n_points", static_cast<double>(grid.size()));
  report.add_metric("n_train", n_train);
  report.add_metric("n_holdout", n_hold);
  report.add_metric("best_mu", best_mu);
  report.add_metric(n_hold > 0 ? "best_holdout_rmse" : "best_train_rmse", best_metric);
  report.add_flag("all_converged", true);
  report.add_flag("best_converged", true);
  write_matrix_out(opts, "sweep", table, report.artifacts);
  finish(report, opts);
  return 0;
}

int run_sweep(CommonOpts& opts) {
  kbl::Config cfg = load_config(opts);
  const std::string method = cfg.get_string("method");
  if (method == "kmc" || method == "svt") return sweep_masked(cfg, opts, method);
  if (method == "kdl") return sweep_kdl(cfg, opts);
  if (method == "ridge") return sweep_ridge(cfg, opts);
  throw std::invalid_argument("unknown sweep method '" + method +
                              "' (want kmc, svt, kdl, or ridge)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse kernel based learning toolkit"};
  app.require_subcommand(1);
  CommonOpts opts;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* config_opt =
        sub->add_option("--config", opts.config_path, "key = value config file");
    if (config_required) config_opt->required();
    auto* seed_opt = sub->add_option("--seed", opts.seed, "override the config seed");
    sub->add_option("--out", opts.out_dir, "output directory (default: current)");
    sub->add_option("--format", opts.format, "matrix artifact format")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->parse_complete_callback([&opts, seed_opt] { opts.seed_set = seed_opt->count() > 0; });
    return sub;
  };

  CLI::App* carto = add_common(
      app.add_subcommand("cartography", "spectrum map study: sources, fit, support"),
      false);
  CLI::App* complete = add_common(
      app.add_subcommand("complete", "masked matrix completion study with priors"),
      false);
  CLI::App* traffic = add_common(
      app.add_subcommand("traffic", "link load prediction study vs per-link kriging"),
      false);
  CLI::App* fit = add_common(
      app.add_subcommand("fit", "fit one model to CSV data (method = kmc or ridge)"),
      true);
  CLI::App* sweep = add_common(
      app.add_subcommand("sweep", "regularization grid over CSV data, one row per point"),
      true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    std::filesystem::create_directories(opts.out_dir);
    if (carto->parsed()) return run_study("cartography", opts);
    if (complete->parsed()) return run_study("complete", opts);
    if (traffic->parsed()) return run_study("traffic", opts);
    if (fit->parsed()) return run_fit(opts);
    if (sweep->parsed()) return run_sweep(opts);
    return 1;  // unreachable: a subcommand is required
  } catch (const kbl::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
