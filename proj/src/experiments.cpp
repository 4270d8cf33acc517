#include "kbl/experiments.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "kbl/io.hpp"
#include "kbl/metrics.hpp"

namespace kbl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string format_int(long v) { return std::to_string(v); }

// Artifact names are recorded relative to the report's own directory so that
// identical runs into different directories produce identical reports.
std::string write_matrix_artifact(const std::string& out_dir, const std::string& stem,
                                  const Eigen::MatrixXd& m, OutputFormat format,
                                  std::vector<std::string>& artifacts) {
  if (out_dir.empty()) return {};
  std::string name;
  if (format == OutputFormat::Csv) {
    name = stem + ".csv";
    write_matrix_csv(out_dir + "/" + name, m);
  } else {
    name = stem + ".json";
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(std::move(row));
    }
    std::ofstream out(out_dir + "/" + name);
    if (!out) throw std::runtime_error("cannot write " + out_dir + "/" + name);
    out << rows.dump(2) << "\n";
  }
  artifacts.push_back(name);
  return name;
}

void finish_report(ExperimentReport& report, const std::string& out_dir,
                   Clock::time_point t0) {
  report.timing_seconds = seconds_since(t0);
  if (!out_dir.empty()) write_report(out_dir + "/report.json", report);
}

void ensure_out_dir(const std::string& out_dir) {
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
}

std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2)
    throw std::invalid_argument("log_grid: bad range");
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double step = std::log(hi / lo) / (count - 1);
  for (int i = 0; i < count; ++i)
    grid[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
  return grid;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double ma = a.mean(), mb = b.mean();
  const Eigen::VectorXd da = a.array() - ma, db = b.array() - mb;
  const double den = da.norm() * db.norm();
  if (den == 0.0) return 0.0;
  return da.dot(db) / den;
}

std::vector<int> full_shuffle(int n, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i + 1 < n; ++i) {
    const int j = rng.uniform_int(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

TrainingSet subset_training(const TrainingSet& data, const std::vector<int>& idx) {
  TrainingSet out;
  out.inputs.reserve(idx.size());
  out.targets.resize(static_cast<Eigen::Index>(idx.size()));
  if (data.aux.size() > 0) out.aux.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Eigen::Index i = idx[k];
    out.inputs.push_back(data.inputs[static_cast<std::size_t>(i)]);
    out.targets[static_cast<Eigen::Index>(k)] = data.targets[i];
    if (data.aux.size() > 0) out.aux[static_cast<Eigen::Index>(k)] = data.aux[i];
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentReport run_cartography(const CartographyConfig& config,
                                 const std::string& out_dir, OutputFormat format) {
  const auto t0 = Clock::now();
  if (!(config.holdout_frac >= 0.0 && config.holdout_frac < 1.0))
    throw std::invalid_argument("run_cartography: holdout_frac outside [0,1)");
  ensure_out_dir(out_dir);

  const RfField field = gen_rf_field(config);
  const std::vector<RfSource>& sources = config.sources;
  std::set<std::size_t> source_bands;
  for (const RfSource& s : sources) source_bands.insert(static_cast<std::size_t>(s.band));

  const int n_samples = static_cast<int>(field.data.targets.size());
  Rng rng(config.seed + 1);
  const std::vector<int> order = full_shuffle(n_samples, rng);
  const int n_hold = static_cast<int>(std::lround(config.holdout_frac * n_samples));
  std::vector<int> hold_idx(order.begin(), order.begin() + n_hold);
  std::vector<int> train_idx(order.begin() + n_hold, order.end());
  std::sort(hold_idx.begin(), hold_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  const TrainingSet train = subset_training(field.data, train_idx);

  const BasisSet bases = hann_bases(field.freqs, field.centers, field.width);
  std::vector<KernelSpec> kernels;
  for (double w : config.kernel_widths) kernels.push_back(KernelSpec::gaussian_rbf(w));

  const PreparedProblem prepared = build_nbp_problem(train, bases, kernels);
  const std::vector<double> mu_grid =
      config.mu_grid.empty() ? default_mu_grid(critical_mu(prepared)) : config.mu_grid;

  const int gs = config.grid_side;
  auto holdout_mse = [&](const AdditiveModel& model) {
    const std::vector<int>& eval_idx = hold_idx.empty() ? train_idx : hold_idx;
    double sum = 0.0;
    for (int i : eval_idx) {
      const double pred = predict(model, field.data.inputs[static_cast<std::size_t>(i)],
                                  field.data.aux[i]);
      const double d = pred - field.data.targets[i];
      sum += d * d;
    }
    return sum / static_cast<double>(eval_idx.size());
  };
  auto active_bands = [&](const AdditiveModel& model) {
    std::set<std::size_t> bands;
    for (std::size_t comp : model.support)
      bands.insert(model.components[comp].basis + 1);
    return bands;
  };
  auto band_fit_map = [&](const AdditiveModel& model, std::size_t band) {
    Eigen::MatrixXd fit_map = Eigen::MatrixXd::Zero(gs, gs);
    for (std::size_t comp = 0; comp < model.components.size(); ++comp) {
      if (model.components[comp].basis + 1 != band) continue;
      if (model.gammas[comp].isZero(0.0)) continue;
      for (int ix = 0; ix < gs; ++ix)
        for (int iy = 0; iy < gs; ++iy)
          fit_map(ix, iy) += predict_component(
              model, comp,
              field.grid[static_cast<std::size_t>(ix) * static_cast<std::size_t>(gs) +
                         static_cast<std::size_t>(iy)]);
    }
    return fit_map;
  };
  auto min_source_corr = [&](const AdditiveModel& model) {
    double corr_min = std::numeric_limits<double>::infinity();
    for (std::size_t band : source_bands) {
      const Eigen::MatrixXd fit_map = band_fit_map(model, band);
      const Eigen::MatrixXd& truth = field.truth_maps[band - 1];
      const Eigen::VectorXd fit_flat =
          Eigen::Map<const Eigen::VectorXd>(fit_map.data(), fit_map.size());
      const Eigen::VectorXd truth_flat =
          Eigen::Map<const Eigen::VectorXd>(truth.data(), truth.size());
      corr_min = std::min(corr_min, pearson(fit_flat, truth_flat));
    }
    return corr_min;
  };

  Eigen::MatrixXd sweep(static_cast<Eigen::Index>(mu_grid.size()),
                        3 + static_cast<Eigen::Index>(config.n_bands));
  AdditiveModel best_model;      // lowest held-out error
  double best_mse = std::numeric_limits<double>::infinity();
  double best_mu = 0.0;
  AdditiveModel exact_model;     // lowest held-out error among exact-support fits
  double exact_mse = std::numeric_limits<double>::infinity();
  double exact_mu = 0.0;
  bool exact_found = false;
  double corr_best_exact = -std::numeric_limits<double>::infinity();
  double corr_best_exact_mu = 0.0;
  for (std::size_t k = 0; k < mu_grid.size(); ++k) {
    const double mu = mu_grid[k];
    AdditiveModel model = fit_prepared(prepared, train, mu);
    const double mse = holdout_mse(model);
    const std::set<std::size_t> bands = active_bands(model);
    const Eigen::Index row = static_cast<Eigen::Index>(k);
    sweep(row, 0) = mu;
    sweep(row, 1) = mse;
    sweep(row, 2) = static_cast<double>(bands.size());
    for (int b = 1; b <= config.n_bands; ++b)
      sweep(row, 2 + b) = bands.count(static_cast<std::size_t>(b)) ? 1.0 : 0.0;
    if (mse < best_mse) {
      best_mse = mse;
      best_mu = mu;
      best_model = model;
    }
    if (bands == source_bands) {
      const double corr_here = min_source_corr(model);
      if (corr_here > corr_best_exact) {
        corr_best_exact = corr_here;
        corr_best_exact_mu = mu;
      }
      if (mse < exact_mse) {
        exact_mse = mse;
        exact_mu = mu;
        exact_model = std::move(model);
        exact_found = true;
      }
    }
  }

  const AdditiveModel& report_model = exact_found ? exact_model : best_model;
  const double report_mu = exact_found ? exact_mu : best_mu;

  ExperimentReport report;
  report.experiment = "cartography";
  report.add_metric("n_samples", n_samples);
  report.add_metric("n_train", static_cast<double>(train_idx.size()));
  report.add_metric("n_mu", static_cast<double>(mu_grid.size()));
  report.add_metric("best_mu", best_mu);
  report.add_metric("best_holdout_mse", best_mse);
  report.add_metric("report_mu", report_mu);
  report.add_metric("n_active_report",
                    static_cast<double>(active_bands(report_model).size()));
  report.add_flag("support_exact", exact_found);
  report.add_flag("converged", report_model.converged);

  // per-band spatial maps at the reporting fit
  std::vector<std::string> artifacts;
  double corr_min = std::numeric_limits<double>::infinity();
  for (std::size_t band : source_bands) {
    const Eigen::MatrixXd fit_map = band_fit_map(report_model, band);
    const Eigen::MatrixXd& truth = field.truth_maps[band - 1];
    const Eigen::VectorXd fit_flat =
        Eigen::Map<const Eigen::VectorXd>(fit_map.data(), fit_map.size());
    const Eigen::VectorXd truth_flat =
        Eigen::Map<const Eigen::VectorXd>(truth.data(), truth.size());
    const double corr = pearson(fit_flat, truth_flat);
    report.add_metric("corr_band_" + std::to_string(band), corr);
    corr_min = std::min(corr_min, corr);
    const std::string tag = std::to_string(band);
    write_matrix_artifact(out_dir, "map_truth_band" + tag, truth, format, artifacts);
    write_matrix_artifact(out_dir, "map_fit_band" + tag, fit_map, format, artifacts);
  }
  if (!source_bands.empty()) report.add_metric("corr_min_sources", corr_min);
  if (exact_found && !source_bands.empty()) {
    // best min-band correlation over the exact-support slice of the sweep
    report.add_metric("corr_min_best_exact", corr_best_exact);
    report.add_metric("corr_best_exact_mu", corr_best_exact_mu);
  }
  write_matrix_artifact(out_dir, "mu_sweep", sweep, format, artifacts);
  report.artifacts = std::move(artifacts);

  report.config_echo.emplace_back("area_side", format_value(config.area_side));
  report.config_echo.emplace_back("n_radios", format_int(config.n_radios));
  report.config_echo.emplace_back("n_freqs", format_int(config.n_freqs));
  report.config_echo.emplace_back("n_bands", format_int(config.n_bands));
  report.config_echo.emplace_back("pathloss_exp", format_value(config.pathloss_exp));
  report.config_echo.emplace_back("ref_dist", format_value(config.ref_dist));
  report.config_echo.emplace_back("shadow_decorr", format_value(config.shadow_decorr));
  report.config_echo.emplace_back("shadow_var_db", format_value(config.shadow_var_db));
  report.config_echo.emplace_back("noise_var_db", format_value(config.noise_var_db));
  {
    std::ostringstream widths;
    for (std::size_t i = 0; i < config.kernel_widths.size(); ++i)
      widths << (i ? "," : "") << format_value(config.kernel_widths[i]);
    report.config_echo.emplace_back("kernel_widths", widths.str());
  }
  {
    std::ostringstream src;
    for (std::size_t i = 0; i < sources.size(); ++i)
      src << (i ? "; " : "") << format_value(sources[i].position[0]) << ","
          << format_value(sources[i].position[1]) << ",band " << sources[i].band
          << "," << format_value(sources[i].power_db) << " dB";
    report.config_echo.emplace_back("sources", src.str());
  }
  report.config_echo.emplace_back("grid_side", format_int(gs));
  report.config_echo.emplace_back("holdout_frac", format_value(config.holdout_frac));
  report.config_echo.emplace_back("seed", format_int(static_cast<long>(config.seed)));

  finish_report(report, out_dir, t0);
  return report;
}

// ---------------------------------------------------------------------------

namespace {

const char* prior_mode_name(PriorMode mode) {
  switch (mode) {
    case PriorMode::Sample: return "sample";
    case PriorMode::Structural: return "structural";
    case PriorMode::Identity: return "identity";
  }
  return "?";
}

PriorMode prior_mode_from(const std::string& text, const std::string& key,
                          const std::string& source) {
  if (text == "sample") return PriorMode::Sample;
  if (text == "structural") return PriorMode::Structural;
  if (text == "identity") return PriorMode::Identity;
  throw ParseError(source, 0,
                   "key '" + key + "': expected sample|structural|identity, got '" +
                       text + "'");
}

}  // namespace

ExperimentReport run_completion_experiment(const CompletionExperimentConfig& config,
                                           const std::string& out_dir,
                                           OutputFormat format) {
  const auto t0 = Clock::now();
  ensure_out_dir(out_dir);
  const CompletionInstance inst = gen_completion_instance(config);
  const Eigen::Index m = inst.z_true.rows(), n = inst.z_true.cols();
  const int fit_rank = config.fit_rank > 0
                           ? config.fit_rank
                           : std::min<int>(config.rank + 2,
                                           static_cast<int>(std::min(m, n)));

  const bool any_missing = inst.wbar.sum() > 0.0;
  const Eigen::MatrixXd wbar_eval =
      any_missing ? inst.wbar : Eigen::MatrixXd::Ones(m, n);
  const bool has_missing_rows = !inst.missing_rows.empty();

  const double n_obs = inst.observed.w.sum();
  const double mean_sq_obs = inst.observed.z.squaredNorm() / std::max(1.0, n_obs);
  const std::vector<double> mu_grid =
      config.mu_grid.empty() ? default_mu_grid(mean_sq_obs) : config.mu_grid;

  Eigen::MatrixXd kmc_sweep(static_cast<Eigen::Index>(mu_grid.size()), 4);
  CompletionResult kmc_best;
  double kmc_best_db = std::numeric_limits<double>::infinity();
  double kmc_best_mu = 0.0;
  bool kmc_degenerate = false;
  for (std::size_t k = 0; k < mu_grid.size(); ++k) {
    const double mu = mu_grid[k];
    const PriorPair pri = make_priors(inst.r_c, inst.r_b, mu);
    CompletionResult res = kmc_fit(inst.observed, pri, fit_rank, -1.0, 500, config.seed);
    const RecoveryError err = metric_recovery_db(res.zhat, inst.z_true, wbar_eval);
    const Eigen::Index row = static_cast<Eigen::Index>(k);
    kmc_sweep(row, 0) = mu;
    kmc_sweep(row, 1) = err.db;
    kmc_sweep(row, 2) = res.sweeps;
    kmc_sweep(row, 3) = res.converged ? 1.0 : 0.0;
    if (err.db < kmc_best_db) {
      kmc_best_db = err.db;
      kmc_best_mu = mu;
      kmc_best = std::move(res);
      kmc_degenerate = err.degenerate;
    }
  }

  // nuclear-norm reference across its own threshold grid
  const double smax =
      Eigen::BDCSVD<Eigen::MatrixXd>(inst.observed.z).singularValues()[0];
  const std::vector<double> nuc_grid = log_grid(1e-4 * smax, smax, 20);
  Eigen::MatrixXd svt_sweep(static_cast<Eigen::Index>(nuc_grid.size()),
                            has_missing_rows ? 4 : 3);
  SvtResult svt_best;
  double svt_best_db = std::numeric_limits<double>::infinity();
  double svt_best_mu = 0.0;
  double svt_row_db_best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < nuc_grid.size(); ++k) {
    const double mu_nuc = nuc_grid[k];
    SvtResult res = svt_oracle(inst.observed, mu_nuc, 1e-9, 20000);
    const RecoveryError err = metric_recovery_db(res.zhat, inst.z_true, wbar_eval);
    const Eigen::Index row = static_cast<Eigen::Index>(k);
    svt_sweep(row, 0) = mu_nuc;
    svt_sweep(row, 1) = err.db;
    svt_sweep(row, 2) = res.iterations;
    if (has_missing_rows) {
      const RecoveryError row_err =
          metric_recovery_db(res.zhat, inst.z_true, inst.row_missing);
      svt_sweep(row, 3) = row_err.db;
      svt_row_db_best = std::min(svt_row_db_best, row_err.db);
    }
    if (err.db < svt_best_db) {
      svt_best_db = err.db;
      svt_best_mu = mu_nuc;
      svt_best = std::move(res);
    }
  }

  ExperimentReport report;
  report.experiment = "completion";
  report.add_metric("fit_rank", fit_rank);
  report.add_metric("n_missing", inst.wbar.sum());
  report.add_metric("kmc_best_db", kmc_best_db);
  report.add_metric("kmc_best_mu", kmc_best_mu);
  report.add_metric("svt_best_db", svt_best_db);
  report.add_metric("svt_best_mu", svt_best_mu);
  if (has_missing_rows) {
    const RecoveryError kmc_row =
        metric_recovery_db(kmc_best.zhat, inst.z_true, inst.row_missing);
    report.add_metric("kmc_row_db", kmc_row.db);
    report.add_metric("svt_row_db_best", svt_row_db_best);
    report.add_flag("kmc_row_degenerate", kmc_row.degenerate);
  }
  report.add_flag("eval_on_observed", !any_missing);
  report.add_flag("kmc_converged", kmc_best.converged);
  report.add_flag("svt_converged", svt_best.converged);
  report.add_flag("kmc_degenerate", kmc_degenerate);

  std::vector<std::string> artifacts;
  write_matrix_artifact(out_dir, "z_true", inst.z_true, format, artifacts);
  write_matrix_artifact(out_dir, "w", inst.observed.w, format, artifacts);
  write_matrix_artifact(out_dir, "zhat_kmc", kmc_best.zhat, format, artifacts);
  write_matrix_artifact(out_dir, "zhat_svt", svt_best.zhat, format, artifacts);
  write_matrix_artifact(out_dir, "kmc_sweep", kmc_sweep, format, artifacts);
  write_matrix_artifact(out_dir, "svt_sweep", svt_sweep, format, artifacts);
  report.artifacts = std::move(artifacts);

  report.config_echo.emplace_back("m", format_int(config.m));
  report.config_echo.emplace_back("n", format_int(config.n));
  report.config_echo.emplace_back("rank", format_int(config.rank));
  report.config_echo.emplace_back("missing_frac", format_value(config.missing_frac));
  report.config_echo.emplace_back("missing_rows", format_int(config.missing_rows));
  report.config_echo.emplace_back("prior_c", prior_mode_name(config.prior_c));
  report.config_echo.emplace_back("prior_b", prior_mode_name(config.prior_b));
  report.config_echo.emplace_back("replicates", format_int(config.replicates));
  report.config_echo.emplace_back("noise_var", format_value(config.noise_var));
  report.config_echo.emplace_back("row_corr_len", format_value(config.row_corr_len));
  report.config_echo.emplace_back("col_corr_len", format_value(config.col_corr_len));
  report.config_echo.emplace_back("cov_reg", format_value(config.cov_reg));
  report.config_echo.emplace_back("fit_rank", format_int(fit_rank));
  report.config_echo.emplace_back("seed", format_int(static_cast<long>(config.seed)));

  finish_report(report, out_dir, t0);
  return report;
}

// ---------------------------------------------------------------------------

ExperimentReport run_traffic_experiment(const TrafficExperimentConfig& config,
                                        const std::string& out_dir,
                                        OutputFormat format) {
  const auto t0 = Clock::now();
  ensure_out_dir(out_dir);
  const TrafficInstance inst = gen_traffic_instance(config);
  const int slots = static_cast<int>(inst.test.z.rows());
  const int n_links = static_cast<int>(inst.test.z.cols());
  const int half = slots / 2;

  // all-zero loads carry no signal: both predictors output zero, errors are
  // reported in absolute form via the degenerate-denominator path
  const bool signal_free = inst.r_c.trace() <= 0.0 || inst.r_b.trace() <= 0.0;

  const double obs_scale =
      inst.test.z.squaredNorm() / std::max(1.0, inst.test.w.sum());
  const double fit_mu = config.noise_var > 0.0
                            ? config.noise_var
                            : std::max(1e-12, 1e-8 * obs_scale);

  Eigen::MatrixXd zhat_kmc = Eigen::MatrixXd::Zero(slots, n_links);
  Eigen::MatrixXd zhat_lmmse = inst.test.z;
  bool kmc_converged = true;
  double sigma_f2 = 0.0;
  if (!signal_free) {
    const PriorPair pri = make_priors(inst.r_c, inst.r_b, fit_mu);
    sigma_f2 = pri.rescale;
    CompletionResult res =
        kmc_fit(inst.test, pri, config.fit_rank, -1.0, 300, config.seed);
    zhat_kmc = std::move(res.zhat);
    kmc_converged = res.converged;

    // reference: kriging per link from that link's own training-day covariance
    for (int l = 0; l < n_links; ++l) {
      Eigen::MatrixXd k_l = Eigen::MatrixXd::Zero(slots, slots);
      for (const Eigen::MatrixXd& day : inst.train_days)
        k_l += day.col(l) * day.col(l).transpose();
      k_l /= static_cast<double>(inst.train_days.size());
      const GramMatrix g = gram_from_matrix(k_l.topLeftCorner(half, half));
      const Eigen::VectorXd alpha =
          ridge_solve(g, inst.test.z.col(l).head(half), fit_mu);
      zhat_lmmse.col(l).tail(slots - half) =
          k_l.bottomLeftCorner(slots - half, half) * alpha;
    }
  }
  const RelativeError kmc_ep = metric_rel_error(zhat_kmc, inst.z_test_true, inst.wbar);
  const RelativeError lmmse_ep =
      metric_rel_error(zhat_lmmse, inst.z_test_true, inst.wbar);

  ExperimentReport report;
  report.experiment = "traffic";
  report.add_metric("kmc_ep", kmc_ep.value);
  report.add_metric("lmmse_ep", lmmse_ep.value);
  report.add_metric("sigma_f2_matched", sigma_f2);
  report.add_metric("fit_rank", config.fit_rank);
  report.add_metric("n_links", n_links);
  report.add_metric("n_predicted_slots", slots - half);
  report.add_flag("kmc_converged", kmc_converged);
  report.add_flag("degenerate_denominator", kmc_ep.degenerate);

  std::vector<std::string> artifacts;
  write_matrix_artifact(out_dir, "z_test_true", inst.z_test_true, format, artifacts);
  write_matrix_artifact(out_dir, "w", inst.test.w, format, artifacts);
  write_matrix_artifact(out_dir, "zhat_kmc", zhat_kmc, format, artifacts);
  write_matrix_artifact(out_dir, "zhat_lmmse", zhat_lmmse, format, artifacts);
  write_matrix_artifact(out_dir, "routing", inst.routing, format, artifacts);
  report.artifacts = std::move(artifacts);

  report.config_echo.emplace_back("n_links", format_int(n_links));
  report.config_echo.emplace_back("n_flows", format_int(static_cast<int>(inst.routing.cols())));
  report.config_echo.emplace_back("slots_per_day", format_int(config.slots_per_day));
  report.config_echo.emplace_back("train_days", format_int(config.train_days));
  report.config_echo.emplace_back("flow_amp", format_value(config.flow_amp));
  report.config_echo.emplace_back("flow_ar_coeff", format_value(config.flow_ar_coeff));
  report.config_echo.emplace_back("flow_noise", format_value(config.flow_noise));
  report.config_echo.emplace_back("day_phase_jitter", format_value(config.day_phase_jitter));
  report.config_echo.emplace_back("day_amp_jitter", format_value(config.day_amp_jitter));
  report.config_echo.emplace_back("noise_var", format_value(config.noise_var));
  report.config_echo.emplace_back("fit_rank", format_int(config.fit_rank));
  report.config_echo.emplace_back("cov_reg", format_value(config.cov_reg));
  report.config_echo.emplace_back("seed", format_int(static_cast<long>(config.seed)));

  finish_report(report, out_dir, t0);
  return report;
}

// ---------------------------------------------------------------------------

CartographyConfig cartography_config_from(Config& cfg) {
  CartographyConfig config;
  config.area_side = cfg.get_double("area_side", config.area_side);
  config.n_radios = cfg.get_int("n_radios", config.n_radios);
  config.n_freqs = cfg.get_int("n_freqs", config.n_freqs);
  config.n_bands = cfg.get_int("n_bands", config.n_bands);
  config.pathloss_exp = cfg.get_double("pathloss_exp", config.pathloss_exp);
  config.ref_dist = cfg.get_double("ref_dist", config.ref_dist);
  config.shadow_decorr = cfg.get_double("shadow_decorr", config.shadow_decorr);
  config.shadow_var_db = cfg.get_double("shadow_var_db", config.shadow_var_db);
  config.noise_var_db = cfg.get_double("noise_var_db", config.noise_var_db);
  if (cfg.has("kernel_widths")) config.kernel_widths = cfg.get_doubles("kernel_widths");
  if (cfg.has("mu_grid")) config.mu_grid = cfg.get_doubles("mu_grid");
  config.grid_side = cfg.get_int("grid_side", config.grid_side);
  config.holdout_frac = cfg.get_double("holdout_frac", config.holdout_frac);
  config.seed = static_cast<unsigned long long>(cfg.get_int("seed", 1));
  if (cfg.has("source")) {
    const std::vector<double> flat = cfg.get_doubles("source");
    if (flat.size() % 4 != 0)
      throw ParseError(cfg.source_name(), 0,
                       "each 'source' needs 4 values: x, y, band, power_db");
    config.sources.clear();
    for (std::size_t i = 0; i < flat.size(); i += 4) {
      RfSource s;
      s.position = (Point(2) << flat[i], flat[i + 1]).finished();
      s.band = static_cast<int>(flat[i + 2]);
      s.power_db = flat[i + 3];
      config.sources.push_back(std::move(s));
    }
  } else {
    config.sources = default_sources(config.area_side);
  }
  return config;
}

CompletionExperimentConfig completion_config_from(Config& cfg) {
  CompletionExperimentConfig config;
  config.m = cfg.get_int("m", config.m);
  config.n = cfg.get_int("n", config.n);
  config.rank = cfg.get_int("rank", config.rank);
  config.missing_frac = cfg.get_double("missing_frac", config.missing_frac);
  config.missing_rows = cfg.get_int("missing_rows", config.missing_rows);
  config.prior_c = prior_mode_from(cfg.get_string("prior_c", "sample"), "prior_c",
                                   cfg.source_name());
  config.prior_b = prior_mode_from(cfg.get_string("prior_b", "sample"), "prior_b",
                                   cfg.source_name());
  config.replicates = cfg.get_int("replicates", config.replicates);
  config.noise_var = cfg.get_double("noise_var", config.noise_var);
  config.row_corr_len = cfg.get_double("row_corr_len", config.row_corr_len);
  config.col_corr_len = cfg.get_double("col_corr_len", config.col_corr_len);
  config.cov_reg = cfg.get_double("cov_reg", config.cov_reg);
  if (cfg.has("mu_grid")) config.mu_grid = cfg.get_doubles("mu_grid");
  config.fit_rank = cfg.get_int("fit_rank", config.fit_rank);
  config.seed = static_cast<unsigned long long>(cfg.get_int("seed", 1));
  return config;
}

TrafficExperimentConfig traffic_config_from(Config& cfg) {
  TrafficExperimentConfig config;
  config.n_links = cfg.get_int("n_links", config.n_links);
  config.n_flows = cfg.get_int("n_flows", config.n_flows);
  config.slots_per_day = cfg.get_int("slots_per_day", config.slots_per_day);
  config.train_days = cfg.get_int("train_days", config.train_days);
  config.flow_amp = cfg.get_double("flow_amp", config.flow_amp);
  config.flow_ar_coeff = cfg.get_double("flow_ar_coeff", config.flow_ar_coeff);
  config.flow_noise = cfg.get_double("flow_noise", config.flow_noise);
  config.day_phase_jitter = cfg.get_double("day_phase_jitter", config.day_phase_jitter);
  config.day_amp_jitter = cfg.get_double("day_amp_jitter", config.day_amp_jitter);
  config.noise_var = cfg.get_double("noise_var", config.noise_var);
  config.fit_rank = cfg.get_int("fit_rank", config.fit_rank);
  config.cov_reg = cfg.get_double("cov_reg", config.cov_reg);
  if (cfg.has("routing_csv")) config.routing = read_matrix_csv(cfg.get_string("routing_csv"));
  config.seed = static_cast<unsigned long long>(cfg.get_int("seed", 1));
  return config;
}

}  // namespace kbl
