#include "kbl/synthetic.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>

namespace kbl {

namespace {

constexpr double kFreqLo = 2400.0;
constexpr double kFreqHi = 2496.0;

// Partial Fisher-Yates: the first `take` positions of 0..n-1 after shuffling.
std::vector<int> draw_subset(int n, int take, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < take; ++i) {
    const int j = rng.uniform_int(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(take));
  return idx;
}

}  // namespace

std::vector<RfSource> default_sources(double area_side) {
  std::vector<RfSource> src(2);
  src[0].position = (Point(2) << 0.25 * area_side, 0.25 * area_side).finished();
  src[0].band = 5;
  src[0].power_db = 15.0;
  src[1].position = (Point(2) << 0.75 * area_side, 0.75 * area_side).finished();
  src[1].band = 8;
  src[1].power_db = 15.0;
  return src;
}

double pathloss_db(double dist, double pathloss_exp, double ref_dist) {
  if (!(dist >= 0.0) || !(ref_dist > 0.0))
    throw std::invalid_argument("pathloss_db: bad distance");
  return 10.0 * pathloss_exp * std::log10(std::max(dist, ref_dist) / ref_dist);
}

Eigen::VectorXd sample_shadow_field(const std::vector<Point>& sites, double var_db,
                                    double decorr, Rng& rng) {
  const Eigen::Index n = static_cast<Eigen::Index>(sites.size());
  if (n == 0) throw std::invalid_argument("sample_shadow_field: no sites");
  if (var_db < 0.0 || decorr <= 0.0)
    throw std::invalid_argument("sample_shadow_field: bad covariance parameters");
  if (var_db == 0.0) return Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double d = (sites[static_cast<std::size_t>(i)] -
                        sites[static_cast<std::size_t>(j)])
                           .norm();
      const double v = var_db * std::exp(-d / decorr);
      cov(i, j) = v;
      cov(j, i) = v;
    }
  }
  const GramMatrix g = gram_from_matrix(std::move(cov));
  Eigen::LLT<Eigen::MatrixXd> llt(g.entries);
  Eigen::VectorXd white(n);
  for (Eigen::Index i = 0; i < n; ++i) white[i] = rng.normal();
  return Eigen::MatrixXd(llt.matrixL()) * white;
}

std::vector<double> band_centers(int n_bands) {
  if (n_bands < 1) throw std::invalid_argument("band_centers: need at least one band");
  std::vector<double> centers(static_cast<std::size_t>(n_bands));
  if (n_bands == 14) {
    for (int i = 0; i < 13; ++i) centers[static_cast<std::size_t>(i)] = 2412.0 + 5.0 * i;
    centers[13] = 2484.0;
  } else {
    const double spacing = (kFreqHi - kFreqLo) / n_bands;
    for (int i = 0; i < n_bands; ++i)
      centers[static_cast<std::size_t>(i)] = kFreqLo + (i + 0.5) * spacing;
  }
  return centers;
}

double band_width(int n_bands) {
  if (n_bands == 14) return 22.0;
  return 2.0 * (kFreqHi - kFreqLo) / n_bands;
}

BasisSet hann_bases(const Eigen::VectorXd& freqs, const std::vector<double>& centers,
                    double width) {
  if (freqs.size() == 0) throw std::invalid_argument("hann_bases: empty frequency grid");
  if (centers.empty()) throw std::invalid_argument("hann_bases: no centers");
  const double lo = freqs.minCoeff(), hi = freqs.maxCoeff();
  for (double c : centers)
    if (c < lo || c > hi)
      throw std::invalid_argument("hann_bases: center outside the frequency grid");
  if (!(width > 0.0))
    std::cerr << "warning: hann_bases: non-positive width, bases vanish everywhere\n";
  BasisSet bases;
  bases.reserve(centers.size());
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double c = centers[i];
    Basis b;
    b.name = "band" + std::to_string(i + 1);
    b.fn = [c, width](double y) {
      if (!(std::abs(y - c) < 0.5 * width)) return 0.0;
      return 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * (y - c) / width));
    };
    bases.push_back(std::move(b));
  }
  return bases;
}

RfField gen_rf_field(const CartographyConfig& config) {
  if (config.area_side <= 0.0 || config.n_radios < 1 || config.n_freqs < 2 ||
      config.n_bands < 1 || config.pathloss_exp <= 0.0 || config.ref_dist <= 0.0 ||
      config.shadow_decorr <= 0.0 || config.shadow_var_db < 0.0 ||
      config.grid_side < 2)
    throw std::invalid_argument("gen_rf_field: invalid config");
  for (double w : config.kernel_widths)
    if (!(w > 0.0)) throw std::invalid_argument("gen_rf_field: kernel width <= 0");

  RfField field;
  field.centers = band_centers(config.n_bands);
  field.width = band_width(config.n_bands);
  field.freqs.resize(config.n_freqs);
  for (int m = 0; m < config.n_freqs; ++m)
    field.freqs[m] = kFreqLo + (kFreqHi - kFreqLo) * m / (config.n_freqs - 1);

  const std::vector<RfSource>& sources = config.sources;
  for (const RfSource& s : sources) {
    if (s.band < 1 || s.band > config.n_bands)
      throw std::invalid_argument("gen_rf_field: source band out of range");
    if (s.position.size() != 2)
      throw std::invalid_argument("gen_rf_field: source position must be 2-d");
  }

  Rng rng(config.seed);
  field.radios.reserve(static_cast<std::size_t>(config.n_radios));
  for (int c = 0; c < config.n_radios; ++c) {
    Point p(2);
    p[0] = rng.uniform(0.0, config.area_side);
    p[1] = rng.uniform(0.0, config.area_side);
    field.radios.push_back(std::move(p));
  }

  const int gs = config.grid_side;
  field.grid.reserve(static_cast<std::size_t>(gs) * static_cast<std::size_t>(gs));
  for (int ix = 0; ix < gs; ++ix) {
    for (int iy = 0; iy < gs; ++iy) {
      Point p(2);
      p[0] = (ix + 0.5) * config.area_side / gs;
      p[1] = (iy + 0.5) * config.area_side / gs;
      field.grid.push_back(std::move(p));
    }
  }

  std::vector<Point> sites = field.radios;
  sites.insert(sites.end(), field.grid.begin(), field.grid.end());

  field.truth_maps.assign(static_cast<std::size_t>(config.n_bands),
                          Eigen::MatrixXd::Zero(gs, gs));

  // Per source: linear received power at every radio and grid point, with one
  // joint shadowing draw so the truth maps see the same realization.
  const Eigen::Index n_radios = static_cast<Eigen::Index>(config.n_radios);
  Eigen::MatrixXd radio_power = Eigen::MatrixXd::Zero(n_radios,
                                                      static_cast<Eigen::Index>(sources.size()));
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const RfSource& src = sources[s];
    Eigen::VectorXd shadow;
    if (config.shadow_var_db > 0.0)
      shadow = sample_shadow_field(sites, config.shadow_var_db, config.shadow_decorr, rng);
    else
      shadow = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sites.size()));
    for (std::size_t i = 0; i < sites.size(); ++i) {
      const double d = (sites[i] - src.position).norm();
      const double rx_db = src.power_db -
                           pathloss_db(d, config.pathloss_exp, config.ref_dist) +
                           shadow[static_cast<Eigen::Index>(i)];
      const double lin = std::pow(10.0, rx_db / 10.0);
      if (i < static_cast<std::size_t>(config.n_radios)) {
        radio_power(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = lin;
      } else {
        const std::size_t g = i - static_cast<std::size_t>(config.n_radios);
        const int ix = static_cast<int>(g) / gs;
        const int iy = static_cast<int>(g) % gs;
        field.truth_maps[static_cast<std::size_t>(src.band - 1)](ix, iy) += lin;
      }
    }
  }

  const BasisSet bases = hann_bases(field.freqs, field.centers, field.width);
  const Eigen::Index n_samples = n_radios * config.n_freqs;
  field.data.inputs.reserve(static_cast<std::size_t>(n_samples));
  field.data.targets.resize(n_samples);
  field.data.aux.resize(n_samples);
  const double noise_var_lin =
      config.noise_var_db <= -300.0 ? 0.0 : std::pow(10.0, config.noise_var_db / 10.0);
  const double noise_sd = std::sqrt(noise_var_lin);
  for (Eigen::Index c = 0; c < n_radios; ++c) {
    for (int m = 0; m < config.n_freqs; ++m) {
      const Eigen::Index idx = c * config.n_freqs + m;
      field.data.inputs.push_back(field.radios[static_cast<std::size_t>(c)]);
      field.data.aux[idx] = field.freqs[m];
      double t = 0.0;
      for (std::size_t s = 0; s < sources.size(); ++s)
        t += radio_power(c, static_cast<Eigen::Index>(s)) *
             bases[static_cast<std::size_t>(sources[s].band - 1)].fn(field.freqs[m]);
      if (noise_sd > 0.0) t += noise_sd * rng.normal();
      field.data.targets[idx] = t;
    }
  }
  return field;
}

// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd index_sq_exp(Eigen::Index n, double len) {
  Eigen::MatrixXd r(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = static_cast<double>(i - j) / len;
      r(i, j) = std::exp(-d * d);
    }
  return r;
}

// columns ~ N(0, cov) through the jitter-repaired Cholesky factor
Eigen::MatrixXd draw_gaussian_columns(const Eigen::MatrixXd& cov, Eigen::Index cols,
                                      Rng& rng) {
  const GramMatrix g = gram_from_matrix(cov);
  Eigen::LLT<Eigen::MatrixXd> llt(g.entries);
  return Eigen::MatrixXd(llt.matrixL()) * rng.normal_matrix(cov.rows(), cols);
}

}  // namespace

CompletionInstance gen_completion_instance(const CompletionExperimentConfig& config) {
  const Eigen::Index m = config.m, n = config.n;
  if (m < 1 || n < 1 || config.rank < 1 ||
      config.rank > static_cast<int>(std::min(m, n)))
    throw std::invalid_argument("gen_completion_instance: bad dimensions");
  if (!(config.missing_frac >= 0.0 && config.missing_frac < 1.0))
    throw std::invalid_argument("gen_completion_instance: missing_frac outside [0,1)");
  if (config.missing_rows < 0 || config.missing_rows > static_cast<int>(m))
    throw std::invalid_argument("gen_completion_instance: bad missing row count");
  if (config.noise_var < 0.0 || config.replicates < 1 ||
      config.row_corr_len <= 0.0 || config.col_corr_len <= 0.0 || config.cov_reg < 0.0)
    throw std::invalid_argument("gen_completion_instance: bad parameters");
  const long target_missing = std::lround(config.missing_frac * double(m) * double(n));
  const long row_entries = static_cast<long>(config.missing_rows) * static_cast<long>(n);
  if (target_missing < row_entries)
    throw std::invalid_argument(
        "gen_completion_instance: missing_frac too small for the requested whole rows");
  if (target_missing >= static_cast<long>(m) * static_cast<long>(n))
    throw std::invalid_argument("gen_completion_instance: nothing observed");

  const Eigen::MatrixXd r_c_true = index_sq_exp(m, config.row_corr_len);
  const Eigen::MatrixXd r_b_true = index_sq_exp(n, config.col_corr_len);

  Rng rng(config.seed);
  const Eigen::Index p = config.rank;
  const Eigen::MatrixXd c_main = draw_gaussian_columns(r_c_true, p, rng);
  const Eigen::MatrixXd b_main = draw_gaussian_columns(r_b_true, p, rng);
  Eigen::MatrixXd z = c_main * b_main.transpose();
  if (config.noise_var > 0.0)
    z += std::sqrt(config.noise_var) * rng.normal_matrix(m, n);

  // side replicates, always drawn so the instance is invariant to prior_mode
  Eigen::MatrixXd r_c_sample = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd r_b_sample = Eigen::MatrixXd::Zero(n, n);
  for (int rep = 0; rep < config.replicates; ++rep) {
    const Eigen::MatrixXd c_r = draw_gaussian_columns(r_c_true, p, rng);
    const Eigen::MatrixXd b_r = draw_gaussian_columns(r_b_true, p, rng);
    Eigen::MatrixXd z_r = c_r * b_r.transpose();
    if (config.noise_var > 0.0)
      z_r += std::sqrt(config.noise_var) * rng.normal_matrix(m, n);
    r_c_sample += z_r * z_r.transpose() / double(config.replicates);
    r_b_sample += z_r.transpose() * z_r / double(config.replicates);
  }
  r_c_sample += config.cov_reg * (r_c_sample.trace() / double(m)) *
                Eigen::MatrixXd::Identity(m, m);
  r_b_sample += config.cov_reg * (r_b_sample.trace() / double(n)) *
                Eigen::MatrixXd::Identity(n, n);

  CompletionInstance inst;
  inst.z_true = std::move(z);
  switch (config.prior_c) {
    case PriorMode::Sample: inst.r_c = std::move(r_c_sample); break;
    case PriorMode::Structural: inst.r_c = r_c_true; break;
    case PriorMode::Identity: inst.r_c = Eigen::MatrixXd::Identity(m, m); break;
  }
  switch (config.prior_b) {
    case PriorMode::Sample: inst.r_b = std::move(r_b_sample); break;
    case PriorMode::Structural: inst.r_b = r_b_true; break;
    case PriorMode::Identity: inst.r_b = Eigen::MatrixXd::Identity(n, n); break;
  }

  inst.missing_rows = draw_subset(static_cast<int>(m), config.missing_rows, rng);
  std::sort(inst.missing_rows.begin(), inst.missing_rows.end());
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(m, n);
  for (int r : inst.missing_rows) w.row(r).setZero();

  std::vector<std::pair<int, int>> open;
  open.reserve(static_cast<std::size_t>(m) * static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::binary_search(inst.missing_rows.begin(), inst.missing_rows.end(),
                           static_cast<int>(i)))
      continue;
    for (Eigen::Index j = 0; j < n; ++j) open.emplace_back(int(i), int(j));
  }
  const long extra = target_missing - row_entries;
  for (long k = 0; k < extra; ++k) {
    const int pick = rng.uniform_int(static_cast<int>(k),
                                     static_cast<int>(open.size()) - 1);
    std::swap(open[static_cast<std::size_t>(k)], open[static_cast<std::size_t>(pick)]);
    const auto [i, j] = open[static_cast<std::size_t>(k)];
    w(i, j) = 0.0;
  }

  inst.observed.w = w;
  inst.observed.z = inst.z_true.cwiseProduct(w);
  inst.wbar = Eigen::MatrixXd::Ones(m, n) - w;
  inst.row_missing = Eigen::MatrixXd::Zero(m, n);
  for (int r : inst.missing_rows) inst.row_missing.row(r).setOnes();
  return inst;
}

// ---------------------------------------------------------------------------

TrafficInstance gen_traffic_instance(const TrafficExperimentConfig& config) {
  if (config.slots_per_day < 2 || config.train_days < 1 || config.fit_rank < 1)
    throw std::invalid_argument("gen_traffic_instance: bad dimensions");
  if (!(config.flow_ar_coeff >= 0.0 && config.flow_ar_coeff < 1.0))
    throw std::invalid_argument("gen_traffic_instance: AR coefficient outside [0,1)");
  if (config.flow_amp < 0.0 || config.flow_noise < 0.0 || config.noise_var < 0.0 ||
      config.cov_reg < 0.0 || config.day_phase_jitter < 0.0 ||
      config.day_amp_jitter < 0.0)
    throw std::invalid_argument("gen_traffic_instance: bad parameters");

  Rng rng(config.seed);
  Eigen::MatrixXd routing = config.routing;
  int n_links = config.n_links, n_flows = config.n_flows;
  if (routing.size() == 0) {
    if (n_links < 1 || n_flows < 1)
      throw std::invalid_argument("gen_traffic_instance: bad link/flow counts");
    routing = Eigen::MatrixXd::Zero(n_links, n_flows);
    const int max_path = std::min(5, n_links);
    for (int f = 0; f < n_flows; ++f) {
      const int len = max_path < 2 ? max_path : rng.uniform_int(2, max_path);
      for (int l : draw_subset(n_links, len, rng)) routing(l, f) = 1.0;
    }
    for (int l = 0; l < n_links; ++l)
      if (routing.row(l).sum() == 0.0) routing(l, rng.uniform_int(0, n_flows - 1)) = 1.0;
  } else {
    n_links = static_cast<int>(routing.rows());
    n_flows = static_cast<int>(routing.cols());
    for (Eigen::Index i = 0; i < routing.rows(); ++i) {
      if (routing.row(i).sum() == 0.0)
        throw std::invalid_argument("gen_traffic_instance: routing has an all-zero link row");
      for (Eigen::Index j = 0; j < routing.cols(); ++j)
        if (routing(i, j) != 0.0 && routing(i, j) != 1.0)
          throw std::invalid_argument("gen_traffic_instance: routing must be 0/1");
    }
  }

  const int slots = config.slots_per_day;
  const int n_days = config.train_days + 1;
  const int total = n_days * slots;
  // daily sinusoid with per-day phase and amplitude drift (so training-day
  // correlation fades on the test day) plus an AR(1) component continuous
  // across day boundaries
  Eigen::MatrixXd flows(total, n_flows);
  for (int f = 0; f < n_flows; ++f) {
    const double amp = config.flow_amp * rng.uniform(1.0, 2.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<double> day_amp(static_cast<std::size_t>(n_days), amp);
    std::vector<double> day_phase(static_cast<std::size_t>(n_days), phase);
    for (int d = 0; d < n_days; ++d) {
      if (config.day_amp_jitter > 0.0)
        day_amp[static_cast<std::size_t>(d)] =
            amp * std::exp(config.day_amp_jitter * rng.normal());
      if (config.day_phase_jitter > 0.0)
        day_phase[static_cast<std::size_t>(d)] =
            phase + config.day_phase_jitter * rng.normal();
    }
    double ar = config.flow_noise > 0.0 ? config.flow_noise * rng.normal() : 0.0;
    const double innov =
        config.flow_noise * std::sqrt(1.0 - config.flow_ar_coeff * config.flow_ar_coeff);
    for (int t = 0; t < total; ++t) {
      const std::size_t d = static_cast<std::size_t>(t / slots);
      flows(t, f) = day_amp[d] * (1.0 + std::sin(2.0 * std::numbers::pi * t / slots +
                                                 day_phase[d])) +
                    ar;
      if (config.flow_noise > 0.0)
        ar = config.flow_ar_coeff * ar + innov * rng.normal();
    }
  }
  Eigen::MatrixXd loads = flows * routing.transpose();
  loads += std::sqrt(config.noise_var) * rng.normal_matrix(total, n_links);

  TrafficInstance inst;
  inst.routing = routing;
  inst.train_days.reserve(static_cast<std::size_t>(config.train_days));
  for (int d = 0; d < config.train_days; ++d)
    inst.train_days.push_back(loads.middleRows(d * slots, slots));
  inst.z_test_true = loads.middleRows(config.train_days * slots, slots);

  const int half = slots / 2;
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(slots, n_links);
  w.bottomRows(slots - half).setZero();
  inst.test.w = w;
  inst.test.z = inst.z_test_true.cwiseProduct(w);
  inst.wbar = Eigen::MatrixXd::Ones(slots, n_links) - w;

  inst.r_c = Eigen::MatrixXd::Zero(slots, slots);
  for (const Eigen::MatrixXd& day : inst.train_days)
    for (Eigen::Index l = 0; l < day.cols(); ++l)
      inst.r_c += day.col(l) * day.col(l).transpose();
  inst.r_c /= double(config.train_days) * double(n_links);
  inst.r_c += config.cov_reg * (inst.r_c.trace() / double(slots)) *
              Eigen::MatrixXd::Identity(slots, slots);

  inst.r_b = routing * routing.transpose();
  return inst;
}

}  // namespace kbl
