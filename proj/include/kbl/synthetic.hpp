// Synthetic data generators for the three experiment studies: an RF power
// cartography field (pathloss + correlated shadowing + banded spectra), a
// masked low-rank matrix drawn from row/column covariance priors, and a
// routed network-traffic series with daily-periodic flows.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "kbl/additive.hpp"
#include "kbl/completion.hpp"
#include "kbl/kernels.hpp"
#include "kbl/rng.hpp"

namespace kbl {

// ---------------------------------------------------------------------------
// Power cartography

struct RfSource {
  Point position;        // 2-d, meters
  int band = 1;          // 1-based sub-band index
  double power_db = 0.0; // transmit power in dB
};

// Two sources at the quarter and three-quarter diagonal points of the area,
// bands 5 and 8, 15 dB transmit power.
std::vector<RfSource> default_sources(double area_side = 100.0);

struct CartographyConfig {
  double area_side = 100.0;      // square region side, meters
  int n_radios = 100;
  int n_freqs = 24;              // measurement frequencies, 2400..2496 MHz
  int n_bands = 14;              // Hann sub-bands
  double pathloss_exp = 3.0;
  double ref_dist = 60.0;        // meters; pathloss is flat inside this radius
  double shadow_decorr = 25.0;   // meters
  double shadow_var_db = 25.0;   // shadowing variance (dB^2 in the log domain)
  double noise_var_db = -10.0;   // AWGN variance in dB; <= -300 means noise-free
  std::vector<double> kernel_widths = {10.0, 20.0};
  std::vector<RfSource> sources = default_sources();  // may be empty: pure noise
  int grid_side = 20;            // evaluation grid resolution per axis
  std::vector<double> mu_grid;   // empty -> default grid from the critical mu
  double holdout_frac = 0.2;
  unsigned long long seed = 1;
};

// 10 n_p log10(max(d, d0)/d0)
double pathloss_db(double dist, double pathloss_exp, double ref_dist);

// One draw of a zero-mean Gaussian field with covariance
// var_db * exp(-dist/decorr) over the given sites (joint Cholesky sample).
Eigen::VectorXd sample_shadow_field(const std::vector<Point>& sites, double var_db,
                                    double decorr, Rng& rng);

// Hann pulses of the given width centered at `centers`; unit peak, zero
// outside |y - center| < width/2. Centers must lie within [min(freqs),
// max(freqs)]; a non-positive width only warns (the bases then vanish).
BasisSet hann_bases(const Eigen::VectorXd& freqs, const std::vector<double>& centers,
                    double width);

// Band centers for the frequency grid: the n_bands = 14 layout uses the
// 2412 + 5(i-1) / 2484 MHz channel plan; other counts spread centers evenly.
std::vector<double> band_centers(int n_bands);
double band_width(int n_bands);

struct RfField {
  TrainingSet data;                 // inputs: positions, aux: frequency, targets: linear power
  std::vector<Point> radios;        // n_radios positions
  Eigen::VectorXd freqs;            // n_freqs measurement frequencies (MHz)
  std::vector<double> centers;      // band centers (MHz)
  double width = 0.0;               // band width (MHz)
  std::vector<Point> grid;          // grid_side^2 evaluation points, x-major
  std::vector<Eigen::MatrixXd> truth_maps;  // per band: grid_side x grid_side
                                            // linear spatial power (row = x cell)
};

// Samples the field: per source, received dB power = transmit - pathloss +
// shadowing (drawn jointly over radios and grid); per (radio, frequency),
// target = sum over sources of linear power * Hann band mask + AWGN.
// Ordering is radio-major: sample index = radio * n_freqs + freq.
RfField gen_rf_field(const CartographyConfig& config);

// ---------------------------------------------------------------------------
// Masked low-rank completion

enum class PriorMode {
  Sample,      // covariance estimated from side replicates
  Structural,  // the generator's own covariance
  Identity
};

struct CompletionExperimentConfig {
  int m = 100;
  int n = 13;
  int rank = 4;
  double missing_frac = 0.9;
  int missing_rows = 25;
  PriorMode prior_c = PriorMode::Sample;
  PriorMode prior_b = PriorMode::Sample;
  int replicates = 2;          // side replicates feeding the sample covariances
  double noise_var = 1e-4;     // additive noise variance on Z
  double row_corr_len = 25.0;  // squared-exponential length over the row index
  double col_corr_len = 4.0;   // same over the column index
  double cov_reg = 1e-6;       // relative ridge on sample covariances
  std::vector<double> mu_grid; // empty -> default sweep
  int fit_rank = 0;            // 0 -> rank + 2
  unsigned long long seed = 1;
};

struct CompletionInstance {
  MaskedMatrix observed;          // Z .* W with the 0/1 mask W
  Eigen::MatrixXd z_true;
  Eigen::MatrixXd wbar;           // missing-entry indicator (1 - W)
  Eigen::MatrixXd row_missing;    // indicator restricted to fully missing rows
  std::vector<int> missing_rows;  // indices of fully masked rows
  Eigen::MatrixXd r_c;            // row prior handed to make_priors
  Eigen::MatrixXd r_b;            // column prior
};

CompletionInstance gen_completion_instance(const CompletionExperimentConfig& config);

// ---------------------------------------------------------------------------
// Network traffic

struct TrafficExperimentConfig {
  int n_links = 30;
  int n_flows = 20;
  int slots_per_day = 288;
  int train_days = 2;            // one test day follows
  double flow_amp = 1.0;         // flow amplitude scale (sigma_f knob)
  double flow_ar_coeff = 0.99;
  double flow_noise = 0.1;       // AR(1) stationary standard deviation
  double day_phase_jitter = 0.3; // per-day phase drift sd (radians)
  double day_amp_jitter = 0.25;  // per-day log-amplitude drift sd
  double noise_var = 1e-2;       // link measurement noise variance; also the fit mu
  int fit_rank = 8;
  double cov_reg = 1e-8;         // relative ridge on the sample covariances
  Eigen::MatrixXd routing;       // links x flows 0/1; empty -> generated
  unsigned long long seed = 1;
};

struct TrafficInstance {
  std::vector<Eigen::MatrixXd> train_days;  // each slots x links
  MaskedMatrix test;                        // test day, second half of the slots masked
  Eigen::MatrixXd z_test_true;
  Eigen::MatrixXd wbar;                     // masked-slot indicator
  Eigen::MatrixXd r_c;  // slots x slots sample covariance pooled over train days
  Eigen::MatrixXd r_b;  // links x links flow-routed covariance R R^T
  Eigen::MatrixXd routing;
};

TrafficInstance gen_traffic_instance(const TrafficExperimentConfig& config);

}  // namespace kbl
