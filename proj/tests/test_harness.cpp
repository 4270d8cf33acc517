#include "kbl/synthetic.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "kbl/additive.hpp"
#include "kbl/config.hpp"
#include "kbl/experiments.hpp"
#include "kbl/io.hpp"
#include "kbl/metrics.hpp"
#include "kbl/report.hpp"
#include "kbl/rng.hpp"

using namespace kbl;

namespace {

Point pt(double x, double y) { return (Point(2) << x, y).finished(); }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

}  // namespace

// ---------------------------------------------------------------------------
// generator pieces

TEST_CASE("hann bases peak at their centers and vanish outside the support") {
  Eigen::VectorXd freqs = Eigen::VectorXd::LinSpaced(24, 2400.0, 2496.0);
  const std::vector<double> centers = band_centers(14);
  const double width = band_width(14);
  const BasisSet bases = hann_bases(freqs, centers, width);
  REQUIRE(bases.size() == centers.size());
  for (std::size_t i = 0; i < bases.size(); ++i) {
    CHECK(bases[i].fn(centers[i]) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(bases[i].fn(centers[i] + width / 2.0) == 0.0);
    CHECK(bases[i].fn(centers[i] - width / 2.0 - 1e-9) == 0.0);
    CHECK(bases[i].fn(centers[i] + width) == 0.0);
  }
  // 802.11 layout: 13 channels 5 MHz apart plus channel 14 at 2484
  CHECK(centers[0] == doctest::Approx(2412.0));
  CHECK(centers[1] - centers[0] == doctest::Approx(5.0));
  CHECK(centers[13] == doctest::Approx(2484.0));
}

TEST_CASE("half-overlapping hann pulses sum within [0, 2] on a dense grid") {
  Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(400, 0.0, 40.0);
  const double width = 10.0;
  std::vector<double> centers;
  for (double c = 5.0; c <= 35.0; c += width / 2.0) centers.push_back(c);
  const BasisSet bases = hann_bases(grid, centers, width);
  for (int g = 0; g < grid.size(); ++g) {
    double sum = 0.0;
    for (const Basis& b : bases) sum += b.fn(grid[g]);
    CHECK(sum >= 0.0);
    CHECK(sum <= 2.0 + 1e-12);
  }
}

TEST_CASE("pathloss is flat inside the reference distance, increasing beyond") {
  CHECK(pathloss_db(0.0, 3.0, 60.0) == 0.0);
  CHECK(pathloss_db(59.9, 3.0, 60.0) == 0.0);
  CHECK(pathloss_db(60.0, 3.0, 60.0) == 0.0);
  double prev = 0.0;
  for (double d = 61.0; d < 400.0; d += 7.0) {
    const double pl = pathloss_db(d, 3.0, 60.0);
    CHECK(pl > prev);
    prev = pl;
  }
  // doubling the distance at exponent 3 costs ~9 dB
  CHECK(pathloss_db(120.0, 3.0, 60.0) == doctest::Approx(30.0 * std::log10(2.0)));
  CHECK_THROWS_AS(pathloss_db(-1.0, 3.0, 60.0), std::invalid_argument);
}

TEST_CASE("shadow field sample covariance tracks var*exp(-d/decorr)") {
  // 8 far-separated site pairs at each probe distance; 500 joint draws
  const double var_db = 25.0, decorr = 25.0;
  const std::vector<double> probes = {2.0, 5.0, 10.0, 15.0, 25.0};
  const int pairs = 8;
  std::vector<Point> sites;
  for (std::size_t k = 0; k < probes.size(); ++k)
    for (int p = 0; p < pairs; ++p) {
      sites.push_back(pt(p * 150.0, k * 900.0));
      sites.push_back(pt(p * 150.0 + probes[k], k * 900.0));
    }
  Rng rng(20240811);
  const int reps = 500;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(probes.size()));
  Eigen::VectorXd var_acc = Eigen::VectorXd::Zero(1);
  for (int r = 0; r < reps; ++r) {
    const Eigen::VectorXd x = sample_shadow_field(sites, var_db, decorr, rng);
    for (std::size_t k = 0; k < probes.size(); ++k)
      for (int p = 0; p < pairs; ++p) {
        const Eigen::Index a = static_cast<Eigen::Index>(2 * (k * pairs + p));
        acc[static_cast<Eigen::Index>(k)] += x[a] * x[a + 1];
        var_acc[0] += x[a] * x[a];
      }
  }
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const double est = acc[static_cast<Eigen::Index>(k)] / double(reps * pairs);
    const double expect = var_db * std::exp(-probes[k] / decorr);
    CHECK(std::abs(est - expect) <= 0.15 * expect);
  }
  const double var_est = var_acc[0] / double(reps * pairs * probes.size());
  CHECK(std::abs(var_est - var_db) <= 0.15 * var_db);
}

TEST_CASE("zero sources produce pure noise samples and all-zero truth maps") {
  CartographyConfig cc;
  cc.n_radios = 6;
  cc.sources.clear();
  const RfField noisy = gen_rf_field(cc);
  for (const Eigen::MatrixXd& map : noisy.truth_maps) CHECK(map.isZero(0.0));
  CHECK(noisy.data.targets.array().abs().maxCoeff() > 0.0);

  CartographyConfig quiet = cc;
  quiet.noise_var_db = -400.0;  // sentinel: exactly zero noise
  const RfField silent = gen_rf_field(quiet);
  CHECK(silent.data.targets.isZero(0.0));
}

TEST_CASE("single source without shadowing decays monotonically with distance") {
  CartographyConfig cc;
  cc.n_radios = 40;
  cc.shadow_var_db = 0.0;
  cc.noise_var_db = -400.0;
  cc.sources.clear();
  RfSource s;
  s.position = pt(50.0, 50.0);
  s.band = 6;
  s.power_db = 15.0;
  cc.sources.push_back(s);
  const RfField field = gen_rf_field(cc);

  // strongest frequency of band 6; the basis factor is a common constant
  const double center = field.centers[5];
  int m_star = 0;
  for (int m = 1; m < field.freqs.size(); ++m)
    if (std::abs(field.freqs[m] - center) < std::abs(field.freqs[m_star] - center))
      m_star = m;
  std::vector<std::pair<double, double>> by_dist;
  for (int c = 0; c < cc.n_radios; ++c) {
    const double d = (field.radios[static_cast<std::size_t>(c)] - s.position).norm();
    by_dist.emplace_back(d, field.data.targets[c * cc.n_freqs + m_star]);
  }
  std::sort(by_dist.begin(), by_dist.end());
  for (std::size_t i = 1; i < by_dist.size(); ++i)
    CHECK(by_dist[i].second <= by_dist[i - 1].second + 1e-12);
  CHECK(by_dist.front().second > 0.0);
}

TEST_CASE("default two-source field concentrates truth energy on bands 5 and 8") {
  CartographyConfig cc;
  cc.n_radios = 10;
  const RfField field = gen_rf_field(cc);
  double total = 0.0, active = 0.0;
  for (std::size_t b = 0; b < field.truth_maps.size(); ++b) {
    const double e = field.truth_maps[b].squaredNorm();
    total += e;
    if (b + 1 == 5 || b + 1 == 8) active += e;
  }
  REQUIRE(total > 0.0);
  CHECK(active / total >= 0.9);
  CHECK(field.truth_maps[4].minCoeff() > 0.0);
  CHECK(field.truth_maps[7].minCoeff() > 0.0);
}

TEST_CASE("traffic instance masks the second half of the test day") {
  TrafficExperimentConfig tc;
  tc.n_links = 8;
  tc.n_flows = 5;
  tc.slots_per_day = 32;
  const TrafficInstance inst = gen_traffic_instance(tc);
  REQUIRE(inst.test.z.rows() == 32);
  REQUIRE(inst.test.z.cols() == 8);
  CHECK(inst.test.w.topRows(16).isOnes(0.0));
  CHECK(inst.test.w.bottomRows(16).isZero(0.0));
  CHECK(inst.test.z.bottomRows(16).isZero(0.0));
  CHECK((inst.wbar.array() == 1.0 - inst.test.w.array()).all());
  CHECK(inst.z_test_true.topRows(16) == inst.test.z.topRows(16));
  CHECK(inst.r_c.rows() == 32);
  CHECK(inst.r_b.rows() == 8);
  CHECK(inst.r_c.isApprox(inst.r_c.transpose(), 1e-12));
  CHECK(inst.routing.cols() == 5);
}

TEST_CASE("completion instance honors mask accounting") {
  CompletionExperimentConfig cc;
  cc.m = 30;
  cc.n = 10;
  cc.rank = 3;
  cc.missing_frac = 0.5;
  cc.missing_rows = 4;
  const CompletionInstance inst = gen_completion_instance(cc);
  const long missing = std::lround(inst.wbar.sum());
  CHECK(missing == std::lround(0.5 * 30 * 10));
  CHECK(inst.missing_rows.size() == 4);
  for (int r : inst.missing_rows) CHECK(inst.observed.w.row(r).isZero(0.0));
  CHECK((inst.observed.z.array() == (inst.z_true.array() * inst.observed.w.array())).all());
  CHECK((inst.wbar.array() == 1.0 - inst.observed.w.array()).all());
  CHECK(inst.row_missing.sum() == doctest::Approx(4.0 * 10.0));
}

// ---------------------------------------------------------------------------
// metrics

TEST_CASE("recovery error reproduces hand-computed values") {
  Rng rng(7);
  const Eigen::MatrixXd z = rng.normal_matrix(6, 5);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(6, 5);

  SUBCASE("ten percent inflation is exactly -20 dB") {
    const RecoveryError err = metric_recovery_db(1.1 * z, z, ones);
    CHECK(err.db == doctest::Approx(-20.0).epsilon(1e-12));
    CHECK(!err.degenerate);
  }
  SUBCASE("perfect recovery clamps to the sentinel floor") {
    const RecoveryError err = metric_recovery_db(z, z, ones);
    CHECK(err.db == kRecoveryDbFloor);
    CHECK(!err.degenerate);
  }
  SUBCASE("the zero estimate scores 0 dB") {
    const RecoveryError err = metric_recovery_db(Eigen::MatrixXd::Zero(6, 5), z, ones);
    CHECK(err.db == 0.0);
  }
  SUBCASE("error decreases monotonically as the estimate approaches truth") {
    double prev = 1.0;
    for (double t : {0.0, 0.25, 0.5, 0.75, 0.9}) {
      const RecoveryError err = metric_recovery_db(t * z, z, ones);
      if (t > 0.0) CHECK(err.db < prev);
      prev = err.db;
    }
  }
  SUBCASE("vanishing reference flips to absolute error") {
    Eigen::MatrixXd z0 = Eigen::MatrixXd::Zero(6, 5);
    const RecoveryError err = metric_recovery_db(z, z0, ones);
    CHECK(err.degenerate);
    CHECK(err.db == doctest::Approx(10.0 * std::log10(z.squaredNorm())));
  }
  SUBCASE("selector must be 0/1, matching shape, and nonempty") {
    Eigen::MatrixXd half = ones;
    half(0, 0) = 0.5;
    CHECK_THROWS_AS(metric_recovery_db(z, z, half), std::invalid_argument);
    CHECK_THROWS_AS(metric_recovery_db(z, z, Eigen::MatrixXd::Zero(6, 5)),
                    std::invalid_argument);
    CHECK_THROWS_AS(metric_recovery_db(z, z, Eigen::MatrixXd::Ones(5, 6)),
                    std::invalid_argument);
  }
}

TEST_CASE("relative error mirrors the dB metric") {
  Rng rng(11);
  const Eigen::MatrixXd z = rng.normal_matrix(4, 4);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(4, 4);
  const RelativeError err = metric_rel_error(0.9 * z, z, ones);
  CHECK(err.value == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(!err.degenerate);
  const RelativeError deg =
      metric_rel_error(z, Eigen::MatrixXd::Zero(4, 4), ones);
  CHECK(deg.degenerate);
  CHECK(deg.value == doctest::Approx(z.norm()));
}

// ---------------------------------------------------------------------------
// report and config plumbing

TEST_CASE("report serialization round-trips byte for byte") {
  ExperimentReport r;
  r.experiment = "cartography";
  r.add_metric("corr_band_5", 0.83250000000000002);
  r.add_metric("best_mu", 3.2e-7);
  r.add_metric("n_samples", 1200.0);
  r.add_flag("support_exact", true);
  r.add_flag("converged", false);
  r.artifacts = {"map_truth_band5.csv", "mu_sweep.csv"};
  r.config_echo = {{"n_radios", "50"}, {"seed", "1"}};
  r.timing_seconds = 12.25;

  const std::string once = serialize_report(r);
  const ExperimentReport back = parse_report(once);
  const std::string twice = serialize_report(back);
  CHECK(once == twice);
  CHECK(back.metric("corr_band_5") == r.metric("corr_band_5"));
  CHECK(back.flag("support_exact"));
  CHECK(!back.flag("converged"));
  CHECK(back.experiment == "cartography");

  const std::string path = "harness_report_roundtrip.json";
  write_report(path, r);
  CHECK(slurp(path) == once);
  const ExperimentReport from_disk = read_report(path);
  CHECK(serialize_report(from_disk) == once);
  std::remove(path.c_str());
}

TEST_CASE("non-finite metrics are rejected at serialization") {
  ExperimentReport r;
  r.experiment = "x";
  r.add_metric("bad", std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(serialize_report(r), std::invalid_argument);
}

TEST_CASE("config parser reports line numbers for malformed input") {
  SUBCASE("unknown keys are rejected with their line") {
    Config cfg = Config::parse_string(
        "# comment\n"
        "n_radios = 50\n"
        "\n"
        "typo_key = 3\n",
        "test.cfg");
    CHECK(cfg.get_int("n_radios") == 50);
    try {
      cfg.reject_unknown();
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line == 4);
      CHECK(std::string(e.what()).find("test.cfg:4") != std::string::npos);
      CHECK(std::string(e.what()).find("typo_key") != std::string::npos);
    }
  }
  SUBCASE("malformed values carry the offending line") {
    Config cfg = Config::parse_string("a = 1\nb = 3..5\n", "bad.cfg");
    try {
      cfg.get_double("b");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line == 2);
    }
  }
  SUBCASE("integer keys reject fractional values") {
    Config cfg = Config::parse_string("n = 2.5\n", "frac.cfg");
    CHECK_THROWS_AS(cfg.get_int("n"), ParseError);
  }
  SUBCASE("missing separator is a parse error") {
    CHECK_THROWS_AS(Config::parse_string("just a line\n", "sep.cfg"), ParseError);
  }
  SUBCASE("last occurrence wins, all occurrences visible to get_doubles") {
    Config cfg = Config::parse_string("mu = 1, 2\nmu = 3\n", "multi.cfg");
    const std::vector<double> all = cfg.get_doubles("mu");
    REQUIRE(all.size() == 3);
    CHECK(all[0] == 1.0);
    CHECK(all[2] == 3.0);
  }
}

TEST_CASE("csv io round-trips exactly and flags broken input") {
  Rng rng(3);
  const Eigen::MatrixXd m = rng.normal_matrix(7, 3);
  const std::string path = "harness_roundtrip.csv";
  write_matrix_csv(path, m);
  const Eigen::MatrixXd back = read_matrix_csv(path);
  CHECK(back == m);
  std::remove(path.c_str());

  const std::string broken = "harness_broken.csv";
  {
    std::ofstream out(broken, std::ios::binary);
    out << "1,2,3\r\n4,5\n";
  }
  try {
    read_matrix_csv(broken);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
  {
    std::ofstream out(broken, std::ios::binary);
    out << "1,2\n3,abc\n";
  }
  CHECK_THROWS_AS(read_matrix_csv(broken), ParseError);
  {
    std::ofstream out(broken, std::ios::binary);
    out << "\n\n";
  }
  CHECK_THROWS_AS(read_matrix_csv(broken), ParseError);
  std::remove(broken.c_str());
  CHECK_THROWS_AS(read_matrix_csv("no_such_file_here.csv"), ParseError);
}

// ---------------------------------------------------------------------------
// experiment-level behavior at trivial corners

TEST_CASE("noise-free single-source sweep keeps the source band active") {
  CartographyConfig cc;
  cc.n_radios = 15;
  cc.noise_var_db = -400.0;
  cc.sources.clear();
  RfSource s;
  s.position = pt(30.0, 60.0);
  s.band = 6;
  s.power_db = 15.0;
  cc.sources.push_back(s);
  const RfField field = gen_rf_field(cc);

  const BasisSet bases = hann_bases(field.freqs, field.centers, field.width);
  std::vector<KernelSpec> kernels;
  for (double w : cc.kernel_widths) kernels.push_back(KernelSpec::gaussian_rbf(w));
  const PreparedProblem prep = build_nbp_problem(field.data, bases, kernels);
  bool found = false;
  for (double mu : default_mu_grid(critical_mu(prep))) {
    const AdditiveModel model = fit_prepared(prep, field.data, mu);
    std::set<std::size_t> bands;
    for (std::size_t comp : model.support)
      bands.insert(model.components[comp].basis + 1);
    if (bands.count(6) == 1 && !bands.empty()) found = true;
  }
  CHECK(found);
}

TEST_CASE("fully observed completion run recovers the matrix on observed entries") {
  CompletionExperimentConfig cc;
  cc.m = 40;
  cc.n = 10;
  cc.rank = 3;
  cc.missing_frac = 0.0;
  cc.missing_rows = 0;
  cc.replicates = 4;
  cc.noise_var = 1e-8;
  cc.mu_grid = {1e-8, 1e-6, 1e-4};
  const ExperimentReport report = run_completion_experiment(cc);
  CHECK(report.flag("eval_on_observed"));
  CHECK(report.metric("kmc_best_db") <= -40.0);
}

TEST_CASE("identity row prior zeroes fully missing rows exactly") {
  CompletionExperimentConfig cc;
  cc.m = 30;
  cc.n = 8;
  cc.rank = 2;
  cc.missing_frac = 0.5;
  cc.missing_rows = 6;
  cc.prior_c = PriorMode::Identity;
  cc.mu_grid = {1e-3, 1e-1};
  const ExperimentReport report = run_completion_experiment(cc);
  // a zero row against a nonzero reference is exactly the 0 dB ratio
  CHECK(report.metric("kmc_row_db") == 0.0);
  CHECK(!report.flag("kmc_row_degenerate"));
}

TEST_CASE("noise-free rank-one traffic is predicted nearly exactly") {
  TrafficExperimentConfig tc;
  tc.n_links = 10;
  tc.n_flows = 1;
  tc.slots_per_day = 48;
  tc.flow_noise = 0.0;
  tc.day_phase_jitter = 0.0;
  tc.day_amp_jitter = 0.0;
  tc.noise_var = 0.0;
  tc.fit_rank = 4;
  const ExperimentReport report = run_traffic_experiment(tc);
  CHECK(report.metric("kmc_ep") <= 0.05);
  CHECK(report.flag("kmc_converged"));
}

TEST_CASE("all-zero traffic flags the degenerate denominator") {
  TrafficExperimentConfig tc;
  tc.n_links = 6;
  tc.n_flows = 3;
  tc.slots_per_day = 24;
  tc.flow_amp = 0.0;
  tc.flow_noise = 0.0;
  tc.noise_var = 0.0;
  tc.fit_rank = 2;
  const ExperimentReport report = run_traffic_experiment(tc);
  CHECK(report.flag("degenerate_denominator"));
}
