// Error metrics for masked-matrix recovery experiments.
#pragma once

#include <Eigen/Dense>

namespace kbl {

// Relative squared error in dB over the entries selected by an indicator
// matrix. When the reference signal vanishes on those entries the ratio is
// undefined; `degenerate` is set and `db` holds the absolute squared error in
// dB instead. A perfect reconstruction is clamped to the -300 dB sentinel.
struct RecoveryError {
  double db = 0.0;
  bool degenerate = false;
};

inline constexpr double kRecoveryDbFloor = -300.0;

// 10 log10(||(zhat - z) .* wbar||_F^2 / ||z .* wbar||_F^2). `wbar` must be a
// 0/1 indicator of the evaluated entries with at least one entry selected.
RecoveryError metric_recovery_db(const Eigen::MatrixXd& zhat,
                                 const Eigen::MatrixXd& z,
                                 const Eigen::MatrixXd& wbar);

// ||(zhat - z) .* wbar||_2 / ||z .* wbar||_2 over the selected entries. A
// vanishing reference again sets `degenerate` and reports the absolute
// Frobenius error in `value`.
struct RelativeError {
  double value = 0.0;
  bool degenerate = false;
};

RelativeError metric_rel_error(const Eigen::MatrixXd& zhat,
                               const Eigen::MatrixXd& z,
                               const Eigen::MatrixXd& wbar);

}  // namespace kbl
