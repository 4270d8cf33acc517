#include "kbl/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace kbl {

namespace {

void check_selector(const Eigen::MatrixXd& zhat, const Eigen::MatrixXd& z,
                    const Eigen::MatrixXd& wbar) {
  if (z.rows() != zhat.rows() || z.cols() != zhat.cols() ||
      z.rows() != wbar.rows() || z.cols() != wbar.cols())
    throw std::invalid_argument("metric: shape mismatch");
  bool any = false;
  for (Eigen::Index j = 0; j < wbar.cols(); ++j)
    for (Eigen::Index i = 0; i < wbar.rows(); ++i) {
      const double w = wbar(i, j);
      if (w != 0.0 && w != 1.0)
        throw std::invalid_argument("metric: selector entries must be 0 or 1");
      any = any || w != 0.0;
    }
  if (!any) throw std::invalid_argument("metric: no entries selected");
}

}  // namespace

RecoveryError metric_recovery_db(const Eigen::MatrixXd& zhat,
                                 const Eigen::MatrixXd& z,
                                 const Eigen::MatrixXd& wbar) {
  check_selector(zhat, z, wbar);
  const double num = ((zhat - z).cwiseProduct(wbar)).squaredNorm();
  const double den = (z.cwiseProduct(wbar)).squaredNorm();
  RecoveryError out;
  if (den == 0.0) {
    out.degenerate = true;
    out.db = num == 0.0 ? kRecoveryDbFloor : 10.0 * std::log10(num);
    return out;
  }
  if (num == 0.0) {
    out.db = kRecoveryDbFloor;
    return out;
  }
  out.db = std::max(kRecoveryDbFloor, 10.0 * std::log10(num / den));
  return out;
}

RelativeError metric_rel_error(const Eigen::MatrixXd& zhat,
                               const Eigen::MatrixXd& z,
                               const Eigen::MatrixXd& wbar) {
  check_selector(zhat, z, wbar);
  const double num = ((zhat - z).cwiseProduct(wbar)).norm();
  const double den = (z.cwiseProduct(wbar)).norm();
  RelativeError out;
  if (den == 0.0) {
    out.degenerate = true;
    out.value = num;
    return out;
  }
  out.value = num / den;
  return out;
}

}  // namespace kbl
