#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "csilab/core/frame.hpp"

namespace csilab::metrics {

/// Quantile of the chi-squared distribution, a natural squared-distance threshold.
inline double chi2_quantile(double dof, double p) {
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), p);
}

struct FilterResult {
  CsiSeries kept;
  std::size_t removed = 0;
  std::vector<double> d2;  // squared distance per input frame
};

/// Drops frames whose amplitude vector has squared Mahalanobis distance above `threshold_d2`
/// from the series mean. Covariance gets 1e-6 * trace / K added to its diagonal.
inline FilterResult mahalanobis_filter(const CsiSeries& s, double threshold_d2) {
  FilterResult r;
  r.kept.meta = s.meta;
  if (s.empty()) return r;
  const auto K = static_cast<Eigen::Index>(s.grid()->size()), N = static_cast<Eigen::Index>(s.size());
  if (N < K + 1) throw DegenerateError("Mahalanobis filter needs at least K + 1 frames");
  Eigen::MatrixXd A(N, K);
  for (Eigen::Index n = 0; n < N; ++n) {
    for (Eigen::Index k = 0; k < K; ++k) A(n, k) = std::abs(s.frames[n].csi[k]);
  }
  const Eigen::RowVectorXd mu = A.colwise().mean();
  A.rowwise() -= mu;
  Eigen::MatrixXd C = A.transpose() * A / static_cast<double>(N - 1);
  C.diagonal().array() += 1e-6 * C.trace() / static_cast<double>(K);
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  if (llt.info() != Eigen::Success || !(C.trace() > 0.0)) throw DegenerateError("singular amplitude covariance");
  const Eigen::MatrixXd W = llt.matrixL().solve(A.transpose());
  r.d2.resize(static_cast<std::size_t>(N));
  for (Eigen::Index n = 0; n < N; ++n) {
    r.d2[n] = W.col(n).squaredNorm();
    if (r.d2[n] > threshold_d2) {
      ++r.removed;
    } else {
      r.kept.frames.push_back(s.frames[n]);
    }
  }
  return r;
}

}  // namespace csilab::metrics
