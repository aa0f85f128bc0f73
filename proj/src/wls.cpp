#include "absplit/wls.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "absplit/stats.hpp"
#include "absplit/types.hpp"

namespace absplit {

void DesignMatrix::validate() const {
  const auto n = x.rows();
  if (y.size() != n || w.size() != n || static_cast<Eigen::Index>(cluster.size()) != n)
    fail(ErrorCode::InvalidArgument, "design matrix: row counts disagree");
  if (!column_names.empty() && static_cast<Eigen::Index>(column_names.size()) != x.cols())
    fail(ErrorCode::InvalidArgument, "design matrix: column name count disagrees with columns");
  for (Eigen::Index k = 0; k < n; ++k)
    if (!(w[k] > 0.0) || !std::isfinite(w[k])) fail(ErrorCode::InvalidArgument, "design matrix: weights must be positive");
  if (!x.allFinite() || !y.allFinite()) fail(ErrorCode::InvalidArgument, "design matrix: non-finite entries");
}

std::size_t count_clusters(const std::vector<std::size_t>& cluster) {
  std::vector<std::size_t> ids(cluster);
  std::sort(ids.begin(), ids.end());
  return static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
}

WlsFit wls_fit(const DesignMatrix& design) {
  design.validate();
  const auto n = design.rows();
  const auto p = design.cols();
  if (p == 0) fail(ErrorCode::InvalidArgument, "design matrix has no columns");
  if (n < p) fail(ErrorCode::Estimation, "fewer observations than regressors");

  const Eigen::VectorXd sw = design.w.cwiseSqrt();
  Eigen::MatrixXd xw = sw.asDiagonal() * design.x;
  const Eigen::VectorXd yw = sw.cwiseProduct(design.y);

  // Equilibrate columns so the rank threshold is scale free.
  Eigen::VectorXd scale(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double norm = xw.col(j).norm();
    scale[j] = norm > 0.0 ? norm : 1.0;
    xw.col(j) /= scale[j];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < p; ++j) {
      const auto idx = perm[j];
      if (!cols.empty()) cols += ", ";
      cols += design.column_names.empty() ? "column " + std::to_string(idx) : design.column_names[idx];
    }
    fail(ErrorCode::Estimation, "rank-deficient design; linearly dependent column(s): " + cols);
  }

  WlsFit fit;
  fit.coefficients = qr.solve(yw).cwiseQuotient(scale);
  fit.residuals = design.y - design.x * fit.coefficients;

  // (Xs'Xs)^{-1} = P R^{-1} R^{-T} P' with Xs = Xw D^{-1}.
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd inner = r_inv * r_inv.transpose();
  const Eigen::MatrixXd permuted = qr.colsPermutation() * inner * qr.colsPermutation().transpose();
  const Eigen::VectorXd inv_scale = scale.cwiseInverse();
  fit.bread = inv_scale.asDiagonal() * permuted * inv_scale.asDiagonal();
  return fit;
}

Eigen::MatrixXd cluster_robust_covariance(const DesignMatrix& design, const WlsFit& fit,
                                          std::optional<SmallSampleCounts> counts) {
  const auto n = design.rows();
  const auto p = design.cols();
  if (fit.residuals.size() != n || fit.bread.rows() != p)
    fail(ErrorCode::InvalidArgument, "fit does not match design");

  // Cluster ids are mapped to dense slots in first-appearance order so the
  // summation order is fixed by the row order.
  std::unordered_map<std::size_t, std::size_t> slot;
  std::vector<std::vector<stats::CompensatedSum>> scores;
  for (Eigen::Index k = 0; k < n; ++k) {
    auto [it, inserted] = slot.try_emplace(design.cluster[static_cast<std::size_t>(k)], scores.size());
    if (inserted) scores.emplace_back(static_cast<std::size_t>(p));
    auto& s = scores[it->second];
    const double we = design.w[k] * fit.residuals[k];
    for (Eigen::Index j = 0; j < p; ++j) s[static_cast<std::size_t>(j)].add(we * design.x(k, j));
  }
  const double g = static_cast<double>(scores.size());
  if (scores.size() < 3) fail(ErrorCode::Estimation, "cluster-robust covariance needs at least 3 clusters");

  std::vector<std::vector<stats::CompensatedSum>> meat_sum(static_cast<std::size_t>(p),
                                                           std::vector<stats::CompensatedSum>(static_cast<std::size_t>(p)));
  Eigen::VectorXd s(p);
  for (const auto& cluster_score : scores) {
    for (Eigen::Index j = 0; j < p; ++j) s[j] = cluster_score[static_cast<std::size_t>(j)].value();
    for (Eigen::Index a = 0; a < p; ++a)
      for (Eigen::Index b = 0; b <= a; ++b) meat_sum[a][b].add(s[a] * s[b]);
  }
  Eigen::MatrixXd meat(p, p);
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = 0; b <= a; ++b) meat(a, b) = meat(b, a) = meat_sum[a][b].value();

  const SmallSampleCounts c = counts.value_or(SmallSampleCounts{static_cast<double>(n), static_cast<double>(p)});
  if (!(c.n_obs > c.n_params)) fail(ErrorCode::Estimation, "no residual degrees of freedom");
  const double factor = (g / (g - 1.0)) * ((c.n_obs - 1.0) / (c.n_obs - c.n_params));

  Eigen::MatrixXd v = factor * (fit.bread * meat * fit.bread);
  return 0.5 * (v + v.transpose());
}

}  // namespace absplit
