#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace absplit {

struct DesignMatrix {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  Eigen::VectorXd w;                 // strictly positive
  std::vector<std::size_t> cluster;  // cluster index per row
  std::vector<std::string> column_names;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }
  void validate() const;
};

struct WlsFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;  // y - X b, unweighted scale
  Eigen::MatrixXd bread;      // (X' W X)^{-1}
};

// Minimises sum_k w_k (y_k - x_k b)^2 through a column-pivoted Householder QR
// of the equilibrated design diag(sqrt(w)) X; the normal equations are never
// formed. Rank deficiency throws an Estimation error naming the dependent
// columns.
WlsFit wls_fit(const DesignMatrix& design);

// Sample sizes entering the CR1 factor. Defaults to the design's own shape;
// differenced fixed-effects designs pass the size of the undifferenced sample.
struct SmallSampleCounts {
  double n_obs = 0.0;
  double n_params = 0.0;
};

// CR1 cluster-robust sandwich:
//   V = c * B (sum_g s_g s_g') B,  s_g = sum_{k in g} w_k e_k x_k,
//   c = G/(G-1) * (N-1)/(N-K),  B = (X'WX)^{-1}.
// Requires at least three clusters.
Eigen::MatrixXd cluster_robust_covariance(const DesignMatrix& design, const WlsFit& fit,
                                          std::optional<SmallSampleCounts> counts = std::nullopt);

std::size_t count_clusters(const std::vector<std::size_t>& cluster);

}  // namespace absplit
