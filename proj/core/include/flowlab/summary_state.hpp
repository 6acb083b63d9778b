#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "flowlab/target.hpp"

namespace flowlab {

/// Per-atom slice of the summary-statistic densities.
struct AtomState {
  Eigen::MatrixXd m;  // r x K, contribution to M(c)
  Eigen::MatrixXd q;  // r x r symmetric, contribution to Q-cal / Q(c)
  Eigen::MatrixXd g;  // r x R, contribution to G
};

/// Finite summary of the network: skip connection b, time-encoding weights
/// v, and the per-atom densities whose sums give M, Q-cal, Q(c), G.
struct SummaryState {
  double b = 0.0;
  Eigen::VectorXd v;
  std::vector<AtomState> atoms;

  int r() const { return atoms.empty() ? 0 : static_cast<int>(atoms[0].m.rows()); }
  int n_clusters() const { return atoms.empty() ? 0 : static_cast<int>(atoms[0].m.cols()); }
  int reference_dim() const { return atoms.empty() ? 0 : static_cast<int>(atoms[0].g.cols()); }

  Eigen::VectorXd M(int c) const;
  Eigen::MatrixXd Qcal() const;
  /// Q(c) = sum_a rho_a(c) q_a; atom eigenvalues come from the target.
  Eigen::MatrixXd Q(const MixtureTarget& target, int c) const;
  Eigen::MatrixXd G() const;
};

SummaryState zero_summary(const MixtureTarget& target, int r, double b0 = 0.0);

/// Cold start: Q-cal = s^2 I split across atoms proportionally to their
/// weights, M = G = 0, v = 0.
SummaryState init_cold(const MixtureTarget& target, int r, double s, double b0 = 0.0);

/// Warm start: weight column gamma = norm * mu(gamma)/||mu(gamma)||, so
/// M^c_gamma = norm T^{c gamma}/sqrt(T^{gamma gamma}) etc. Requires r <= K
/// and nonzero centroid norms.
SummaryState init_warm(const MixtureTarget& target, int r, double norm = 0.1,
                       double b0 = 0.0);

using Trajectory = std::vector<std::pair<double, SummaryState>>;

/// One row per output time: theta, b, v, then flattened M(c), Q-cal, Q(c), G.
void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const MixtureTarget& target);

}  // namespace flowlab
