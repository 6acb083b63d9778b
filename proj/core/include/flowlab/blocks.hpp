#pragma once

#include <string>
#include <vector>

#include "flowlab/gaussian_expect.hpp"

namespace flowlab {

/// Summary-statistic inputs the covariance blocks are assembled from.
struct BlockInputs {
  Eigen::MatrixXd qcal;  // Q-cal = w^T w / d, r x r
  Eigen::MatrixXd qc;    // Q^c  = w^T Sigma(c) w / d, r x r
  Eigen::VectorXd mc;    // M^c  = w^T mu(c) / sqrt(d), length r
};

/// One coordinate of the joint Gaussian of preactivation fields:
/// omega^t (interpolated field), lambda^1 (data field) or lambda^0
/// (noise field), attached to a hidden-unit index.
struct FieldCoord {
  enum class Type { Omega, Data, Noise };
  Type type = Type::Omega;
  int index = 0;
  double alpha = 0.0;  // alpha_t, Omega coords only
  double beta = 0.0;   // beta_t, Omega coords only
};

inline FieldCoord omega_field(int index, double alpha, double beta) {
  return {FieldCoord::Type::Omega, index, alpha, beta};
}
inline FieldCoord data_field(int index) { return {FieldCoord::Type::Data, index, 0, 0}; }
inline FieldCoord noise_field(int index) { return {FieldCoord::Type::Noise, index, 0, 0}; }

/// Joint Gaussian of an arbitrary list of field coordinates. Every named
/// block kind below is a special case of this assembly.
GaussianSpec field_gaussian(const BlockInputs& in, const std::vector<FieldCoord>& coords);

enum class BlockKind {
  OmegaT,   // single-time omega block, any arity
  OmegaTT,  // two-time omega pair
  Omega3, Phi3, Psi3,
  Omega4, Phi4, Psi4,
  P411, P401, P400,
};

BlockKind block_kind_from_name(const std::string& name);

/// (alpha_t, beta_t) evaluated at one schedule time.
struct TimePoint {
  double alpha = 0.0;
  double beta = 0.0;
};

/// Builds the named covariance block over the given index tuple. The number
/// of times/indices must match the kind's arity (OmegaT broadcasts its
/// single time over all indices).
GaussianSpec build_block(BlockKind kind, const BlockInputs& in,
                         const std::vector<TimePoint>& times,
                         const std::vector<int>& indices);

}  // namespace flowlab
