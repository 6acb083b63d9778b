#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "flowlab/activation.hpp"

namespace flowlab {

/// Low-dimensional Gaussian N(mean, cov), dimension 1..4 (larger allowed,
/// at tensor-product cost).
struct GaussianSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int dim() const { return static_cast<int>(mean.size()); }
};

/// One multiplicative factor applied to the matching Gaussian coordinate.
struct Factor {
  enum class Kind { Act, ActPrime, Linear };
  Kind kind = Kind::Linear;
  double shift = 0.0;  // houses the time-encoding term p_t * v
};

using FactorList = std::vector<Factor>;

inline Factor act(double shift = 0.0) { return {Factor::Kind::Act, shift}; }
inline Factor act_prime(double shift = 0.0) { return {Factor::Kind::ActPrime, shift}; }
inline Factor linear() { return {Factor::Kind::Linear, 0.0}; }

/// Gauss-Hermite nodes/weights for the standard normal weight (probabilists'
/// normalization: sum(w)=1, E[x^2]=1). Cached per order.
struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const HermiteRule& hermite_rule(int order);

struct Quadrature {
  int order = 40;
};
struct MonteCarlo {
  std::int64_t n = 1000000;
  std::uint64_t seed = 0;
};

/// E[ prod_i factor_i(xi_i) ] for xi ~ N(mean, cov), by tensorized
/// Gauss-Hermite quadrature. The covariance is eigen-factorized; modes with
/// eigenvalue below 1e-12 * max contribute their mean deterministically, so
/// singular covariances (cold starts, duplicated coordinates) are handled
/// without special cases. Kinked activations switch to coordinate-wise
/// sequential conditioning with panelled Gauss-Legendre levels split at the
/// kinks, so accuracy stays spectral.
double expect(const GaussianSpec& spec, const FactorList& factors,
              const Activation& act, Quadrature method);

/// Plain Monte Carlo average, deterministic given the seed.
double expect(const GaussianSpec& spec, const FactorList& factors,
              const Activation& act, MonteCarlo method);

/// Monte Carlo with a standard-error estimate (mean, stderr).
std::pair<double, double> expect_mc_with_error(const GaussianSpec& spec,
                                               const FactorList& factors,
                                               const Activation& act,
                                               MonteCarlo method);

}  // namespace flowlab
