#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "flowlab/activation.hpp"
#include "flowlab/density.hpp"
#include "flowlab/schedule.hpp"
#include "flowlab/summary_state.hpp"

namespace flowlab {

/// Schedule-derived sampling coefficients for the trained skip connection b.
struct TransportCoeffs {
  const Schedule* schedule = nullptr;
  double b = 0.0;

  double gamma(double t) const;  // beta' - (alpha'/alpha) beta + eps beta/alpha^2
  double delta(double t) const;  // b gamma + alpha'/alpha - eps/alpha^2
};

/// Requires alpha > 0 on the sampling grid (extend t_f < 1 otherwise).
TransportCoeffs coeffs(const Schedule& schedule, double b_tau);

/// Low-dimensional ensemble of the generative process in weight coordinates.
struct ZEnsemble {
  std::vector<double> times;            // sampling grid
  std::vector<Eigen::MatrixXd> paths;   // one n x r matrix per time
  std::uint64_t seed = 0;

  const Eigen::MatrixXd& terminal() const { return paths.back(); }
};

/// Euler-Maruyama over the sampling grid from Z_0 ~ N(0, Qcal); paths derive
/// their noise from (seed, path index) so results are scheduling-independent.
ZEnsemble sample_Z(const SummaryState& state, const Schedule& schedule,
                   const Activation& act, int n, std::uint64_t seed);

/// Variance of the manifold-orthogonal Gaussian component.
struct YVariance {
  std::vector<double> times;
  std::vector<double> values;  // discrete product recursion, values[0] = 1

  double terminal() const { return values.back(); }
  double at_time(double t) const;  // linear interpolation on the grid
};

YVariance y_variance(const Schedule& schedule, double b_tau);

/// Quadrature evaluation of the continuous-time variance, for cross-checks.
double y_variance_continuous(const Schedule& schedule, double b_tau, double t,
                             int n_quad = 4000);

/// Law of the reference-space projection: loading * Z plus Gaussian blur.
struct ProjectedLaw {
  Eigen::MatrixXd loading;       // R x r, G^T pinv(Qcal)
  Eigen::MatrixXd gaussian_cov;  // R x R, yvar * (I - G^T pinv(Qcal) G)
  double yvar = 1.0;
};

ProjectedLaw projected_law(const SummaryState& state, const Schedule& schedule,
                           double t);

/// Projected samples at the terminal grid time: one row per path,
/// loading * Z + N(0, gaussian_cov). Deterministic given the ensemble seed.
std::pair<ProjectedLaw, Eigen::MatrixXd> project(const SummaryState& state,
                                                 const ZEnsemble& z,
                                                 const Schedule& schedule);

/// Exact Gaussian-mixture smoothing of the terminal Z ensemble on a grid;
/// normalized to Riemann mass 1, with the pre-normalization mass kept in
/// raw_mass. Falls back to KDE if the blur is singular along a grid axis.
DensityGrid density_on_grid(const ProjectedLaw& law, const Eigen::MatrixXd& z_terminal,
                            const DensityGrid& grid_spec);

/// Symmetric PSD square root / pseudo-inverse, eigenvalues below
/// 1e-10 * max treated as zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m);
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m);

}  // namespace flowlab
