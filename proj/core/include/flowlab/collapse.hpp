#pragma once

#include <Eigen/Dense>

#include "flowlab/density.hpp"
#include "flowlab/schedule.hpp"
#include "flowlab/summary_state.hpp"
#include "flowlab/target.hpp"

namespace flowlab {

/// Builds the next-generation target from a trained state and terminal Z
/// samples: clusters are the cells of discretize_pi with centroids
/// mu(z) = (w/sqrt d) pinv(Qcal) z (so T^{jk} = z_j^T pinv(Qcal) z_k), plus
/// an isotropic bulk of variance yvar(t_f) on the off-manifold directions.
/// Reference overlaps are composed through G so the original observation
/// frame persists across generations. The result is abstract (no embedding);
/// ambient_d only sets the atom weight split r/d vs (d-r)/d.
MixtureTarget next_generation_target(const SummaryState& state, const Schedule& schedule,
                                     const Eigen::MatrixXd& z_terminal,
                                     const DensityGrid& grid_spec,
                                     double bandwidth_scale, int ambient_d);

}  // namespace flowlab
