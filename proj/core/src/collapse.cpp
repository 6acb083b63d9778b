#include "flowlab/collapse.hpp"

#include <stdexcept>

#include "flowlab/transport.hpp"

namespace flowlab {

MixtureTarget next_generation_target(const SummaryState& state, const Schedule& schedule,
                                     const Eigen::MatrixXd& z_terminal,
                                     const DensityGrid& grid_spec,
                                     double bandwidth_scale, int ambient_d) {
  const int r = state.r();
  const int R = state.reference_dim();
  const double yvar = y_variance(schedule, state.b).terminal();

  MixtureTarget t;
  t.reference_dim = R;

  if (r == 0) {
    // Nothing learned: next generation sees a pure Gaussian.
    t.pi = Eigen::VectorXd::Ones(1);
    t.centroid_gram = Eigen::MatrixXd::Zero(1, 1);
    t.reference_overlaps = Eigen::MatrixXd::Zero(1, R);
    SpectralAtom bulk;
    bulk.eigenvalues = Eigen::VectorXd::Constant(1, yvar);
    bulk.weight = 1.0;
    bulk.centroid_block = Eigen::MatrixXd::Zero(1, 1);
    bulk.reference_block = Eigen::MatrixXd::Zero(1, R);
    t.atoms.push_back(std::move(bulk));
    return t;
  }

  if (grid_spec.dim != r)
    throw std::invalid_argument("pi grid dimension must equal r");
  if (ambient_d <= r) throw std::invalid_argument("ambient_d must exceed r");

  const DiscretePi pi = discretize_pi(z_terminal, grid_spec, bandwidth_scale);
  const int K = static_cast<int>(pi.weights.size());
  const Eigen::MatrixXd qinv = pseudo_inverse(state.Qcal());
  const Eigen::MatrixXd loading = state.G().transpose() * qinv;  // R x r

  t.pi = pi.weights;
  t.centroid_gram = pi.centers * qinv * pi.centers.transpose();
  t.reference_overlaps = pi.centers * loading.transpose();  // K x R

  SpectralAtom manifold;
  manifold.eigenvalues = Eigen::VectorXd::Zero(K);
  manifold.weight = static_cast<double>(r) / ambient_d;
  manifold.centroid_block = t.centroid_gram;
  manifold.reference_block = t.reference_overlaps;

  SpectralAtom bulk;
  bulk.eigenvalues = Eigen::VectorXd::Constant(K, yvar);
  bulk.weight = static_cast<double>(ambient_d - r) / ambient_d;
  bulk.centroid_block = Eigen::MatrixXd::Zero(K, K);
  bulk.reference_block = Eigen::MatrixXd::Zero(K, R);

  t.atoms.push_back(std::move(manifold));
  t.atoms.push_back(std::move(bulk));
  return t;
}

}  // namespace flowlab
