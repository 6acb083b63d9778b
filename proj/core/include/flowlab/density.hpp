#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace flowlab {

/// Uniform cell-centered grid density on a 1- or 2-d box.
struct DensityGrid {
  struct Axis {
    double lo = 0.0, hi = 0.0;
    int n = 0;
  };
  int dim = 0;
  std::vector<Axis> axes;
  Eigen::VectorXd values;  // row-major over grid cells, nonnegative
  double raw_mass = 1.0;   // Riemann mass before any normalization

  int n_cells() const;
  double cell_volume() const;
  std::vector<double> axis_points(int k) const;  // cell centers
  /// All cell centers as an n_cells x dim matrix (row-major cell order).
  Eigen::MatrixXd cell_centers() const;
  double mass() const;  // current Riemann sum
};

DensityGrid make_grid(const std::vector<DensityGrid::Axis>& axes);

void write_density_csv(const std::string& path, const DensityGrid& g);
DensityGrid read_density_csv(const std::string& path);

/// Gaussian KDE with bandwidth matrix H = (scale * s)^2 * C_hat, where C_hat
/// is the sample covariance and s the Silverman factor
/// (n (dim+2)/4)^(-1/(dim+4)). A 1e-12 ridge fixes singular C_hat.
DensityGrid kde(const Eigen::MatrixXd& samples, double bandwidth_scale,
                const DensityGrid& grid_spec);

/// Riemann sum of (sqrt(p) - sqrt(q))^2; equals twice the squared standard
/// Hellinger distance. Grids must match exactly.
double hellinger(const DensityGrid& p, const DensityGrid& q);

struct DiscretePi {
  Eigen::VectorXd weights;  // probability vector over cells
  Eigen::MatrixXd centers;  // n_cells x dim
};

/// KDE of the samples evaluated at cell centers, normalized to sum 1.
DiscretePi discretize_pi(const Eigen::MatrixXd& z_samples, const DensityGrid& grid_spec,
                         double bandwidth_scale = 1.5);

}  // namespace flowlab
