#include "flowlab/density.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace flowlab {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_spec(const DensityGrid& g) {
  if (g.dim < 1 || g.dim > 2) throw std::invalid_argument("grid dim must be 1 or 2");
  if (static_cast<int>(g.axes.size()) != g.dim)
    throw std::invalid_argument("grid axis count mismatch");
  for (const auto& ax : g.axes)
    if (ax.n < 1 || !(ax.hi > ax.lo)) throw std::invalid_argument("bad grid axis");
}

}  // namespace

int DensityGrid::n_cells() const {
  int n = 1;
  for (const auto& ax : axes) n *= ax.n;
  return n;
}

double DensityGrid::cell_volume() const {
  double v = 1.0;
  for (const auto& ax : axes) v *= (ax.hi - ax.lo) / ax.n;
  return v;
}

std::vector<double> DensityGrid::axis_points(int k) const {
  const Axis& ax = axes[static_cast<std::size_t>(k)];
  const double h = (ax.hi - ax.lo) / ax.n;
  std::vector<double> pts(static_cast<std::size_t>(ax.n));
  for (int i = 0; i < ax.n; ++i) pts[static_cast<std::size_t>(i)] = ax.lo + (i + 0.5) * h;
  return pts;
}

Eigen::MatrixXd DensityGrid::cell_centers() const {
  Eigen::MatrixXd out(n_cells(), dim);
  if (dim == 1) {
    const auto x = axis_points(0);
    for (int i = 0; i < axes[0].n; ++i) out(i, 0) = x[static_cast<std::size_t>(i)];
  } else {
    const auto x = axis_points(0);
    const auto y = axis_points(1);
    int row = 0;
    for (int i = 0; i < axes[0].n; ++i)
      for (int j = 0; j < axes[1].n; ++j) {
        out(row, 0) = x[static_cast<std::size_t>(i)];
        out(row, 1) = y[static_cast<std::size_t>(j)];
        ++row;
      }
  }
  return out;
}

double DensityGrid::mass() const { return values.sum() * cell_volume(); }

DensityGrid make_grid(const std::vector<DensityGrid::Axis>& axes) {
  DensityGrid g;
  g.dim = static_cast<int>(axes.size());
  g.axes = axes;
  check_spec(g);
  g.values = Eigen::VectorXd::Zero(g.n_cells());
  return g;
}

void write_density_csv(const std::string& path, const DensityGrid& g) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.precision(17);
  out << "dim," << g.dim << "\n";
  for (const auto& ax : g.axes) out << "axis," << ax.lo << "," << ax.hi << "," << ax.n << "\n";
  out << "raw_mass," << g.raw_mass << "\n";
  for (int i = 0; i < g.values.size(); ++i) out << g.values(i) << "\n";
}

DensityGrid read_density_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  DensityGrid g;
  if (!std::getline(in, line) || line.rfind("dim,", 0) != 0)
    throw std::runtime_error("bad density header in " + path);
  g.dim = std::stoi(line.substr(4));
  for (int k = 0; k < g.dim; ++k) {
    if (!std::getline(in, line) || line.rfind("axis,", 0) != 0)
      throw std::runtime_error("bad axis line in " + path);
    std::istringstream ss(line.substr(5));
    DensityGrid::Axis ax;
    char comma;
    ss >> ax.lo >> comma >> ax.hi >> comma >> ax.n;
    g.axes.push_back(ax);
  }
  if (!std::getline(in, line) || line.rfind("raw_mass,", 0) != 0)
    throw std::runtime_error("bad raw_mass line in " + path);
  g.raw_mass = std::stod(line.substr(9));
  check_spec(g);
  g.values.resize(g.n_cells());
  for (int i = 0; i < g.values.size(); ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("truncated density file " + path);
    g.values(i) = std::stod(line);
  }
  return g;
}

DensityGrid kde(const Eigen::MatrixXd& samples, double bandwidth_scale,
                const DensityGrid& grid_spec) {
  check_spec(grid_spec);
  const int n = static_cast<int>(samples.rows());
  const int dim = grid_spec.dim;
  if (n < 2) throw std::invalid_argument("kde needs at least 2 samples");
  if (samples.cols() != dim) throw std::invalid_argument("kde sample dim mismatch");

  Eigen::MatrixXd centered = samples.rowwise() - samples.colwise().mean();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  const double silverman =
      std::pow(n * (dim + 2.0) / 4.0, -1.0 / (dim + 4.0));
  Eigen::MatrixXd H = (bandwidth_scale * silverman) * (bandwidth_scale * silverman) * cov;
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) {
    H += 1e-12 * Eigen::MatrixXd::Identity(dim, dim);
    llt.compute(H);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("kde bandwidth matrix not PSD even with ridge");
  }
  const Eigen::MatrixXd Hinv = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
  const double sqrt_det = llt.matrixL().determinant();  // sqrt(det H)
  const double norm = 1.0 / (n * std::pow(kTwoPi, dim / 2.0) * sqrt_det);

  DensityGrid g = grid_spec;
  g.values = Eigen::VectorXd::Zero(g.n_cells());
  const Eigen::MatrixXd centers = g.cell_centers();
  for (int cell = 0; cell < centers.rows(); ++cell) {
    double acc = 0.0;
    for (int s = 0; s < n; ++s) {
      const Eigen::VectorXd diff = centers.row(cell) - samples.row(s);
      acc += std::exp(-0.5 * diff.dot(Hinv * diff));
    }
    g.values(cell) = norm * acc;
  }
  g.raw_mass = g.mass();
  return g;
}

double hellinger(const DensityGrid& p, const DensityGrid& q) {
  if (p.dim != q.dim || p.axes.size() != q.axes.size())
    throw std::invalid_argument("hellinger grid mismatch");
  for (std::size_t k = 0; k < p.axes.size(); ++k)
    if (p.axes[k].lo != q.axes[k].lo || p.axes[k].hi != q.axes[k].hi ||
        p.axes[k].n != q.axes[k].n)
      throw std::invalid_argument("hellinger grid mismatch");
  double acc = 0.0;
  for (int i = 0; i < p.values.size(); ++i) {
    const double diff = std::sqrt(std::max(p.values(i), 0.0)) -
                        std::sqrt(std::max(q.values(i), 0.0));
    acc += diff * diff;
  }
  return acc * p.cell_volume();
}

DiscretePi discretize_pi(const Eigen::MatrixXd& z_samples, const DensityGrid& grid_spec,
                         double bandwidth_scale) {
  const DensityGrid g = kde(z_samples, bandwidth_scale, grid_spec);
  DiscretePi pi;
  pi.centers = g.cell_centers();
  const double total = g.values.sum();
  if (!(total > 0.0)) throw std::runtime_error("grid does not cover support");
  pi.weights = g.values / total;
  return pi;
}

}  // namespace flowlab
