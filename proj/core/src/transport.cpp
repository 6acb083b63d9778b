#include "flowlab/transport.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "flowlab/rng.hpp"

namespace flowlab {

namespace {
constexpr std::uint64_t kBlurStream = 0x70726f6a626c7572ULL;
}

double TransportCoeffs::gamma(double t) const {
  const double a = schedule->alpha(t);
  return schedule->beta_dot(t) - schedule->alpha_dot(t) / a * schedule->beta(t) +
         schedule->epsilon(t) * schedule->beta(t) / (a * a);
}

double TransportCoeffs::delta(double t) const {
  const double a = schedule->alpha(t);
  return b * gamma(t) + schedule->alpha_dot(t) / a - schedule->epsilon(t) / (a * a);
}

TransportCoeffs coeffs(const Schedule& schedule, double b_tau) {
  for (double t : schedule.sampling_grid())
    if (!(schedule.alpha(t) > 0.0))
      throw std::runtime_error("alpha vanishes on the sampling grid; extend t_f < 1");
  return TransportCoeffs{&schedule, b_tau};
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const double cutoff = 1e-10 * std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1.0);
  Eigen::VectorXd root = es.eigenvalues();
  for (int i = 0; i < root.size(); ++i)
    root(i) = root(i) > cutoff ? std::sqrt(root(i)) : 0.0;
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const double cutoff = 1e-10 * std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 0.0);
  Eigen::VectorXd inv = es.eigenvalues();
  for (int i = 0; i < inv.size(); ++i)
    inv(i) = std::abs(inv(i)) > cutoff && inv(i) > 0.0 ? 1.0 / inv(i) : 0.0;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

ZEnsemble sample_Z(const SummaryState& state, const Schedule& schedule,
                   const Activation& act, int n, std::uint64_t seed) {
  const auto& grid = schedule.sampling_grid();
  if (grid.size() < 2) throw std::invalid_argument("sampling grid needs >= 2 times");
  const int r = state.r();
  const Eigen::MatrixXd qcal = 0.5 * (state.Qcal() + state.Qcal().transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(qcal);
  if (es.eigenvalues().minCoeff() < -1e-8 * std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1.0))
    throw std::runtime_error("Qcal not PSD");
  const Eigen::MatrixXd root = psd_sqrt(qcal);
  const TransportCoeffs tc = coeffs(schedule, state.b);

  ZEnsemble ens;
  ens.seed = seed;
  ens.times = grid;
  ens.paths.assign(grid.size(), Eigen::MatrixXd(n, r));

  Eigen::VectorXd z(r), xi(r), drift(r);
  for (int p = 0; p < n; ++p) {
    Rng rng(seed, static_cast<std::uint64_t>(p));
    for (int g = 0; g < r; ++g) xi(g) = rng.gaussian();
    z = root * xi;
    ens.paths[0].row(p) = z.transpose();
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
      const double t = grid[k];
      const double dt = grid[k + 1] - t;
      const double eps = schedule.epsilon(t);
      const double pt = schedule.p(t);
      for (int g = 0; g < r; ++g) drift(g) = act(z(g) + pt * state.v(g));
      z += dt * (tc.delta(t) * z + tc.gamma(t) * (qcal * drift));
      if (eps > 0.0) {
        for (int g = 0; g < r; ++g) xi(g) = rng.gaussian();
        z += std::sqrt(2.0 * eps * dt) * (root * xi);
      }
      ens.paths[k + 1].row(p) = z.transpose();
    }
  }
  return ens;
}

double YVariance::at_time(double t) const {
  if (t <= times.front()) return values.front();
  if (t >= times.back()) return values.back();
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    if (t <= times[k + 1]) {
      const double w = (t - times[k]) / (times[k + 1] - times[k]);
      return (1.0 - w) * values[k] + w * values[k + 1];
    }
  }
  return values.back();
}

YVariance y_variance(const Schedule& schedule, double b_tau) {
  const auto& grid = schedule.sampling_grid();
  if (grid.size() < 2) throw std::invalid_argument("sampling grid needs >= 2 times");
  const TransportCoeffs tc = coeffs(schedule, b_tau);
  YVariance yv;
  yv.times = grid;
  yv.values.assign(grid.size(), 1.0);
  double var = 1.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double t = grid[k];
    const double dt = grid[k + 1] - t;
    const double f = 1.0 + dt * tc.delta(t);
    var = f * f * var + 2.0 * schedule.epsilon(t) * dt;
    yv.values[k + 1] = var;
  }
  return yv;
}

double y_variance_continuous(const Schedule& schedule, double b_tau, double t,
                             int n_quad) {
  const TransportCoeffs tc{&schedule, b_tau};
  // var(t) = e^{2 int Delta} (1 + int 2 eps e^{-2 int Delta}); trapezoid in s.
  const double h = t / n_quad;
  double int_delta = 0.0;
  double accum = 0.0;
  double prev_delta = tc.delta(0.0);
  double prev_inner = 2.0 * schedule.epsilon(0.0);
  for (int k = 1; k <= n_quad; ++k) {
    const double s = k * h;
    const double ds_delta = tc.delta(s);
    int_delta += 0.5 * h * (prev_delta + ds_delta);
    const double inner = 2.0 * schedule.epsilon(s) * std::exp(-2.0 * int_delta);
    accum += 0.5 * h * (prev_inner + inner);
    prev_delta = ds_delta;
    prev_inner = inner;
  }
  return std::exp(2.0 * int_delta) * (1.0 + accum);
}

ProjectedLaw projected_law(const SummaryState& state, const Schedule& schedule,
                           double t) {
  const int R = state.reference_dim();
  const Eigen::MatrixXd qcal = 0.5 * (state.Qcal() + state.Qcal().transpose());
  const Eigen::MatrixXd qinv = pseudo_inverse(qcal);
  const Eigen::MatrixXd G = state.G();  // r x R

  ProjectedLaw law;
  law.loading = G.transpose() * qinv;  // R x r
  law.yvar = y_variance(schedule, state.b).at_time(t);
  Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(R, R) - G.transpose() * qinv * G;
  law.gaussian_cov = 0.5 * law.yvar * (proj + proj.transpose());
  return law;
}

std::pair<ProjectedLaw, Eigen::MatrixXd> project(const SummaryState& state,
                                                 const ZEnsemble& z,
                                                 const Schedule& schedule) {
  const ProjectedLaw law = projected_law(state, schedule, z.times.back());
  const Eigen::MatrixXd& zt = z.terminal();
  const int n = static_cast<int>(zt.rows());
  const int R = static_cast<int>(law.loading.rows());
  const Eigen::MatrixXd blur_root = psd_sqrt(law.gaussian_cov);

  Eigen::MatrixXd out(n, R);
  Eigen::VectorXd xi(R);
  for (int p = 0; p < n; ++p) {
    Rng rng(z.seed ^ kBlurStream, static_cast<std::uint64_t>(p));
    for (int j = 0; j < R; ++j) xi(j) = rng.gaussian();
    out.row(p) = (law.loading * zt.row(p).transpose() + blur_root * xi).transpose();
  }
  return {law, out};
}

DensityGrid density_on_grid(const ProjectedLaw& law, const Eigen::MatrixXd& z_terminal,
                            const DensityGrid& grid_spec) {
  const int R = static_cast<int>(law.loading.rows());
  if (R != grid_spec.dim) throw std::invalid_argument("grid dim != reference dim");
  const int n = static_cast<int>(z_terminal.rows());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(law.gaussian_cov);
  const double min_ev = es.eigenvalues().minCoeff();
  if (min_ev < 1e-12) {
    std::cerr << "density_on_grid: singular blur covariance, falling back to KDE\n";
    Eigen::MatrixXd proj = z_terminal * law.loading.transpose();
    DensityGrid g = kde(proj, 1.0, grid_spec);
    const double m = g.mass();
    g.raw_mass = m;
    if (m > 0.0) g.values /= m;
    return g;
  }

  const Eigen::MatrixXd cov_inv = law.gaussian_cov.llt().solve(
      Eigen::MatrixXd::Identity(R, R));
  const double sqrt_det = std::sqrt(es.eigenvalues().prod());
  const double norm = 1.0 / (n * std::pow(6.283185307179586, R / 2.0) * sqrt_det);
  const Eigen::MatrixXd means = z_terminal * law.loading.transpose();  // n x R

  DensityGrid g = grid_spec;
  g.values = Eigen::VectorXd::Zero(g.n_cells());
  const Eigen::MatrixXd centers = g.cell_centers();
  for (int cell = 0; cell < centers.rows(); ++cell) {
    double acc = 0.0;
    for (int s = 0; s < n; ++s) {
      const Eigen::VectorXd diff = centers.row(cell) - means.row(s);
      acc += std::exp(-0.5 * diff.dot(cov_inv * diff));
    }
    g.values(cell) = norm * acc;
  }
  const double m = g.mass();
  g.raw_mass = m;
  if (m > 0.0) g.values /= m;
  return g;
}

}  // namespace flowlab
