#include <doctest.h>

#include <cmath>

#include "flowlab/transport.hpp"
#include "flowlab/target.hpp"

using namespace flowlab;

namespace {

// alpha = e^{-t} makes alpha'/alpha = -1, so with b = 0, eps = 0 the
// dilatation Delta is the constant -1.
Schedule decaying_schedule(int n_steps) {
  Schedule s;
  std::vector<double> times, a, b;
  const int grid = 20000;
  for (int k = 0; k <= grid; ++k) {
    const double t = static_cast<double>(k) / grid;
    times.push_back(t);
    a.push_back(std::exp(-t));
    b.push_back(t);
  }
  s = Schedule::tabulated(times, a, b);
  s.with_uniform_sampling_grid(n_steps, 1.0 - 1e-9);
  return s;
}

SummaryState toy_state(int r, int R) {
  MixtureTarget t = heavy_spectrum_target({{2.0, r}, {1.0, 10 - r}}, R);
  SummaryState s = init_cold(t, r, 0.7, 0.3);
  return s;
}

}  // namespace

TEST_CASE("transport coefficients from the schedule") {
  Schedule s = Schedule::linear();
  s.with_constant_epsilon(0.2).with_uniform_sampling_grid(10, 0.9);
  TransportCoeffs tc = coeffs(s, 0.5);
  const double t = 0.5, a = 0.5, b = 0.5;
  const double gamma = 1.0 - (-1.0 / a) * b + 0.2 * b / (a * a);
  CHECK(tc.gamma(t) == doctest::Approx(gamma));
  CHECK(tc.delta(t) == doctest::Approx(0.5 * gamma + (-1.0 / a) - 0.2 / (a * a)));
}

TEST_CASE("coefficients refuse a vanishing alpha on the grid") {
  Schedule s = Schedule::linear();
  s.with_uniform_sampling_grid(10, 1.0);
  CHECK_THROWS(coeffs(s, 0.0));
}

TEST_CASE("constant dilatation gives the exponential Y-variance") {
  Schedule s = decaying_schedule(10000);
  const YVariance yv = y_variance(s, 0.0);
  CHECK(std::abs(yv.terminal() - std::exp(-2.0)) < 1e-3);
  CHECK(yv.values.front() == doctest::Approx(1.0));
  // Continuous-time quadrature agrees.
  CHECK(y_variance_continuous(s, 0.0, s.sampling_grid().back()) ==
        doctest::Approx(std::exp(-2.0)).epsilon(1e-3));
}

TEST_CASE("discrete and continuous Y-variance recursions agree with diffusion") {
  // The epsilon term both injects noise and strengthens the contraction in
  // Delta, so no monotonicity in epsilon; check the two integrators agree.
  Schedule s = Schedule::linear();
  s.with_uniform_sampling_grid(2000, 0.9);
  s.with_constant_epsilon(0.3);
  const double noisy = y_variance(s, 0.2).terminal();
  CHECK(noisy > 0.0);
  CHECK(y_variance_continuous(s, 0.2, 0.9) == doctest::Approx(noisy).epsilon(5e-3));
}

TEST_CASE("psd sqrt and pseudo-inverse on a rank-deficient matrix") {
  Eigen::MatrixXd u(2, 1);
  u << 3.0, 4.0;
  const Eigen::MatrixXd m = u * u.transpose();  // rank 1, eigenvalue 25
  const Eigen::MatrixXd root = psd_sqrt(m);
  CHECK((root * root - m).norm() == doctest::Approx(0.0).epsilon(1e-10));
  const Eigen::MatrixXd pinv = pseudo_inverse(m);
  CHECK((m * pinv * m - m).norm() == doctest::Approx(0.0).epsilon(1e-10));
  CHECK((pinv * m * pinv - pinv).norm() == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("Z ensemble starts from N(0, Qcal) and is seed-deterministic") {
  SummaryState st = toy_state(2, 1);
  Schedule s = Schedule::linear();
  s.with_uniform_sampling_grid(50, 0.9);
  const ZEnsemble z1 = sample_Z(st, s, Activation::tanh_act(), 4000, 3);
  const ZEnsemble z2 = sample_Z(st, s, Activation::tanh_act(), 4000, 3);
  CHECK((z1.terminal() - z2.terminal()).norm() == doctest::Approx(0.0));
  const Eigen::MatrixXd& z0 = z1.paths.front();
  const Eigen::MatrixXd cov = z0.transpose() * z0 / z0.rows();
  CHECK((cov - st.Qcal()).norm() < 0.05);
}

TEST_CASE("odd-activation ensembles keep sign symmetry in distribution") {
  // v = 0, M = 0, sigma odd: the Z law is symmetric under z -> -z, so odd
  // moments vanish at Monte Carlo accuracy.
  SummaryState st = toy_state(2, 1);
  Schedule s = Schedule::linear();
  s.with_constant_epsilon(0.05).with_uniform_sampling_grid(60, 0.9);
  const int n = 20000;
  const ZEnsemble z = sample_Z(st, s, Activation::tanh_act(), n, 5);
  const Eigen::MatrixXd& zt = z.terminal();
  for (int j = 0; j < zt.cols(); ++j) {
    const double sd = std::sqrt(zt.col(j).array().square().mean());
    const double m1 = zt.col(j).mean();
    const double m3 = zt.col(j).array().cube().mean();
    CHECK(std::abs(m1) < 3.0 * sd / std::sqrt(n));
    CHECK(std::abs(m3) < 3.0 * 15.0 * sd * sd * sd / std::sqrt(n));
  }
}

TEST_CASE("projection law shapes and the blur covariance") {
  SummaryState st = toy_state(2, 1);
  Schedule s = Schedule::linear();
  s.with_uniform_sampling_grid(50, 0.9);
  const ProjectedLaw law = projected_law(st, s, 0.9);
  CHECK(law.loading.rows() == 1);
  CHECK(law.loading.cols() == 2);
  // Cold start has G = 0, so the blur is the full isotropic yvar.
  CHECK(law.gaussian_cov(0, 0) ==
        doctest::Approx(y_variance(s, st.b).at_time(0.9)).epsilon(1e-10));

  const ZEnsemble z = sample_Z(st, s, Activation::tanh_act(), 2000, 7);
  const auto [law2, proj] = project(st, z, s);
  CHECK(proj.rows() == 2000);
  CHECK(proj.cols() == 1);
  const Eigen::MatrixXd zt = z.terminal();
  const Eigen::MatrixXd zcov = zt.transpose() * zt / zt.rows();
  const double var = proj.array().square().mean();
  CHECK(var ==
        doctest::Approx(law2.gaussian_cov(0, 0) +
                        (law2.loading * zcov * law2.loading.transpose())(0, 0))
            .epsilon(0.1));
}
