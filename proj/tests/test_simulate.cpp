#include <doctest.h>

#include <cmath>

#include "flowlab/rng.hpp"
#include "flowlab/simulate.hpp"
#include "flowlab/target.hpp"

using namespace flowlab;

namespace {

MixtureTarget trimodal(int d) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, 3);
  c(0, 0) = 1.0;
  c(1, 1) = 1.0;
  c(0, 2) = -1.0;
  return isotropic_mixture(Eigen::VectorXd::Constant(3, 1.0 / 3.0), c,
                           Eigen::MatrixXd::Identity(d, 2));
}

void random_pair(int d, Rng& rng, Eigen::VectorXd& x1, Eigen::VectorXd& x0) {
  x1.resize(d);
  x0.resize(d);
  for (int i = 0; i < d; ++i) x1(i) = rng.gaussian() + 0.1;
  for (int i = 0; i < d; ++i) x0(i) = rng.gaussian();
}

}  // namespace

TEST_CASE("direct and expanded SGD steps agree") {
  const int d = 60, r = 3;
  Schedule s = Schedule::linear();
  s.with_training_grid({0.25, 0.5, 0.75});
  s.with_p([](double t) { return std::cos(M_PI * t); });
  Hyperparams hp;
  hp.eta = 0.3;
  hp.weight_decay = 0.2;
  Rng rng(17, 0);
  for (const Activation& act : {Activation::tanh_act(), Activation::relu()}) {
    DAEParams a = init_params(d, r, 0.5, 4, 0.2);
    a.v << 0.1, -0.3, 0.2;
    DAEParams b = a;
    Eigen::VectorXd x1, x0;
    random_pair(d, rng, x1, x0);
    sgd_step(a, s, hp, act, x1, x0);
    sgd_step_expanded(b, s, hp, act, x1, x0);
    CHECK(std::abs(a.b - b.b) < 1e-12);
    CHECK((a.w - b.w).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.v - b.v).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  const int d = 50, r = 3;
  Schedule s = Schedule::linear();
  s.with_training_grid({0.4, 0.8});
  s.with_p([](double t) { return std::cos(M_PI * t); });
  Hyperparams hp;
  hp.eta = 1.0;
  hp.weight_decay = 0.0;  // decay is not part of the loss gradient
  Rng rng(23, 1);
  for (const Activation& act : {Activation::tanh_act(), Activation::relu()}) {
    DAEParams p = init_params(d, r, 0.4, 8, 0.15);
    p.v << 0.2, -0.1, 0.05;
    Eigen::VectorXd x1, x0;
    random_pair(d, rng, x1, x0);

    // Recover the gradients from one step's parameter deltas: the update
    // scales are eta/d^2 (b), eta (w), eta/d (v).
    DAEParams q = p;
    sgd_step(q, s, hp, act, x1, x0);
    const double gb = (p.b - q.b) * d * d / hp.eta;
    const Eigen::MatrixXd gw = (p.w - q.w) / hp.eta;
    const Eigen::VectorXd gv = (p.v - q.v) * d / hp.eta;

    const double h = 1e-5;
    auto loss = [&](const DAEParams& pp) { return grid_loss(pp, s, act, x1, x0); };
    {
      DAEParams pp = p, pm = p;
      pp.b += h;
      pm.b -= h;
      const double fd = (loss(pp) - loss(pm)) / (2 * h);
      CHECK(std::abs(gb - fd) < 1e-6 * (std::abs(fd) + 1.0));
    }
    for (auto [i, g] : {std::pair{3, 0}, std::pair{17, 1}, std::pair{41, 2}}) {
      DAEParams pp = p, pm = p;
      pp.w(i, g) += h;
      pm.w(i, g) -= h;
      const double fd = (loss(pp) - loss(pm)) / (2 * h);
      CHECK(std::abs(gw(i, g) - fd) < 1e-6 * (std::abs(fd) + 1.0));
    }
    for (int g = 0; g < r; ++g) {
      DAEParams pp = p, pm = p;
      pp.v(g) += h;
      pm.v(g) -= h;
      const double fd = (loss(pp) - loss(pm)) / (2 * h);
      CHECK(std::abs(gv(g) - fd) < 1e-6 * (std::abs(fd) + 1.0));
    }
  }
}

TEST_CASE("measured summaries of structured weights") {
  const int d = 300;
  MixtureTarget t = trimodal(d);
  DAEParams p = warm_params(t, 2, 0.2, 0, 0.5);
  SummaryState s = measure_summary(p, t);
  CHECK(s.b == 0.5);
  CHECK(s.M(0)(0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(s.M(1)(1) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(s.Qcal()(0, 0) == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(s.Qcal()(1, 0) == doctest::Approx(0.0));
  // Cold start concentrates: Qcal ~ s^2 I with O(1/sqrt(d)) fluctuations.
  SummaryState c = measure_summary(init_params(d, 2, 0.3, 11), t);
  CHECK(c.Qcal()(0, 0) == doctest::Approx(0.09).epsilon(0.2));
  CHECK(std::abs(c.Qcal()(0, 1)) < 0.05);
}

TEST_CASE("training runs, records theta, and is deterministic") {
  const int d = 100;
  MixtureTarget t = trimodal(d);
  Schedule s = Schedule::linear();
  s.with_training_grid({0.5});
  Hyperparams hp;
  DAEParams p0 = warm_params(t, 2, 0.1);
  TrainResult a = train(p0, t, s, hp, Activation::tanh_act(), 500, 3, 100);
  TrainResult b = train(p0, t, s, hp, Activation::tanh_act(), 500, 3, 100);
  CHECK((a.params.w - b.params.w).norm() == doctest::Approx(0.0));
  REQUIRE(a.measured.size() >= 2);
  CHECK(a.measured.front().first == 0.0);
  CHECK(a.measured.back().first == doctest::Approx(2.0 * hp.eta * 500 / d));
}

TEST_CASE("snapshots are taken at the requested steps") {
  const int d = 80;
  MixtureTarget t = trimodal(d);
  Schedule s = Schedule::linear();
  s.with_training_grid({0.5});
  Hyperparams hp;
  DAEParams p0 = warm_params(t, 2, 0.1);
  std::vector<DAEParams> snaps;
  TrainResult full = train_snapshots(p0, t, s, hp, Activation::tanh_act(),
                                     {100, 250}, 3, snaps);
  REQUIRE(snaps.size() == 2);
  // The snapshot at the final step equals a plain run of that length.
  TrainResult direct = train(p0, t, s, hp, Activation::tanh_act(), 100, 3);
  CHECK((snaps[0].w - direct.params.w).norm() == doctest::Approx(0.0));
  CHECK(snaps[0].b == direct.params.b);
  TrainResult direct2 = train(p0, t, s, hp, Activation::tanh_act(), 250, 3);
  CHECK((snaps[1].w - direct2.params.w).norm() == doctest::Approx(0.0));
  CHECK(full.params.b == direct2.params.b);
}

TEST_CASE("generation draws from N(0, I) and responds to the skip connection") {
  const int d = 120;
  MixtureTarget t = trimodal(d);
  Schedule s = Schedule::linear();
  s.with_uniform_sampling_grid(50, 0.9);
  DAEParams p = warm_params(t, 2, 0.1, 0, 0.0);
  const Eigen::MatrixXd x = generate_samples(p, s, Activation::tanh_act(), 500, 21);
  CHECK(x.rows() == 500);
  CHECK(x.cols() == d);
  CHECK(x.allFinite());
  const Eigen::MatrixXd y = generate_samples(p, s, Activation::tanh_act(), 500, 21);
  CHECK((x - y).norm() == doctest::Approx(0.0));
}
