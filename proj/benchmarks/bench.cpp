#include <benchmark/benchmark.h>

#include "flowlab/dynamics.hpp"
#include "flowlab/gaussian_expect.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/simulate.hpp"
#include "flowlab/target.hpp"
#include "flowlab/transport.hpp"

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

Schedule training_schedule() {
  Schedule s = Schedule::linear();
  s.with_training_grid({0.5}).with_uniform_sampling_grid(100, 0.98);
  return s;
}

void bm_expect_quadrature(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  Rng rng(3, 0);
  GaussianSpec s;
  s.mean.resize(dim);
  for (int i = 0; i < dim; ++i) s.mean(i) = 0.3 * rng.gaussian();
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = rng.gaussian();
  s.cov = a * a.transpose() / dim + 0.1 * Eigen::MatrixXd::Identity(dim, dim);
  FactorList fl;
  for (int i = 0; i < dim; ++i)
    fl.push_back(i % 2 == 0 ? act(0.1) : act_prime());
  const Activation th = Activation::tanh_act();
  for (auto _ : state)
    benchmark::DoNotOptimize(expect(s, fl, th, Quadrature{}));
}
BENCHMARK(bm_expect_quadrature)->Arg(2)->Arg(3)->Arg(4);

void bm_rhs_all(benchmark::State& state) {
  MixtureTarget t = trimodal(4);
  Schedule s = training_schedule();
  Hyperparams hp;
  SummaryState st = init_warm(t, 2, 0.25, 0.3);
  const Activation th = Activation::tanh_act();
  for (auto _ : state)
    benchmark::DoNotOptimize(rhs_all(st, t, s, hp, th));
}
BENCHMARK(bm_rhs_all);

void bm_sgd_step(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  MixtureTarget t = trimodal(d);
  Schedule s = training_schedule();
  Hyperparams hp;
  DAEParams p = warm_params(t, 2, 0.1);
  Rng rng(9, 0);
  Eigen::VectorXd x1(d), x0(d);
  for (int i = 0; i < d; ++i) x1(i) = rng.gaussian();
  for (int i = 0; i < d; ++i) x0(i) = rng.gaussian();
  const Activation th = Activation::tanh_act();
  for (auto _ : state) {
    sgd_step(p, s, hp, th, x1, x0);
    benchmark::DoNotOptimize(p.b);
  }
}
BENCHMARK(bm_sgd_step)->Arg(250)->Arg(1000)->Arg(4000);

void bm_sample_Z(benchmark::State& state) {
  MixtureTarget t = trimodal(4);
  Schedule s = training_schedule();
  SummaryState st = init_warm(t, 2, 0.25, 0.3);
  const Activation th = Activation::tanh_act();
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_Z(st, s, th, 256, 7).terminal().sum());
}
BENCHMARK(bm_sample_Z);

}  // namespace

BENCHMARK_MAIN();
