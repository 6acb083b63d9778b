#include "flowlab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "flowlab/rng.hpp"
#include "flowlab/transport.hpp"

namespace flowlab {

namespace {
constexpr std::uint64_t kInitStream = 0x696e6974ULL;
constexpr std::uint64_t kDataStream = 0x64617461ULL;
}  // namespace

DAEParams init_params(int d, int r, double s, std::uint64_t seed, double b0) {
  Rng rng(seed, kInitStream);
  DAEParams p;
  p.w.resize(d, r);
  for (int i = 0; i < d; ++i)
    for (int g = 0; g < r; ++g) p.w(i, g) = s * rng.gaussian();
  p.v = Eigen::VectorXd::Zero(r);
  p.b = b0;
  return p;
}

double grid_loss(const DAEParams& params, const Schedule& schedule,
                 const Activation& act, const Eigen::VectorXd& x1,
                 const Eigen::VectorXd& x0) {
  const auto& grid = schedule.training_grid();
  const double sd = std::sqrt(static_cast<double>(params.d()));
  double acc = 0.0;
  for (double t : grid) {
    const Eigen::VectorXd xt = schedule.alpha(t) * x0 + schedule.beta(t) * x1;
    Eigen::VectorXd h = params.w.transpose() * xt / sd + schedule.p(t) * params.v;
    for (int g = 0; g < h.size(); ++g) h(g) = act(h(g));
    const Eigen::VectorXd e = x1 - params.b * xt - params.w * h / sd;
    acc += e.squaredNorm();
  }
  return acc / static_cast<double>(grid.size());
}

void sgd_step(DAEParams& params, const Schedule& schedule, const Hyperparams& hp,
              const Activation& act, const Eigen::VectorXd& x1,
              const Eigen::VectorXd& x0) {
  const auto& grid = schedule.training_grid();
  const int d = params.d(), r = params.r();
  const double sd = std::sqrt(static_cast<double>(d));
  const double tw = 1.0 / static_cast<double>(grid.size());

  double grad_b = 0.0;
  Eigen::MatrixXd grad_w = Eigen::MatrixXd::Zero(d, r);
  Eigen::VectorXd grad_v = Eigen::VectorXd::Zero(r);

  for (double t : grid) {
    const double pt = schedule.p(t);
    const Eigen::VectorXd xt = schedule.alpha(t) * x0 + schedule.beta(t) * x1;
    const Eigen::VectorXd pre = params.w.transpose() * xt / sd + pt * params.v;
    Eigen::VectorXd sh(r), shp(r);
    for (int g = 0; g < r; ++g) {
      sh(g) = act(pre(g));
      shp(g) = act.prime(pre(g));
    }
    const Eigen::VectorXd e = x1 - params.b * xt - params.w * sh / sd;
    const Eigen::VectorXd we = params.w.transpose() * e / sd;  // (w^T e)/sqrt(d)

    grad_b += tw * (-2.0) * e.dot(xt);
    grad_w += tw * (-2.0 / sd) *
              (e * sh.transpose() + xt * (shp.cwiseProduct(we)).transpose());
    grad_v += tw * (-2.0 * pt) * shp.cwiseProduct(we);
  }

  params.b -= hp.eta / (static_cast<double>(d) * d) * grad_b;
  params.w -= hp.eta * grad_w + (2.0 * hp.eta * hp.weight_decay / d) * params.w;
  params.v -= (hp.eta / d) * grad_v + (2.0 * hp.eta * hp.weight_decay / d) * params.v;
}

void sgd_step_expanded(DAEParams& params, const Schedule& schedule,
                       const Hyperparams& hp, const Activation& act,
                       const Eigen::VectorXd& x1, const Eigen::VectorXd& x0) {
  const auto& grid = schedule.training_grid();
  const int d = params.d(), r = params.r();
  const double sd = std::sqrt(static_cast<double>(d));
  const double tw = 1.0 / static_cast<double>(grid.size());
  const Eigen::MatrixXd qcal = params.w.transpose() * params.w / d;
  const Eigen::VectorXd l1 = params.w.transpose() * x1 / sd;
  const Eigen::VectorXd l0 = params.w.transpose() * x0 / sd;

  double db = 0.0;
  Eigen::MatrixXd dw = Eigen::MatrixXd::Zero(d, r);
  Eigen::VectorXd dv = Eigen::VectorXd::Zero(r);

  for (double t : grid) {
    const double at = schedule.alpha(t), bt = schedule.beta(t), pt = schedule.p(t);
    const Eigen::VectorXd xt = at * x0 + bt * x1;
    const Eigen::VectorXd pre = at * l0 + bt * l1 + pt * params.v;
    Eigen::VectorXd sh(r), shp(r);
    for (int g = 0; g < r; ++g) {
      sh(g) = act(pre(g));
      shp(g) = act.prime(pre(g));
    }
    const Eigen::VectorXd resid = (1.0 - params.b * bt) * l1 - params.b * at * l0;

    db += tw * (x1.dot(xt) - params.b * xt.squaredNorm() - sh.dot(at * l0 + bt * l1));

    // Expanded weight increment, term by term.
    dw -= tw * (2.0 * hp.eta / d) * (params.w * sh) * sh.transpose();
    dw += tw * (2.0 * hp.eta / sd) * ((1.0 - params.b * bt) * x1 - params.b * at * x0) *
          sh.transpose();
    dw -= tw * (2.0 * hp.eta / sd) * xt * (shp.cwiseProduct(qcal * sh)).transpose();
    dw += tw * (2.0 * hp.eta / sd) * xt * (shp.cwiseProduct(resid)).transpose();

    dv += tw * (2.0 * hp.eta / d) * pt * shp.cwiseProduct(resid - qcal * sh);
  }

  params.b += (2.0 * hp.eta / (static_cast<double>(d) * d)) * db;
  params.w += dw - (2.0 * hp.eta * hp.weight_decay / d) * params.w;
  params.v += dv - (2.0 * hp.eta * hp.weight_decay / d) * params.v;
}

SummaryState measure_summary(const DAEParams& params, const MixtureTarget& target) {
  if (!target.embedding) throw std::invalid_argument("measure_summary needs an embedding");
  const Embedding& emb = *target.embedding;
  const int d = params.d(), r = params.r();
  if (emb.d != d) throw std::invalid_argument("params/embedding dimension mismatch");
  const double sd = std::sqrt(static_cast<double>(d));

  SummaryState s = zero_summary(target, r, params.b);
  s.v = params.v;
  for (int i = 0; i < d; ++i) {
    const int a = emb.atom_of_coord[static_cast<std::size_t>(i)];
    AtomState& as = s.atoms[static_cast<std::size_t>(a)];
    const Eigen::RowVectorXd wi = params.w.row(i);
    as.q.noalias() += wi.transpose() * wi / d;
    as.m.noalias() += wi.transpose() * emb.centroids.row(i) / sd;
    if (target.reference_dim > 0)
      as.g.noalias() += wi.transpose() * emb.reference.row(i) / sd;
  }
  return s;
}

DAEParams warm_params(const MixtureTarget& target, int r, double norm,
                      std::uint64_t seed, double b0) {
  (void)seed;
  if (!target.embedding) throw std::invalid_argument("warm_params needs an embedding");
  const Embedding& emb = *target.embedding;
  if (r > target.n_clusters())
    throw std::invalid_argument("warm init needs r <= number of clusters");
  DAEParams p;
  p.w.resize(emb.d, r);
  const double sd = std::sqrt(static_cast<double>(emb.d));
  for (int g = 0; g < r; ++g) {
    const double nrm = emb.centroids.col(g).norm();
    if (nrm <= 0.0) throw std::invalid_argument("warm init along zero-norm centroid");
    p.w.col(g) = norm * sd / nrm * emb.centroids.col(g);
  }
  p.v = Eigen::VectorXd::Zero(r);
  p.b = b0;
  return p;
}

TrainResult train_snapshots(const DAEParams& params0, const MixtureTarget& target,
                            const Schedule& schedule, const Hyperparams& hp,
                            const Activation& act, const std::vector<long>& snapshot_steps,
                            std::uint64_t seed, std::vector<DAEParams>& snapshots,
                            long measure_every) {
  if (!target.embedding) throw std::invalid_argument("train needs an embedding");
  const Embedding& emb = *target.embedding;
  const int d = params0.d();
  const int K = target.n_clusters();
  if (measure_every <= 0)
    measure_every = static_cast<long>(std::ceil(d / (2.0 * hp.eta) * 0.1));
  long n_steps = 0;
  for (long s : snapshot_steps) n_steps = std::max(n_steps, s);
  snapshots.clear();
  snapshots.reserve(snapshot_steps.size());

  std::vector<double> cum(static_cast<std::size_t>(K));
  double acc = 0.0;
  for (int k = 0; k < K; ++k) {
    acc += target.pi(k);
    cum[static_cast<std::size_t>(k)] = acc;
  }

  Rng rng(seed, kDataStream);
  TrainResult res;
  res.params = params0;
  res.measured.emplace_back(0.0, measure_summary(res.params, target));
  std::size_t next_snap = 0;
  while (next_snap < snapshot_steps.size() && snapshot_steps[next_snap] <= 0) {
    snapshots.push_back(res.params);
    ++next_snap;
  }

  Eigen::VectorXd x1(d), x0(d);
  for (long step = 1; step <= n_steps; ++step) {
    const double u = rng.uniform();
    int k = 0;
    while (k + 1 < K && u > cum[static_cast<std::size_t>(k)]) ++k;
    for (int i = 0; i < d; ++i)
      x1(i) = emb.centroids(i, k) + std::sqrt(emb.eigenvalues(i, k)) * rng.gaussian();
    for (int i = 0; i < d; ++i) x0(i) = rng.gaussian();

    sgd_step(res.params, schedule, hp, act, x1, x0);
    if (!res.params.w.allFinite() || !std::isfinite(res.params.b) ||
        !res.params.v.allFinite()) {
      std::ostringstream msg;
      msg << "training diverged at step " << step;
      throw std::runtime_error(msg.str());
    }
    if (step % measure_every == 0 || step == n_steps)
      res.measured.emplace_back(2.0 * hp.eta * step / d,
                                measure_summary(res.params, target));
    while (next_snap < snapshot_steps.size() && snapshot_steps[next_snap] == step) {
      snapshots.push_back(res.params);
      ++next_snap;
    }
  }
  return res;
}

TrainResult train(const DAEParams& params0, const MixtureTarget& target,
                  const Schedule& schedule, const Hyperparams& hp,
                  const Activation& act, long n_steps, std::uint64_t seed,
                  long measure_every) {
  std::vector<DAEParams> unused;
  return train_snapshots(params0, target, schedule, hp, act, {n_steps}, seed,
                         unused, measure_every);
}

Eigen::MatrixXd generate_samples(const DAEParams& params, const Schedule& schedule,
                                 const Activation& act, int n, std::uint64_t seed) {
  const auto& grid = schedule.sampling_grid();
  if (grid.size() < 2) throw std::invalid_argument("sampling grid needs >= 2 times");
  const int d = params.d(), r = params.r();
  const double sd = std::sqrt(static_cast<double>(d));
  const TransportCoeffs tc = coeffs(schedule, params.b);

  Eigen::MatrixXd out(n, d);
  Eigen::VectorXd x(d), h(r);
  for (int p = 0; p < n; ++p) {
    Rng rng(seed, static_cast<std::uint64_t>(p));
    for (int i = 0; i < d; ++i) x(i) = rng.gaussian();
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
      const double t = grid[k];
      const double dt = grid[k + 1] - t;
      const double eps = schedule.epsilon(t);
      h = params.w.transpose() * x / sd + schedule.p(t) * params.v;
      for (int g = 0; g < r; ++g) h(g) = act(h(g));
      x += dt * (tc.delta(t) * x + tc.gamma(t) * (params.w * h / sd));
      if (eps > 0.0) {
        const double amp = std::sqrt(2.0 * eps * dt);
        for (int i = 0; i < d; ++i) x(i) += amp * rng.gaussian();
      }
    }
    out.row(p) = x.transpose();
  }
  return out;
}

}  // namespace flowlab
