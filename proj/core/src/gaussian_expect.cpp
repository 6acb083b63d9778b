#include "flowlab/gaussian_expect.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

#include "flowlab/rng.hpp"

namespace flowlab {

namespace {

HermiteRule compute_hermite(int order) {
  // Golub-Welsch on the Jacobi matrix of the (probabilists') Hermite
  // recurrence: off-diagonal sqrt(k).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double off = std::sqrt(static_cast<double>(k));
    jacobi(k, k - 1) = off;
    jacobi(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  HermiteRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < order; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = v0 * v0;  // total mass 1
  }
  return rule;
}

}  // namespace

const HermiteRule& hermite_rule(int order) {
  if (order < 2) throw std::invalid_argument("quadrature order must be >= 2");
  static std::map<int, HermiteRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, compute_hermite(order)).first;
  return it->second;
}

namespace {

inline double eval_factor(const Factor& f, double x, const Activation& act) {
  switch (f.kind) {
    case Factor::Kind::Act: return act(x + f.shift);
    case Factor::Kind::ActPrime: return act.prime(x + f.shift);
    case Factor::Kind::Linear: return x;
  }
  return x;
}

struct Factorization {
  Eigen::MatrixXd transform;  // dim x rank, columns scaled eigenvectors
  int rank = 0;
};

struct LegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // on [-1, 1], total mass 2
};

const LegendreRule& legendre_rule(int order) {
  static std::map<int, LegendreRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) {
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
    for (int k = 1; k < order; ++k) {
      const double off = k / std::sqrt(4.0 * k * k - 1.0);
      jacobi(k, k - 1) = off;
      jacobi(k - 1, k) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    LegendreRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    for (int i = 0; i < order; ++i) {
      rule.nodes[i] = es.eigenvalues()(i);
      const double v0 = es.eigenvectors()(0, i);
      rule.weights[i] = 2.0 * v0 * v0;
    }
    it = cache.emplace(order, std::move(rule)).first;
  }
  return it->second;
}

Factorization factorize(const GaussianSpec& spec) {
  const int dim = spec.dim();
  if (spec.cov.rows() != dim || spec.cov.cols() != dim)
    throw std::invalid_argument("mean/cov dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spec.cov);
  const double max_ev = std::max(es.eigenvalues().maxCoeff(), 0.0);
  const double cut = std::max(1e-12 * max_ev, 1e-14);
  Factorization fac;
  fac.transform.resize(dim, dim);
  for (int j = 0; j < dim; ++j) {
    const double ev = es.eigenvalues()(j);
    if (ev > cut) {
      fac.transform.col(fac.rank) = std::sqrt(ev) * es.eigenvectors().col(j);
      ++fac.rank;
    }
  }
  fac.transform.conservativeResize(dim, fac.rank);
  return fac;
}

// Kinked activations (ReLU and its step-function derivative) defeat plain
// Gauss-Hermite: the error decays polynomially in the order. But each factor
// acts on a single coordinate, so every kink sits at a fixed point of that
// coordinate's axis. This evaluator integrates coordinate by coordinate via
// sequential conditioning (a semi-definite Cholesky of the covariance): a
// level whose factor is kinked uses panelled Gauss-Legendre with a panel edge
// at its own kink, every other level uses Gauss-Hermite. Conditioning keeps
// each level one-dimensional with a single known kink, and the Gaussian
// smoothing of inner levels leaves outer integrands analytic, so spectral
// accuracy is restored everywhere.
class KinkedIntegrator {
 public:
  KinkedIntegrator(const GaussianSpec& spec, const FactorList& factors,
                   const Activation& act, int order)
      : spec_(spec),
        factors_(factors),
        act_(act),
        gh_(hermite_rule(order)),
        gl_(legendre_rule(12)) {
    const int dim = spec.dim();
    const double cut = 1e-12 * std::max(spec.cov.diagonal().maxCoeff(), 0.0);
    chol_ = Eigen::MatrixXd::Zero(dim, dim);
    for (int j = 0; j < dim; ++j) {
      const double d = spec.cov(j, j) - chol_.row(j).head(j).squaredNorm();
      if (d > cut) {
        chol_(j, j) = std::sqrt(d);
        for (int i = j + 1; i < dim; ++i)
          chol_(i, j) = (spec.cov(i, j) -
                         chol_.row(i).head(j).dot(chol_.row(j).head(j))) /
                        chol_(j, j);
      }
    }
    z_.setZero(dim);
  }

  double run() { return level(0); }

 private:
  double level(int i) {
    const int dim = spec_.dim();
    if (i == dim) return 1.0;
    const Factor& f = factors_[i];
    const double m = spec_.mean(i) + chol_.row(i).head(i).dot(z_.head(i));
    const double s = chol_(i, i);
    if (s == 0.0) {
      z_(i) = 0.0;
      return eval_factor(f, m, act_) * level(i + 1);
    }
    double total = 0.0;
    if (f.kind == Factor::Kind::Linear) {
      for (std::size_t k = 0; k < gh_.nodes.size(); ++k) {
        z_(i) = gh_.nodes[k];
        total += gh_.weights[k] * (m + s * z_(i)) * level(i + 1);
      }
      return total;
    }
    // Activation factor: panel the conditional Gaussian with an edge at the
    // kink (in standardized units).
    std::vector<double> cuts = {-8.0, -5.0, -3.0, -2.0, -1.0, 0.0,
                                1.0,  2.0,  3.0,  5.0,  8.0};
    const double uk = (-f.shift - m) / s;
    if (uk > -8.0 && uk < 8.0) cuts.push_back(uk);
    std::sort(cuts.begin(), cuts.end());
    constexpr double inv_sqrt2pi = 0.39894228040143268;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double half = 0.5 * (cuts[c + 1] - cuts[c]);
      if (half < 1e-14) continue;
      const double mid = 0.5 * (cuts[c] + cuts[c + 1]);
      for (std::size_t k = 0; k < gl_.nodes.size(); ++k) {
        const double u = mid + half * gl_.nodes[k];
        z_(i) = u;
        total += half * gl_.weights[k] * inv_sqrt2pi * std::exp(-0.5 * u * u) *
                 eval_factor(f, m + s * u, act_) * level(i + 1);
      }
    }
    return total;
  }

  const GaussianSpec& spec_;
  const FactorList& factors_;
  const Activation& act_;
  const HermiteRule& gh_;
  const LegendreRule& gl_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd z_;
};

}  // namespace

double expect(const GaussianSpec& spec, const FactorList& factors,
              const Activation& act, Quadrature method) {
  const int dim = spec.dim();
  if (static_cast<int>(factors.size()) != dim)
    throw std::invalid_argument("factor list length != Gaussian dimension");
  const int order = method.order;
  const HermiteRule& rule = hermite_rule(order);
  Factorization fac = factorize(spec);
  const int rank = fac.rank;

  if (rank == 0) {
    double prod = 1.0;
    for (int i = 0; i < dim; ++i) prod *= eval_factor(factors[i], spec.mean(i), act);
    return prod;
  }
  if (act.has_kink())
    return KinkedIntegrator(spec, factors, act, order).run();

  // Odd-counter loop over the rank-dimensional tensor grid.
  std::vector<int> idx(rank, 0);
  Eigen::VectorXd xi(dim);
  double total = 0.0;
  for (;;) {
    double wgt = 1.0;
    xi = spec.mean;
    for (int j = 0; j < rank; ++j) {
      wgt *= rule.weights[idx[j]];
      xi.noalias() += rule.nodes[idx[j]] * fac.transform.col(j);
    }
    double prod = 1.0;
    for (int i = 0; i < dim; ++i) prod *= eval_factor(factors[i], xi(i), act);
    total += wgt * prod;

    int j = 0;
    while (j < rank && ++idx[j] == order) idx[j++] = 0;
    if (j == rank) break;
  }
  return total;
}

namespace {

std::pair<double, double> mc_moments(const GaussianSpec& spec, const FactorList& factors,
                                     const Activation& act, MonteCarlo method) {
  const int dim = spec.dim();
  if (static_cast<int>(factors.size()) != dim)
    throw std::invalid_argument("factor list length != Gaussian dimension");
  const Factorization fac = factorize(spec);
  Rng rng(method.seed, 0x6d6f6d656e747300ULL);
  Eigen::VectorXd z(fac.rank), xi(dim);
  double sum = 0.0, sum2 = 0.0;
  for (std::int64_t s = 0; s < method.n; ++s) {
    for (int j = 0; j < fac.rank; ++j) z(j) = rng.gaussian();
    xi = spec.mean;
    if (fac.rank > 0) xi.noalias() += fac.transform * z;
    double prod = 1.0;
    for (int i = 0; i < dim; ++i) prod *= eval_factor(factors[i], xi(i), act);
    sum += prod;
    sum2 += prod * prod;
  }
  const double n = static_cast<double>(method.n);
  const double mean = sum / n;
  const double var = std::max(sum2 / n - mean * mean, 0.0);
  return {mean, std::sqrt(var / n)};
}

}  // namespace

double expect(const GaussianSpec& spec, const FactorList& factors,
              const Activation& act, MonteCarlo method) {
  return mc_moments(spec, factors, act, method).first;
}

std::pair<double, double> expect_mc_with_error(const GaussianSpec& spec,
                                               const FactorList& factors,
                                               const Activation& act,
                                               MonteCarlo method) {
  return mc_moments(spec, factors, act, method);
}

}  // namespace flowlab
