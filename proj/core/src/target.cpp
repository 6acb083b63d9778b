#include "flowlab/target.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "flowlab/rng.hpp"

namespace flowlab {

TargetReport validate_target(const MixtureTarget& t) {
  TargetReport rep;
  auto fail = [&rep](const std::string& msg) {
    rep.ok = false;
    rep.issues.push_back(msg);
  };
  const int K = t.n_clusters();
  if (K == 0) {
    fail("no clusters");
    return rep;
  }
  if (t.pi.minCoeff() < 0.0) fail("negative cluster weight");
  if (std::abs(t.pi.sum() - 1.0) > 1e-12) fail("cluster weights do not sum to 1");

  double total_weight = 0.0;
  Eigen::MatrixXd theta_sum = Eigen::MatrixXd::Zero(K, K);
  Eigen::MatrixXd p_sum = Eigen::MatrixXd::Zero(K, t.reference_dim);
  for (const auto& a : t.atoms) {
    total_weight += a.weight;
    if (a.eigenvalues.size() != K) fail("atom eigenvalue vector length != K");
    if (a.eigenvalues.size() == K && a.eigenvalues.minCoeff() < 0.0)
      fail("negative covariance eigenvalue");
    if (a.centroid_block.rows() != K || a.centroid_block.cols() != K)
      fail("atom centroid block shape mismatch");
    else {
      if ((a.centroid_block - a.centroid_block.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        fail("atom centroid block not symmetric");
      theta_sum += a.centroid_block;
    }
    if (a.reference_block.rows() == K && a.reference_block.cols() == t.reference_dim)
      p_sum += a.reference_block;
    else
      fail("atom reference block shape mismatch");
  }
  if (std::abs(total_weight - 1.0) > 1e-12) fail("atom weights do not sum to 1");
  if ((theta_sum - t.centroid_gram).cwiseAbs().maxCoeff() > 1e-8)
    fail("atom centroid blocks do not sum to T");
  if (t.reference_dim > 0 && (p_sum - t.reference_overlaps).cwiseAbs().maxCoeff() > 1e-8)
    fail("atom reference blocks do not sum to P");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t.centroid_gram);
  if (es.eigenvalues().minCoeff() < -1e-8) fail("T not PSD");

  if (t.embedding) {
    const Embedding& e = *t.embedding;
    if (e.centroids.rows() != e.d || e.centroids.cols() != K) fail("embedding centroid shape");
    if (e.eigenvalues.rows() != e.d || e.eigenvalues.cols() != K)
      fail("embedding eigenvalue shape");
    if (static_cast<int>(e.atom_of_coord.size()) != e.d) fail("embedding atom map length");
    const MixtureTarget derived = target_from_embedding(t.pi, e);
    if ((derived.centroid_gram - t.centroid_gram).cwiseAbs().maxCoeff() > 1e-8)
      fail("embedding-induced T disagrees with abstract T");
    if (t.reference_dim > 0 &&
        (derived.reference_overlaps - t.reference_overlaps).cwiseAbs().maxCoeff() > 1e-8)
      fail("embedding-induced P disagrees with abstract P");
    if (std::abs(average_eigenvalue(derived) - average_eigenvalue(t)) > 1e-8)
      fail("embedding-induced average eigenvalue disagrees");
    if (t.reference_dim > 0) {
      Eigen::MatrixXd gram = e.reference.transpose() * e.reference;
      gram -= Eigen::MatrixXd::Identity(t.reference_dim, t.reference_dim);
      if (gram.cwiseAbs().maxCoeff() > 1e-8) fail("reference basis not orthonormal");
    }
  }
  return rep;
}

double average_eigenvalue(const MixtureTarget& t) {
  double lambda = 0.0;
  for (int k = 0; k < t.n_clusters(); ++k) {
    double per_cluster = 0.0;
    for (const auto& a : t.atoms) per_cluster += a.weight * a.eigenvalues(k);
    lambda += t.pi(k) * per_cluster;
  }
  return lambda;
}

Eigen::MatrixXd sample_target(const MixtureTarget& t, int n, std::uint64_t seed) {
  if (!t.embedding) throw std::runtime_error("abstract target cannot be sampled");
  const Embedding& e = *t.embedding;
  Rng rng(seed, 0x746172676574ULL);
  Eigen::MatrixXd out(n, e.d);
  // Cumulative cluster weights for inverse-CDF draws.
  std::vector<double> cum(static_cast<std::size_t>(t.n_clusters()));
  double acc = 0.0;
  for (int k = 0; k < t.n_clusters(); ++k) {
    acc += t.pi(k);
    cum[static_cast<std::size_t>(k)] = acc;
  }
  for (int s = 0; s < n; ++s) {
    const double u = rng.uniform();
    int k = 0;
    while (k + 1 < t.n_clusters() && u > cum[static_cast<std::size_t>(k)]) ++k;
    for (int i = 0; i < e.d; ++i)
      out(s, i) = e.centroids(i, k) + std::sqrt(e.eigenvalues(i, k)) * rng.gaussian();
  }
  return out;
}

MixtureTarget target_from_embedding(const Eigen::VectorXd& pi, Embedding emb) {
  const int K = static_cast<int>(pi.size());
  const int R = static_cast<int>(emb.reference.cols());
  const int d = emb.d;
  if (emb.centroids.cols() != K || emb.eigenvalues.cols() != K)
    throw std::invalid_argument("embedding cluster count mismatch");

  // Bucket coordinates by eigenvalue profile, 1e-10 relative tolerance.
  const double scale = std::max(emb.eigenvalues.cwiseAbs().maxCoeff(), 1.0);
  const double tol = 1e-10 * scale;
  std::vector<Eigen::VectorXd> profiles;
  std::vector<std::vector<int>> members;
  emb.atom_of_coord.assign(static_cast<std::size_t>(d), -1);
  for (int i = 0; i < d; ++i) {
    const Eigen::VectorXd prof = emb.eigenvalues.row(i).transpose();
    int found = -1;
    for (std::size_t a = 0; a < profiles.size(); ++a) {
      if ((profiles[a] - prof).cwiseAbs().maxCoeff() <= tol) {
        found = static_cast<int>(a);
        break;
      }
    }
    if (found < 0) {
      profiles.push_back(prof);
      members.emplace_back();
      found = static_cast<int>(profiles.size()) - 1;
    }
    members[static_cast<std::size_t>(found)].push_back(i);
    emb.atom_of_coord[static_cast<std::size_t>(i)] = found;
  }

  MixtureTarget t;
  t.pi = pi;
  t.reference_dim = R;
  t.centroid_gram = emb.centroids.transpose() * emb.centroids;
  t.reference_overlaps = emb.centroids.transpose() * emb.reference;
  for (std::size_t a = 0; a < profiles.size(); ++a) {
    SpectralAtom atom;
    atom.eigenvalues = profiles[a];
    atom.weight = static_cast<double>(members[a].size()) / static_cast<double>(d);
    atom.centroid_block = Eigen::MatrixXd::Zero(K, K);
    atom.reference_block = Eigen::MatrixXd::Zero(K, R);
    for (int i : members[a]) {
      atom.centroid_block.noalias() +=
          emb.centroids.row(i).transpose() * emb.centroids.row(i);
      atom.reference_block.noalias() +=
          emb.centroids.row(i).transpose() * emb.reference.row(i);
    }
    t.atoms.push_back(std::move(atom));
  }
  t.embedding = std::move(emb);
  return t;
}

MixtureTarget isotropic_mixture(const Eigen::VectorXd& pi,
                                const Eigen::MatrixXd& centroids,
                                const Eigen::MatrixXd& reference) {
  Embedding emb;
  emb.d = static_cast<int>(centroids.rows());
  emb.centroids = centroids;
  emb.eigenvalues = Eigen::MatrixXd::Ones(emb.d, static_cast<int>(pi.size()));
  emb.reference = reference;
  return target_from_embedding(pi, std::move(emb));
}

MixtureTarget heavy_spectrum_target(const std::vector<std::pair<double, int>>& groups,
                                    int reference_dim) {
  int d = 0;
  for (const auto& [eig, count] : groups) {
    (void)eig;
    d += count;
  }
  Embedding emb;
  emb.d = d;
  emb.centroids = Eigen::MatrixXd::Zero(d, 1);
  emb.eigenvalues.resize(d, 1);
  int i = 0;
  for (const auto& [eig, count] : groups)
    for (int j = 0; j < count; ++j) emb.eigenvalues(i++, 0) = eig;
  emb.reference = Eigen::MatrixXd::Identity(d, reference_dim);
  return target_from_embedding(Eigen::VectorXd::Ones(1), std::move(emb));
}

MixtureTarget covariance_target_from_data(const Eigen::MatrixXd& rows, double normalizer,
                                          int reference_dim) {
  const int n = static_cast<int>(rows.rows());
  if (n < 2) throw std::invalid_argument("need at least 2 rows of data");
  Eigen::MatrixXd x = rows;
  x.rowwise() -= x.colwise().mean();
  x /= normalizer;
  const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);

  const int d = static_cast<int>(cov.rows());
  Embedding emb;
  emb.d = d;
  emb.centroids = Eigen::MatrixXd::Zero(d, 1);
  emb.eigenvalues.resize(d, 1);
  // Rotated into the covariance eigenbasis, descending eigenvalues.
  for (int i = 0; i < d; ++i)
    emb.eigenvalues(i, 0) = std::max(es.eigenvalues()(d - 1 - i), 0.0);
  emb.reference = Eigen::MatrixXd::Identity(d, reference_dim);
  return target_from_embedding(Eigen::VectorXd::Ones(1), std::move(emb));
}

}  // namespace flowlab
