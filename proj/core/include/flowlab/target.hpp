#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace flowlab {

class Rng;

/// Group of ambient coordinates sharing one joint eigenvalue profile across
/// all cluster covariances.
struct SpectralAtom {
  Eigen::VectorXd eigenvalues;     // length K, eigenvalue rho_a(c) per cluster
  double weight = 0.0;             // nu_a, fraction of ambient coordinates
  Eigen::MatrixXd centroid_block;  // K x K, this atom's share of T^{ck}
  Eigen::MatrixXd reference_block; // K x R, this atom's share of P^c = E^T mu(c)
};

/// Finite-d realization in the common eigenbasis of the cluster covariances
/// (all covariances diagonal in these coordinates).
struct Embedding {
  int d = 0;
  Eigen::MatrixXd centroids;      // d x K
  Eigen::MatrixXd eigenvalues;    // d x K, column c = diag of Sigma(c)
  Eigen::MatrixXd reference;      // d x R, orthonormal columns
  std::vector<int> atom_of_coord; // length d
};

/// Gaussian mixture on a latent manifold, stored as discrete clusters plus
/// spectral atoms of the jointly diagonalizable covariances.
struct MixtureTarget {
  Eigen::VectorXd pi;               // cluster weights, length K
  Eigen::MatrixXd centroid_gram;    // T, K x K
  std::vector<SpectralAtom> atoms;
  int reference_dim = 0;            // R
  Eigen::MatrixXd reference_overlaps;  // P, K x R (row c = P^c)
  std::optional<Embedding> embedding;

  int n_clusters() const { return static_cast<int>(pi.size()); }
};

struct TargetReport {
  bool ok = true;
  std::vector<std::string> issues;
};

TargetReport validate_target(const MixtureTarget& t);

/// Lambda = sum_k pi_k sum_a nu_a rho_a(k).
double average_eigenvalue(const MixtureTarget& t);

/// Rows drawn by k ~ pi then N(mu(k), Sigma(k)) in the common eigenbasis.
/// Requires the explicit embedding.
Eigen::MatrixXd sample_target(const MixtureTarget& t, int n, std::uint64_t seed);

/// Builds the abstract fields (T, P, atoms) from an explicit embedding,
/// bucketing coordinates whose eigenvalue profiles agree within 1e-10
/// relative tolerance. Overwrites atom_of_coord.
MixtureTarget target_from_embedding(const Eigen::VectorXd& pi, Embedding emb);

/// Isotropic mixture Sigma(c) = I with the given centroids (d x K) and
/// reference basis (d x R, orthonormal).
MixtureTarget isotropic_mixture(const Eigen::VectorXd& pi,
                                const Eigen::MatrixXd& centroids,
                                const Eigen::MatrixXd& reference);

/// Single zero-mean cluster whose spectrum has the listed (eigenvalue,
/// multiplicity) groups, in descending eigenvalue order; the reference basis
/// spans the top R coordinates.
MixtureTarget heavy_spectrum_target(const std::vector<std::pair<double, int>>& groups,
                                    int reference_dim);

/// Centers rows, divides by normalizer, eigendecomposes the empirical
/// covariance (1/n convention) and rotates into its eigenbasis; the result
/// is a single zero-mean cluster with the reference basis on the top
/// reference_dim coordinates.
MixtureTarget covariance_target_from_data(const Eigen::MatrixXd& rows, double normalizer,
                                          int reference_dim);

}  // namespace flowlab
