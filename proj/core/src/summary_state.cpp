#include "flowlab/summary_state.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace flowlab {

Eigen::VectorXd SummaryState::M(int c) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(r());
  for (const auto& a : atoms) out += a.m.col(c);
  return out;
}

Eigen::MatrixXd SummaryState::Qcal() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(r(), r());
  for (const auto& a : atoms) out += a.q;
  return out;
}

Eigen::MatrixXd SummaryState::Q(const MixtureTarget& target, int c) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(r(), r());
  for (std::size_t a = 0; a < atoms.size(); ++a)
    out += target.atoms[a].eigenvalues(c) * atoms[a].q;
  return out;
}

Eigen::MatrixXd SummaryState::G() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(r(), reference_dim());
  for (const auto& a : atoms) out += a.g;
  return out;
}

SummaryState zero_summary(const MixtureTarget& target, int r, double b0) {
  SummaryState s;
  s.b = b0;
  s.v = Eigen::VectorXd::Zero(r);
  const int K = target.n_clusters();
  const int R = target.reference_dim;
  for (std::size_t a = 0; a < target.atoms.size(); ++a) {
    AtomState as;
    as.m = Eigen::MatrixXd::Zero(r, K);
    as.q = Eigen::MatrixXd::Zero(r, r);
    as.g = Eigen::MatrixXd::Zero(r, R);
    s.atoms.push_back(std::move(as));
  }
  return s;
}

SummaryState init_cold(const MixtureTarget& target, int r, double s0, double b0) {
  SummaryState s = zero_summary(target, r, b0);
  for (std::size_t a = 0; a < target.atoms.size(); ++a)
    s.atoms[a].q = s0 * s0 * target.atoms[a].weight * Eigen::MatrixXd::Identity(r, r);
  return s;
}

SummaryState init_warm(const MixtureTarget& target, int r, double norm, double b0) {
  const int K = target.n_clusters();
  if (r > K) throw std::invalid_argument("warm init needs r <= number of clusters");
  Eigen::VectorXd inv_norm(r);
  for (int g = 0; g < r; ++g) {
    const double t = target.centroid_gram(g, g);
    if (t <= 0.0) throw std::invalid_argument("warm init along zero-norm centroid");
    inv_norm(g) = 1.0 / std::sqrt(t);
  }
  SummaryState s = zero_summary(target, r, b0);
  for (std::size_t a = 0; a < target.atoms.size(); ++a) {
    const SpectralAtom& atom = target.atoms[a];
    AtomState& as = s.atoms[a];
    for (int g = 0; g < r; ++g) {
      for (int c = 0; c < K; ++c)
        as.m(g, c) = norm * atom.centroid_block(c, g) * inv_norm(g);
      for (int h = 0; h < r; ++h)
        as.q(g, h) = norm * norm * atom.centroid_block(g, h) * inv_norm(g) * inv_norm(h);
      for (int j = 0; j < target.reference_dim; ++j)
        as.g(g, j) = norm * atom.reference_block(g, j) * inv_norm(g);
    }
  }
  return s;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const MixtureTarget& target) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  if (traj.empty()) {
    out << "theta,b\n";
    return;
  }
  const SummaryState& first = traj.front().second;
  const int r = first.r(), K = first.n_clusters(), R = first.reference_dim();
  out << "theta,b";
  for (int g = 0; g < r; ++g) out << ",v" << g;
  for (int c = 0; c < K; ++c)
    for (int g = 0; g < r; ++g) out << ",M" << c << "_" << g;
  for (int g = 0; g < r; ++g)
    for (int h = 0; h < r; ++h) out << ",Qcal" << g << h;
  for (int c = 0; c < K; ++c)
    for (int g = 0; g < r; ++g)
      for (int h = 0; h < r; ++h) out << ",Q" << c << "_" << g << h;
  for (int g = 0; g < r; ++g)
    for (int j = 0; j < R; ++j) out << ",G" << g << j;
  out << "\n";
  out.precision(17);
  for (const auto& [theta, st] : traj) {
    out << theta << "," << st.b;
    for (int g = 0; g < r; ++g) out << "," << st.v(g);
    for (int c = 0; c < K; ++c) {
      const Eigen::VectorXd m = st.M(c);
      for (int g = 0; g < r; ++g) out << "," << m(g);
    }
    const Eigen::MatrixXd qcal = st.Qcal();
    for (int g = 0; g < r; ++g)
      for (int h = 0; h < r; ++h) out << "," << qcal(g, h);
    for (int c = 0; c < K; ++c) {
      const Eigen::MatrixXd q = st.Q(target, c);
      for (int g = 0; g < r; ++g)
        for (int h = 0; h < r; ++h) out << "," << q(g, h);
    }
    const Eigen::MatrixXd gg = st.G();
    for (int g = 0; g < r; ++g)
      for (int j = 0; j < R; ++j) out << "," << gg(g, j);
    out << "\n";
  }
}

}  // namespace flowlab
