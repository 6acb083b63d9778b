#include "flowlab/dynamics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "flowlab/blocks.hpp"
#include "flowlab/gaussian_expect.hpp"

namespace flowlab {

namespace {

// Floored ratio: near-singular denominators are clipped unless the paired
// numerator already vanished, in which case the whole term is dropped.
double safe_ratio(double numer, double denom) {
  if (std::abs(denom) < 1e-12) {
    if (std::abs(numer) < 1e-14) return 0.0;
    denom = std::copysign(1e-12, denom);
  }
  return numer / denom;
}

int order_for(const Hyperparams& hp, std::size_t ncoords) {
  if (ncoords <= 2) return hp.order_dim2;
  if (ncoords == 3) return hp.order_dim3;
  return hp.order_dim4;
}

double ev(const BlockInputs& in, const std::vector<FieldCoord>& coords,
          const FactorList& factors, const Activation& act, const Hyperparams& hp) {
  return expect(field_gaussian(in, coords), factors, act,
                Quadrature{order_for(hp, coords.size())});
}

// Everything the right-hand sides need at one (t, c) pair. Integrals involve
// only the global statistics, so one table serves all atoms and all columns.
struct SingleTable {
  Eigen::VectorXd Is;      // E[s(w_g)]
  Eigen::MatrixXd Iss;     // E[s(w_g) s(w_d)]
  Eigen::VectorXd Isw;     // E[s(w_g) w_g]
  Eigen::MatrixXd Ips;     // E[s'(w_g) s(w_d)]
  Eigen::MatrixXd IpswA;   // E[s'(w_g) s(w_d) w_g]
  Eigen::MatrixXd IpswB;   // E[s'(w_g) s(w_d) w_d]
  Eigen::VectorXd Il1pw;   // E[l1_g s'(w_g) w_g]
  Eigen::VectorXd Il1sqp;  // E[l1_g^2 s'(w_g)]
  Eigen::VectorXd Il0pw;   // E[l0_g s'(w_g) w_g]
  Eigen::VectorXd Il0sqp;  // E[l0_g^2 s'(w_g)]
  Eigen::VectorXd Il1p;    // E[l1_g s'(w_g)]
  Eigen::VectorXd Il0p;    // E[l0_g s'(w_g)]
};

SingleTable build_single(const BlockInputs& in, double at, double bt,
                         const Eigen::VectorXd& v, double pt, const Activation& act,
                         const Hyperparams& hp) {
  const int r = static_cast<int>(in.qcal.rows());
  auto sh = [&](int g) { return v(g) * pt; };
  auto om = [&](int g) { return omega_field(g, at, bt); };

  SingleTable T;
  T.Is.resize(r);
  T.Isw.resize(r);
  T.Il1pw.resize(r);
  T.Il1sqp.resize(r);
  T.Il0pw.resize(r);
  T.Il0sqp.resize(r);
  T.Il1p.resize(r);
  T.Il0p.resize(r);
  T.Iss.resize(r, r);
  T.Ips.resize(r, r);
  T.IpswA.resize(r, r);
  T.IpswB.resize(r, r);

  for (int g = 0; g < r; ++g) {
    T.Is(g) = ev(in, {om(g)}, {flowlab::act(sh(g))}, act, hp);
    T.Isw(g) = ev(in, {om(g), om(g)}, {flowlab::act(sh(g)), linear()}, act, hp);
    T.Il1pw(g) = ev(in, {data_field(g), om(g), om(g)},
                    {linear(), act_prime(sh(g)), linear()}, act, hp);
    T.Il1sqp(g) = ev(in, {data_field(g), data_field(g), om(g)},
                     {linear(), linear(), act_prime(sh(g))}, act, hp);
    T.Il0pw(g) = ev(in, {noise_field(g), om(g), om(g)},
                    {linear(), act_prime(sh(g)), linear()}, act, hp);
    T.Il0sqp(g) = ev(in, {noise_field(g), noise_field(g), om(g)},
                     {linear(), linear(), act_prime(sh(g))}, act, hp);
    T.Il1p(g) = ev(in, {data_field(g), om(g)}, {linear(), act_prime(sh(g))}, act, hp);
    T.Il0p(g) = ev(in, {noise_field(g), om(g)}, {linear(), act_prime(sh(g))}, act, hp);
    for (int d = 0; d < r; ++d) {
      T.Iss(g, d) = ev(in, {om(g), om(d)},
                       {flowlab::act(sh(g)), flowlab::act(sh(d))}, act, hp);
      T.Ips(g, d) = ev(in, {om(g), om(d)},
                       {act_prime(sh(g)), flowlab::act(sh(d))}, act, hp);
      T.IpswA(g, d) = ev(in, {om(g), om(d), om(g)},
                         {act_prime(sh(g)), flowlab::act(sh(d)), linear()}, act, hp);
      T.IpswB(g, d) = ev(in, {om(g), om(d), om(d)},
                         {act_prime(sh(g)), flowlab::act(sh(d)), linear()}, act, hp);
    }
  }
  return T;
}

// Two-time table for the order eta^2 correction to q, per (t, t', c).
struct PairTable {
  Eigen::MatrixXd Iss2;                // (g,d): E[s(w_g^t) s(w_d^t')]
  std::vector<Eigen::MatrixXd> Issp;   // [d](g,e): E[s(w_g^t) s(w_e^t) s'(w_d^t')]
  Eigen::MatrixXd Ispl1;               // (g,d): E[s(w_g^t) s'(w_d^t') l1_d]
  Eigen::MatrixXd Ispl0;
  std::vector<Eigen::MatrixXd> I4;     // [g*r+e](d,i): E[s'(w_g^t) s(w_e^t) s'(w_d^t') s(w_i^t')]
  std::vector<Eigen::MatrixXd> Ipspl1; // [g](e,d): E[s'(w_g^t) s(w_e^t) s'(w_d^t') l1_d]
  std::vector<Eigen::MatrixXd> Ipspl0;
  Eigen::MatrixXd Ippl1l1;             // (g,d): E[s'(w_g^t) s'(w_d^t') l1_g l1_d]
  Eigen::MatrixXd Ippl0l1a;            // (g,d): ... l0_g l1_d
  Eigen::MatrixXd Ippl0l1b;            // (g,d): ... l0_d l1_g
  Eigen::MatrixXd Ippl0l0;             // (g,d): ... l0_g l0_d
};

PairTable build_pair(const BlockInputs& in, double at, double bt, double pt,
                     double at2, double bt2, double pt2, const Eigen::VectorXd& v,
                     const Activation& act, const Hyperparams& hp) {
  const int r = static_cast<int>(in.qcal.rows());
  auto om1 = [&](int g) { return omega_field(g, at, bt); };
  auto om2 = [&](int g) { return omega_field(g, at2, bt2); };
  auto s1 = [&](int g) { return v(g) * pt; };
  auto s2 = [&](int g) { return v(g) * pt2; };

  PairTable T;
  T.Iss2.resize(r, r);
  T.Ispl1.resize(r, r);
  T.Ispl0.resize(r, r);
  T.Ippl1l1.resize(r, r);
  T.Ippl0l1a.resize(r, r);
  T.Ippl0l1b.resize(r, r);
  T.Ippl0l0.resize(r, r);
  T.Issp.assign(r, Eigen::MatrixXd(r, r));
  T.Ipspl1.assign(r, Eigen::MatrixXd(r, r));
  T.Ipspl0.assign(r, Eigen::MatrixXd(r, r));
  T.I4.assign(static_cast<std::size_t>(r) * r, Eigen::MatrixXd(r, r));

  for (int g = 0; g < r; ++g) {
    for (int d = 0; d < r; ++d) {
      T.Iss2(g, d) = ev(in, {om1(g), om2(d)},
                        {flowlab::act(s1(g)), flowlab::act(s2(d))}, act, hp);
      T.Ispl1(g, d) = ev(in, {om1(g), om2(d), data_field(d)},
                         {flowlab::act(s1(g)), act_prime(s2(d)), linear()}, act, hp);
      T.Ispl0(g, d) = ev(in, {om1(g), om2(d), noise_field(d)},
                         {flowlab::act(s1(g)), act_prime(s2(d)), linear()}, act, hp);
      T.Ippl1l1(g, d) = ev(in, {om1(g), om2(d), data_field(g), data_field(d)},
                           {act_prime(s1(g)), act_prime(s2(d)), linear(), linear()}, act, hp);
      T.Ippl0l1a(g, d) = ev(in, {om1(g), om2(d), noise_field(g), data_field(d)},
                            {act_prime(s1(g)), act_prime(s2(d)), linear(), linear()}, act, hp);
      T.Ippl0l1b(g, d) = ev(in, {om1(g), om2(d), noise_field(d), data_field(g)},
                            {act_prime(s1(g)), act_prime(s2(d)), linear(), linear()}, act, hp);
      T.Ippl0l0(g, d) = ev(in, {om1(g), om2(d), noise_field(g), noise_field(d)},
                           {act_prime(s1(g)), act_prime(s2(d)), linear(), linear()}, act, hp);
      for (int e = 0; e < r; ++e) {
        T.Issp[static_cast<std::size_t>(d)](g, e) =
            ev(in, {om1(g), om1(e), om2(d)},
               {flowlab::act(s1(g)), flowlab::act(s1(e)), act_prime(s2(d))}, act, hp);
        T.Ipspl1[static_cast<std::size_t>(g)](e, d) =
            ev(in, {om1(g), om1(e), om2(d), data_field(d)},
               {act_prime(s1(g)), flowlab::act(s1(e)), act_prime(s2(d)), linear()}, act, hp);
        T.Ipspl0[static_cast<std::size_t>(g)](e, d) =
            ev(in, {om1(g), om1(e), om2(d), noise_field(d)},
               {act_prime(s1(g)), flowlab::act(s1(e)), act_prime(s2(d)), linear()}, act, hp);
        for (int i = 0; i < r; ++i)
          T.I4[static_cast<std::size_t>(g) * r + e](d, i) =
              ev(in, {om1(g), om1(e), om2(d), om2(i)},
                 {act_prime(s1(g)), flowlab::act(s1(e)), act_prime(s2(d)),
                  flowlab::act(s2(i))}, act, hp);
      }
    }
  }
  return T;
}

// Per-gamma brackets shared by the m, g and q drift terms at one (t, c).
struct Brackets {
  Eigen::VectorXd t3, t5, t7, t8, t10, t12;  // paired with the ratios below
  Eigen::VectorXd d1, d0;                    // the two diagonal denominators
};

Brackets make_brackets(const SingleTable& T, const Eigen::VectorXd& Mc,
                       const Eigen::MatrixXd& qcal, const Eigen::MatrixXd& qc,
                       const Eigen::MatrixXd& omega, double at, double bt) {
  const int r = static_cast<int>(Mc.size());
  Brackets B;
  B.t3.resize(r);
  B.t5.resize(r);
  B.t7.resize(r);
  B.t8.resize(r);
  B.t10.resize(r);
  B.t12.resize(r);
  B.d1.resize(r);
  B.d0.resize(r);
  for (int g = 0; g < r; ++g) {
    B.t3(g) = T.Isw(g) - bt * Mc(g) * T.Is(g);
    B.t5(g) = T.IpswA(g, g) - bt * Mc(g) * T.Ips(g, g);
    B.t7(g) = T.Il1pw(g) - bt * T.Il1sqp(g);
    B.t8(g) = T.Il0sqp(g) * (omega(g, g) - at * at * qcal(g, g));
    B.t10(g) = (T.Il1sqp(g) - Mc(g) * T.Il1p(g)) * (omega(g, g) - bt * bt * qc(g, g));
    B.t12(g) = T.Il0pw(g) - at * T.Il0sqp(g) - Mc(g) * bt * T.Il0p(g);
    B.d1(g) = qc(g, g) * omega(g, g) - bt * bt * qc(g, g) * qc(g, g);
    B.d0(g) = qcal(g, g) * omega(g, g) - at * at * qcal(g, g) * qcal(g, g);
  }
  return B;
}

// Drift of one linear field (a column block of m or g): `field` is r x ncols,
// `source` the matching row of the atom's centroid or reference block.
void accumulate_field(const SingleTable& T, const Brackets& B, double at, double bt,
                      double b, double rho_c, const Eigen::VectorXd& Mc,
                      const Eigen::MatrixXd& qcal, const Eigen::MatrixXd& qc,
                      const Eigen::MatrixXd& omega, const Eigen::MatrixXd& qtheta,
                      double weight_decay, const Eigen::MatrixXd& field,
                      const Eigen::RowVectorXd& source, double weight,
                      Eigen::MatrixXd& out) {
  const int r = static_cast<int>(field.rows());
  const int ncols = static_cast<int>(field.cols());
  const double one_bb = 1.0 - b * bt;
  const double a2 = at * at;
  for (int g = 0; g < r; ++g) {
    const double pref3 = one_bb * bt * rho_c - b * a2;
    double theta_coef = one_bb * T.Is(g);               // source terms 2, 6, 9, 11
    for (int d = 0; d < r; ++d) theta_coef -= bt * qtheta(g, d) * T.Ips(g, d);
    theta_coef += bt * one_bb * T.Il1p(g) - at * bt * b * T.Il0p(g);

    double diag_coef = pref3 * safe_ratio(B.t3(g), omega(g, g));          // term 3
    diag_coef -= (a2 + bt * bt * rho_c) * qcal(g, g) *
                 safe_ratio(B.t5(g), omega(g, g));                        // term 5
    diag_coef += a2 * one_bb * qc(g, g) * safe_ratio(B.t7(g), B.d1(g));   // term 7
    diag_coef -= a2 * b * safe_ratio(B.t8(g), B.d0(g));                   // term 8
    diag_coef += bt * one_bb * rho_c * safe_ratio(B.t10(g), B.d1(g));     // term 10
    diag_coef -= qcal(g, g) * b * bt * a2 * rho_c *
                 safe_ratio(B.t12(g), B.d0(g));                           // term 12
    diag_coef -= weight_decay;                                            // term 13

    for (int k = 0; k < ncols; ++k) {
      double acc = theta_coef * source(k) + diag_coef * field(g, k);
      for (int d = 0; d < r; ++d) acc -= T.Iss(g, d) * field(d, k);       // term 1
      for (int d = 0; d < r; ++d) {                                      // term 4
        if (d == g) continue;
        const double numer =
            (T.IpswA(g, d) - bt * Mc(g) * T.Ips(g, d)) *
                (omega(d, d) * field(g, k) - omega(g, d) * field(d, k)) +
            (T.IpswB(g, d) - bt * Mc(d) * T.Ips(g, d)) *
                (omega(g, g) * field(d, k) - omega(g, d) * field(g, k));
        acc -= (a2 + bt * bt * rho_c) * qcal(g, d) *
               safe_ratio(numer, omega(g, g) * omega(d, d) - omega(g, d) * omega(g, d));
      }
      out(g, k) += weight * acc;
    }
  }
}

// Order-eta contribution to dq, gamma-active half only; the caller adds the
// transpose for the index swap.
void accumulate_q_linear(const SingleTable& T, const Brackets& B, double at, double bt,
                         double b, double rho_c, const Eigen::VectorXd& Mc,
                         const Eigen::MatrixXd& qcal, const Eigen::MatrixXd& qc,
                         const Eigen::MatrixXd& omega, const Eigen::MatrixXd& qtheta,
                         double weight_decay, const Eigen::MatrixXd& q_atom,
                         const Eigen::VectorXd& m_atom_col, double weight,
                         Eigen::MatrixXd& out) {
  // The q equation is the field equation with the passive index delta as the
  // column, sourced by the atom's own m at cluster c.
  accumulate_field(T, B, at, bt, b, rho_c, Mc, qcal, qc, omega, qtheta, weight_decay,
                   q_atom, m_atom_col.transpose(), weight, out);
}

void accumulate_q_quadratic(const PairTable& T, double at, double bt, double at2,
                            double bt2, double b, double rho_c, double nu,
                            const Eigen::MatrixXd& qcal, double weight,
                            Eigen::MatrixXd& out) {
  const int r = static_cast<int>(qcal.rows());
  const double c1 = (1.0 - b * bt) * (1.0 - b * bt2) * rho_c + b * b * at * at2;
  const double c2 = bt2 * (1.0 - b * bt) * rho_c - b * at * at2;
  const double c3 = bt * bt2 * rho_c + at * at2;
  for (int g = 0; g < r; ++g) {
    for (int d = 0; d < r; ++d) {
      double acc = 0.5 * nu * T.Iss2(g, d) * c1;
      for (int e = 0; e < r; ++e)
        acc -= nu * T.Issp[static_cast<std::size_t>(d)](g, e) * qcal(e, d) * c2;
      acc += nu * ((1.0 - b * bt2) * T.Ispl1(g, d) - b * at2 * T.Ispl0(g, d)) * c2;
      for (int e = 0; e < r; ++e) {
        for (int i = 0; i < r; ++i)
          acc += 0.5 * nu * T.I4[static_cast<std::size_t>(g) * r + e](d, i) *
                 qcal(g, e) * qcal(d, i) * c3;
        acc -= nu *
               ((1.0 - b * bt2) * T.Ipspl1[static_cast<std::size_t>(g)](e, d) -
                b * at2 * T.Ipspl0[static_cast<std::size_t>(g)](e, d)) *
               qcal(e, g) * c3;
      }
      acc += 0.5 *
             ((1.0 - b * bt2) * (1.0 - b * bt) * T.Ippl1l1(g, d) -
              (1.0 - b * bt2) * b * at * T.Ippl0l1a(g, d) -
              b * at2 * (1.0 - b * bt) * T.Ippl0l1b(g, d) +
              b * b * at * at2 * T.Ippl0l0(g, d)) *
             nu * c3;
      out(g, d) += weight * acc;
    }
  }
}

Derivs zero_derivs(const SummaryState& s) {
  Derivs d;
  d.db = 0.0;
  d.dv = Eigen::VectorXd::Zero(s.r());
  for (const auto& a : s.atoms) {
    AtomState z;
    z.m = Eigen::MatrixXd::Zero(a.m.rows(), a.m.cols());
    z.q = Eigen::MatrixXd::Zero(a.q.rows(), a.q.cols());
    z.g = Eigen::MatrixXd::Zero(a.g.rows(), a.g.cols());
    d.datoms.push_back(std::move(z));
  }
  return d;
}

}  // namespace

double rhs_b(double b, double lambda_avg, const Schedule& schedule) {
  const auto& grid = schedule.training_grid();
  if (grid.empty()) throw std::invalid_argument("empty training grid");
  double acc = 0.0;
  for (double t : grid) {
    const double at = schedule.alpha(t), bt = schedule.beta(t);
    acc += bt * (1.0 - b * bt) * lambda_avg - b * at * at;
  }
  return acc / static_cast<double>(grid.size());
}

double b_closed_form(double tau, double b0, double lambda_avg, const Schedule& schedule) {
  const double rate = lambda_avg * schedule.mean_beta2() + schedule.mean_alpha2();
  const double b_inf = rate > 0.0 ? lambda_avg * schedule.mean_beta() / rate : 0.0;
  const double decay = std::exp(-rate * tau);
  return b_inf * (1.0 - decay) + b0 * decay;
}

Derivs rhs_all(const SummaryState& state, const MixtureTarget& target,
               const Schedule& schedule, const Hyperparams& hp, const Activation& act) {
  const auto& grid = schedule.training_grid();
  if (grid.empty()) throw std::invalid_argument("empty training grid");
  const int r = state.r();
  const int K = target.n_clusters();
  const std::size_t n_atoms = state.atoms.size();
  if (n_atoms != target.atoms.size())
    throw std::invalid_argument("state/target atom count mismatch");

  Derivs out = zero_derivs(state);
  out.db = rhs_b(state.b, average_eigenvalue(target), schedule);

  const Eigen::MatrixXd qcal = state.Qcal();
  std::vector<Eigen::MatrixXd> qc(static_cast<std::size_t>(K));
  std::vector<Eigen::VectorXd> mc(static_cast<std::size_t>(K));
  for (int c = 0; c < K; ++c) {
    qc[static_cast<std::size_t>(c)] = state.Q(target, c);
    mc[static_cast<std::size_t>(c)] = state.M(c);
  }

  const double tw = 1.0 / static_cast<double>(grid.size());
  for (double t : grid) {
    const double at = schedule.alpha(t), bt = schedule.beta(t), pt = schedule.p(t);
    for (int c = 0; c < K; ++c) {
      const double w = tw * target.pi(c);
      if (w == 0.0) continue;
      const BlockInputs in{qcal, qc[static_cast<std::size_t>(c)],
                           mc[static_cast<std::size_t>(c)]};
      const SingleTable T = build_single(in, at, bt, state.v, pt, act, hp);
      const Eigen::MatrixXd omega = at * at * qcal + bt * bt * in.qc;
      const Brackets B = make_brackets(T, in.mc, qcal, in.qc, omega, at, bt);

      for (std::size_t a = 0; a < n_atoms; ++a) {
        const double rho_c = target.atoms[a].eigenvalues(c);
        const Eigen::MatrixXd* qtheta =
            hp.theta_coupling == ThetaCoupling::QcalLiteral ? &qcal : &in.qc;
        accumulate_field(T, B, at, bt, state.b, rho_c, in.mc, qcal, in.qc, omega,
                         *qtheta, hp.weight_decay, state.atoms[a].m,
                         target.atoms[a].centroid_block.row(c), w, out.datoms[a].m);
        if (target.reference_dim > 0)
          accumulate_field(T, B, at, bt, state.b, rho_c, in.mc, qcal, in.qc, omega,
                           *qtheta, hp.weight_decay, state.atoms[a].g,
                           target.atoms[a].reference_block.row(c), w, out.datoms[a].g);
        accumulate_q_linear(T, B, at, bt, state.b, rho_c, in.mc, qcal, in.qc, omega,
                            *qtheta, hp.weight_decay, state.atoms[a].q,
                            state.atoms[a].m.col(c), w, out.datoms[a].q);
      }

      // Time-encoding drift, gradient of the same loss in v.
      for (int g = 0; g < r; ++g) {
        double grad = (1.0 - state.b * bt) * T.Il1p(g) - state.b * at * T.Il0p(g);
        for (int d = 0; d < r; ++d) grad -= qcal(g, d) * T.Ips(g, d);
        out.dv(g) += w * pt * grad;
      }
    }
  }
  out.dv -= hp.weight_decay * state.v;

  if (hp.include_quadratic) {
    const double pw = tw * tw;
    for (double t : grid) {
      const double at = schedule.alpha(t), bt = schedule.beta(t), pt = schedule.p(t);
      for (double t2 : grid) {
        const double at2 = schedule.alpha(t2), bt2 = schedule.beta(t2),
                     pt2 = schedule.p(t2);
        for (int c = 0; c < K; ++c) {
          const double w = pw * target.pi(c);
          if (w == 0.0) continue;
          const BlockInputs in{qcal, qc[static_cast<std::size_t>(c)],
                               mc[static_cast<std::size_t>(c)]};
          const PairTable T =
              build_pair(in, at, bt, pt, at2, bt2, pt2, state.v, act, hp);
          for (std::size_t a = 0; a < n_atoms; ++a)
            accumulate_q_quadratic(T, at, bt, at2, bt2, state.b,
                                   target.atoms[a].eigenvalues(c),
                                   target.atoms[a].weight, qcal,
                                   2.0 * hp.eta * w, out.datoms[a].q);
        }
      }
    }
  }

  // Symmetrize q: the equations above carry the gamma-active half only.
  for (auto& a : out.datoms) a.q = (a.q + a.q.transpose()).eval();
  return out;
}

std::vector<Eigen::MatrixXd> rhs_m(const SummaryState& state, const MixtureTarget& target,
                                   const Schedule& schedule, const Hyperparams& hp,
                                   const Activation& act) {
  const Derivs d = rhs_all(state, target, schedule, hp, act);
  std::vector<Eigen::MatrixXd> out;
  for (const auto& a : d.datoms) out.push_back(a.m);
  return out;
}

std::vector<Eigen::MatrixXd> rhs_g(const SummaryState& state, const MixtureTarget& target,
                                   const Schedule& schedule, const Hyperparams& hp,
                                   const Activation& act) {
  const Derivs d = rhs_all(state, target, schedule, hp, act);
  std::vector<Eigen::MatrixXd> out;
  for (const auto& a : d.datoms) out.push_back(a.g);
  return out;
}

std::vector<Eigen::MatrixXd> rhs_q(const SummaryState& state, const MixtureTarget& target,
                                   const Schedule& schedule, const Hyperparams& hp,
                                   const Activation& act) {
  const Derivs d = rhs_all(state, target, schedule, hp, act);
  std::vector<Eigen::MatrixXd> out;
  for (const auto& a : d.datoms) out.push_back(a.q);
  return out;
}

Eigen::VectorXd rhs_v(const SummaryState& state, const MixtureTarget& target,
                      const Schedule& schedule, const Hyperparams& hp,
                      const Activation& act) {
  return rhs_all(state, target, schedule, hp, act).dv;
}

namespace {

SummaryState advanced(const SummaryState& s, const Derivs& d, double h, bool step_b) {
  SummaryState out = s;
  if (step_b) out.b += h * d.db;
  out.v += h * d.dv;
  for (std::size_t a = 0; a < s.atoms.size(); ++a) {
    out.atoms[a].m += h * d.datoms[a].m;
    out.atoms[a].q += h * d.datoms[a].q;
    out.atoms[a].g += h * d.datoms[a].g;
  }
  return out;
}

void axpy(Derivs& acc, const Derivs& d, double w) {
  acc.db += w * d.db;
  acc.dv += w * d.dv;
  for (std::size_t a = 0; a < acc.datoms.size(); ++a) {
    acc.datoms[a].m += w * d.datoms[a].m;
    acc.datoms[a].q += w * d.datoms[a].q;
    acc.datoms[a].g += w * d.datoms[a].g;
  }
}

bool finite(const SummaryState& s) {
  if (!std::isfinite(s.b) || !s.v.allFinite()) return false;
  for (const auto& a : s.atoms)
    if (!a.m.allFinite() || !a.q.allFinite() || !a.g.allFinite()) return false;
  return true;
}

}  // namespace

Trajectory integrate(const SummaryState& state0, const MixtureTarget& target,
                     const Schedule& schedule, const Hyperparams& hp,
                     const Activation& act, double tau_end,
                     const IntegrateOptions& opts) {
  if (opts.step <= 0.0) throw std::invalid_argument("step must be positive");
  const double lambda_avg = average_eigenvalue(target);
  const double b0 = state0.b;

  SummaryState s = state0;
  Trajectory traj;
  traj.emplace_back(0.0, s);

  auto f = [&](double theta, SummaryState st) {
    if (opts.closed_form_b) st.b = b_closed_form(theta, b0, lambda_avg, schedule);
    return rhs_all(st, target, schedule, hp, act);
  };

  const int n_steps = static_cast<int>(std::ceil(tau_end / opts.step - 1e-12));
  double next_output = opts.output_every;
  for (int k = 0; k < n_steps; ++k) {
    const double theta = k * opts.step;
    const double h = std::min(opts.step, tau_end - theta);
    const bool step_b = !opts.closed_form_b;
    if (opts.rk4) {
      const Derivs k1 = f(theta, s);
      const Derivs k2 = f(theta + 0.5 * h, advanced(s, k1, 0.5 * h, step_b));
      const Derivs k3 = f(theta + 0.5 * h, advanced(s, k2, 0.5 * h, step_b));
      const Derivs k4 = f(theta + h, advanced(s, k3, h, step_b));
      Derivs sum = k1;
      axpy(sum, k2, 2.0);
      axpy(sum, k3, 2.0);
      axpy(sum, k4, 1.0);
      s = advanced(s, sum, h / 6.0, step_b);
    } else {
      s = advanced(s, f(theta, s), h, step_b);
    }
    const double theta_next = theta + h;
    if (opts.closed_form_b) s.b = b_closed_form(theta_next, b0, lambda_avg, schedule);
    if (!finite(s)) {
      std::ostringstream msg;
      msg << "non-finite summary state at theta = " << theta_next;
      throw std::runtime_error(msg.str());
    }
    if (theta_next + 1e-12 >= next_output || k == n_steps - 1) {
      traj.emplace_back(theta_next, s);
      while (next_output <= theta_next + 1e-12) next_output += opts.output_every;
    }
  }
  return traj;
}

LinearFixedPoint linear_fixed_point(const Schedule& schedule, double rho,
                                    double weight_decay) {
  const double eb = schedule.mean_beta();
  const double eb2 = schedule.mean_beta2();
  const double ea2 = schedule.mean_alpha2();
  LinearFixedPoint fp;
  const double qcal =
      ((eb * ea2 / (eb2 + ea2)) * rho - 0.5 * weight_decay) / (eb2 * (1.0 + rho) + ea2);
  if (qcal <= 0.0) {
    fp.trivial = true;
    return fp;
  }
  fp.Qcal = qcal;
  fp.M = std::sqrt(rho * qcal);  // the stable ray has M^2 = rho * Qcal
  return fp;
}

}  // namespace flowlab
