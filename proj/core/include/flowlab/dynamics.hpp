#pragma once

#include <Eigen/Dense>
#include <vector>

#include "flowlab/activation.hpp"
#include "flowlab/schedule.hpp"
#include "flowlab/summary_state.hpp"
#include "flowlab/target.hpp"

namespace flowlab {

/// Reading of the theta-coupled cross term in the m/g/q equations: the
/// literal form uses Q-cal; the variant (kept for the disagreement probe
/// against the finite-d oracle) uses Q^c.
enum class ThetaCoupling { QcalLiteral, QcVariant };

struct Hyperparams {
  double eta = 0.2;
  double weight_decay = 0.0;
  bool include_quadratic = true;
  ThetaCoupling theta_coupling = ThetaCoupling::QcalLiteral;
  // Gauss-Hermite order per dimension, by integral dimensionality.
  int order_dim2 = 40;
  int order_dim3 = 20;
  int order_dim4 = 12;
};

/// Full right-hand side at one state; entries are d/d-theta increments.
struct Derivs {
  double db = 0.0;
  Eigen::VectorXd dv;
  std::vector<AtomState> datoms;
};

double rhs_b(double b, double lambda_avg, const Schedule& schedule);
double b_closed_form(double tau, double b0, double lambda_avg, const Schedule& schedule);

/// Evaluates every ODE right-hand side at once (the integral tables are
/// shared between the m, g, q and v equations).
Derivs rhs_all(const SummaryState& state, const MixtureTarget& target,
               const Schedule& schedule, const Hyperparams& hp, const Activation& act);

std::vector<Eigen::MatrixXd> rhs_m(const SummaryState& state, const MixtureTarget& target,
                                   const Schedule& schedule, const Hyperparams& hp,
                                   const Activation& act);
std::vector<Eigen::MatrixXd> rhs_g(const SummaryState& state, const MixtureTarget& target,
                                   const Schedule& schedule, const Hyperparams& hp,
                                   const Activation& act);
std::vector<Eigen::MatrixXd> rhs_q(const SummaryState& state, const MixtureTarget& target,
                                   const Schedule& schedule, const Hyperparams& hp,
                                   const Activation& act);
Eigen::VectorXd rhs_v(const SummaryState& state, const MixtureTarget& target,
                      const Schedule& schedule, const Hyperparams& hp,
                      const Activation& act);

struct IntegrateOptions {
  double step = 0.01;
  bool rk4 = true;
  double output_every = 0.1;   // spacing of recorded states in theta
  bool closed_form_b = true;   // b from the exact solution instead of stepping
};

/// Fixed-step integration of all right-hand sides from theta = 0 to tau_end.
/// Throws on non-finite state with the offending time in the message.
Trajectory integrate(const SummaryState& state0, const MixtureTarget& target,
                     const Schedule& schedule, const Hyperparams& hp,
                     const Activation& act, double tau_end,
                     const IntegrateOptions& opts);

struct LinearFixedPoint {
  double M = 0.0;
  double Qcal = 0.0;
  bool trivial = false;  // weight decay too strong, only Q-cal = 0 remains
};

/// Stationary point of the identity-activation r=1 system for a binary
/// mixture of isotropic clusters with squared centroid norm rho.
LinearFixedPoint linear_fixed_point(const Schedule& schedule, double rho, double weight_decay);

}  // namespace flowlab
