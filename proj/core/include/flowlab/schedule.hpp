#pragma once

#include <functional>
#include <string>
#include <vector>

namespace flowlab {

struct ScheduleReport {
  bool ok = true;
  std::vector<std::string> issues;
};

/// Interpolation schedule: interpolants alpha/beta with derivatives, the
/// diffusion strength epsilon, the time-encoding signal p, the training
/// time grid and the sampling time grid.
class Schedule {
 public:
  using Fn = std::function<double(double)>;

  Schedule() = default;

  static Schedule linear();
  static Schedule cosine();  // alpha = cos(pi t^4 / 2), beta = sin(pi t^4 / 2)
  /// Tabulated interpolants on a uniform grid; derivatives via centered
  /// finite differences at the grid spacing.
  static Schedule tabulated(const std::vector<double>& times,
                            const std::vector<double>& alpha,
                            const std::vector<double>& beta);

  double alpha(double t) const { return alpha_(t); }
  double beta(double t) const { return beta_(t); }
  double alpha_dot(double t) const { return dalpha_(t); }
  double beta_dot(double t) const { return dbeta_(t); }
  double epsilon(double t) const { return eps_ ? eps_(t) : 0.0; }
  double p(double t) const { return p_ ? p_(t) : 0.0; }

  Schedule& with_epsilon(Fn eps) { eps_ = std::move(eps); return *this; }
  Schedule& with_constant_epsilon(double e);
  Schedule& with_p(Fn p) { p_ = std::move(p); return *this; }
  Schedule& with_training_grid(std::vector<double> g) { training_grid_ = std::move(g); return *this; }
  /// Uniform sampling grid t_k = k * t_f / n_steps, k = 0..n_steps.
  Schedule& with_uniform_sampling_grid(int n_steps, double t_f);
  Schedule& with_sampling_grid(std::vector<double> g) { sampling_grid_ = std::move(g); return *this; }

  const std::vector<double>& training_grid() const { return training_grid_; }
  const std::vector<double>& sampling_grid() const { return sampling_grid_; }

  /// Uniform averages over the training grid.
  double mean_beta() const;
  double mean_beta2() const;
  double mean_alpha2() const;

  const std::string& name() const { return name_; }

 private:
  friend ScheduleReport validate_schedule(const Schedule& s);

  Fn alpha_, beta_, dalpha_, dbeta_, eps_, p_;
  std::vector<double> training_grid_;
  std::vector<double> sampling_grid_;
  std::string name_ = "custom";
};

/// Checks boundary conditions alpha(0)=beta(1)=1, alpha(1)=beta(0)=0,
/// positivity of alpha^2+beta^2 on the sampling grid, epsilon >= 0, grid
/// monotonicity and t_f < 1. Report-based: never throws.
ScheduleReport validate_schedule(const Schedule& s);

}  // namespace flowlab
