#include "flowlab/schedule.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace flowlab {

Schedule Schedule::linear() {
  Schedule s;
  s.alpha_ = [](double t) { return 1.0 - t; };
  s.beta_ = [](double t) { return t; };
  s.dalpha_ = [](double) { return -1.0; };
  s.dbeta_ = [](double) { return 1.0; };
  s.name_ = "linear";
  return s;
}

Schedule Schedule::cosine() {
  Schedule s;
  s.alpha_ = [](double t) { return std::cos(M_PI * std::pow(t, 4) / 2.0); };
  s.beta_ = [](double t) { return std::sin(M_PI * std::pow(t, 4) / 2.0); };
  s.dalpha_ = [](double t) {
    return -std::sin(M_PI * std::pow(t, 4) / 2.0) * 2.0 * M_PI * std::pow(t, 3);
  };
  s.dbeta_ = [](double t) {
    return std::cos(M_PI * std::pow(t, 4) / 2.0) * 2.0 * M_PI * std::pow(t, 3);
  };
  s.name_ = "cosine";
  return s;
}

namespace {

// Piecewise-linear interpolation with clamped ends.
double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  std::size_t hi = 1;
  while (xs[hi] < x) ++hi;
  const double w = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
  return (1.0 - w) * ys[hi - 1] + w * ys[hi];
}

}  // namespace

Schedule Schedule::tabulated(const std::vector<double>& times,
                             const std::vector<double>& alpha,
                             const std::vector<double>& beta) {
  if (times.size() < 2 || times.size() != alpha.size() || times.size() != beta.size())
    throw std::invalid_argument("tabulated schedule needs >=2 matching samples");
  Schedule s;
  s.alpha_ = [times, alpha](double t) { return interp(times, alpha, t); };
  s.beta_ = [times, beta](double t) { return interp(times, beta, t); };
  const double h = times[1] - times[0];
  auto fd = [](std::vector<double> ts, std::vector<double> ys, double h) {
    return [ts = std::move(ts), ys = std::move(ys), h](double t) {
      const double lo = ts.front(), hi = ts.back();
      double a = std::max(lo, t - h / 2), b = std::min(hi, t + h / 2);
      return (interp(ts, ys, b) - interp(ts, ys, a)) / (b - a);
    };
  };
  s.dalpha_ = fd(times, alpha, h);
  s.dbeta_ = fd(times, beta, h);
  s.name_ = "tabulated";
  return s;
}

Schedule& Schedule::with_constant_epsilon(double e) {
  eps_ = [e](double) { return e; };
  return *this;
}

Schedule& Schedule::with_uniform_sampling_grid(int n_steps, double t_f) {
  sampling_grid_.clear();
  for (int k = 0; k <= n_steps; ++k)
    sampling_grid_.push_back(t_f * static_cast<double>(k) / n_steps);
  return *this;
}

double Schedule::mean_beta() const {
  double s = 0;
  for (double t : training_grid_) s += beta_(t);
  return s / static_cast<double>(training_grid_.size());
}
double Schedule::mean_beta2() const {
  double s = 0;
  for (double t : training_grid_) s += beta_(t) * beta_(t);
  return s / static_cast<double>(training_grid_.size());
}
double Schedule::mean_alpha2() const {
  double s = 0;
  for (double t : training_grid_) s += alpha_(t) * alpha_(t);
  return s / static_cast<double>(training_grid_.size());
}

ScheduleReport validate_schedule(const Schedule& s) {
  ScheduleReport rep;
  auto fail = [&rep](const std::string& msg) {
    rep.ok = false;
    rep.issues.push_back(msg);
  };
  const double tol = 1e-9;
  if (!s.alpha_ || !s.beta_) {
    fail("interpolants not set");
    return rep;
  }
  if (std::abs(s.alpha(0.0) - 1.0) > tol) fail("alpha(0) != 1");
  if (std::abs(s.alpha(1.0)) > tol) fail("alpha(1) != 0");
  if (std::abs(s.beta(0.0)) > tol) fail("beta(0) != 0");
  if (std::abs(s.beta(1.0) - 1.0) > tol) fail("beta(1) != 1");
  if (s.training_grid_.empty()) fail("training grid is empty");
  for (double t : s.training_grid_)
    if (t < 0.0 || t > 1.0) fail("training grid time outside [0,1]: t=" + std::to_string(t));

  const auto& grid = s.sampling_grid_;
  if (!grid.empty()) {
    if (std::abs(grid.front()) > tol) fail("sampling grid must start at t=0");
    if (grid.back() >= 1.0) fail("sampling grid must stop at t_f < 1");
    for (std::size_t k = 1; k < grid.size(); ++k)
      if (grid[k] <= grid[k - 1])
        fail("sampling grid not strictly increasing at t=" + std::to_string(grid[k]));
    for (double t : grid) {
      const double a = s.alpha(t), b = s.beta(t);
      if (a * a + b * b <= 0.0)
        fail("alpha^2+beta^2 vanishes at t=" + std::to_string(t));
      if (s.epsilon(t) < 0.0) fail("epsilon < 0 at t=" + std::to_string(t));
    }
  }
  return rep;
}

}  // namespace flowlab
