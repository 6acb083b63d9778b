#include "flowlab/experiment.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "flowlab/collapse.hpp"
#include "flowlab/matrix_io.hpp"
#include "flowlab/simulate.hpp"
#include "flowlab/transport.hpp"

namespace flowlab {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& why) {
  throw std::invalid_argument(path + ": " + why);
}

double num(const Json& j, const std::string& path, const std::string& key,
           std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    bad(path + "." + key, "missing");
  }
  if (!j.at(key).is_number()) bad(path + "." + key, "expected a number");
  return j.at(key).get<double>();
}

long integer(const Json& j, const std::string& path, const std::string& key,
             std::optional<long> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    bad(path + "." + key, "missing");
  }
  if (!j.at(key).is_number_integer()) bad(path + "." + key, "expected an integer");
  return j.at(key).get<long>();
}

std::string str(const Json& j, const std::string& path, const std::string& key,
                std::optional<std::string> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    bad(path + "." + key, "missing");
  }
  if (!j.at(key).is_string()) bad(path + "." + key, "expected a string");
  return j.at(key).get<std::string>();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(const Json& config) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(config.dump());
  return os.str();
}

Eigen::MatrixXd basis_columns(int d, const std::vector<int>& axes) {
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(d, static_cast<int>(axes.size()));
  for (std::size_t j = 0; j < axes.size(); ++j) e(axes[j], static_cast<int>(j)) = 1.0;
  return e;
}

std::string format_tau(double tau) {
  std::ostringstream os;
  os << tau;
  std::string s = os.str();
  for (char& c : s)
    if (c == '.') c = 'p';
  return s;
}

}  // namespace

MixtureTarget build_target(const Json& spec) {
  if (!spec.is_object()) bad("target", "expected an object");
  const std::string kind = str(spec, "target", "kind");

  if (kind == "binary") {
    const double rho = num(spec, "target", "rho", 1.0);
    const int d = static_cast<int>(integer(spec, "target", "d", 2));
    if (d < 1) bad("target.d", "must be >= 1");
    if (rho <= 0.0) bad("target.rho", "must be positive");
    Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(d, 2);
    centroids(0, 0) = std::sqrt(rho);
    centroids(0, 1) = -std::sqrt(rho);
    Eigen::VectorXd pi(2);
    pi << 0.5, 0.5;
    return isotropic_mixture(pi, centroids, basis_columns(d, {0}));
  }

  if (kind == "trimodal") {
    const int d = static_cast<int>(integer(spec, "target", "d", 2));
    if (d < 2) bad("target.d", "must be >= 2 for trimodal");
    // Ordered so a warm start along the first r centroids spans both axes.
    Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(d, 3);
    centroids(0, 0) = 1.0;
    centroids(1, 1) = 1.0;
    centroids(0, 2) = -1.0;
    Eigen::VectorXd pi = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
    if (spec.contains("pi")) {
      const auto& jp = spec.at("pi");
      if (!jp.is_array() || jp.size() != 3) bad("target.pi", "expected 3 weights");
      for (int k = 0; k < 3; ++k) pi(k) = jp.at(k).get<double>();
      pi /= pi.sum();
    }
    return isotropic_mixture(pi, centroids, basis_columns(d, {0, 1}));
  }

  if (kind == "imbalance") {
    const int d = static_cast<int>(integer(spec, "target", "d", 2));
    if (d < 2) bad("target.d", "must be >= 2 for imbalance");
    Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(d, 3);
    centroids(1, 0) = -3.0;
    centroids(0, 1) = 3.0;
    centroids(0, 2) = -3.0;
    Eigen::VectorXd pi(3);
    pi << 0.5, 1.0 / 6.0, 1.0 / 3.0;
    return isotropic_mixture(pi, centroids, basis_columns(d, {0, 1}));
  }

  if (kind == "heavy_spectrum") {
    if (!spec.contains("groups") || !spec.at("groups").is_array() ||
        spec.at("groups").empty())
      bad("target.groups", "expected a nonempty array of [eigenvalue, count]");
    std::vector<std::pair<double, int>> groups;
    for (std::size_t i = 0; i < spec.at("groups").size(); ++i) {
      const auto& g = spec.at("groups").at(i);
      if (!g.is_array() || g.size() != 2)
        bad("target.groups[" + std::to_string(i) + "]", "expected [eigenvalue, count]");
      groups.emplace_back(g.at(0).get<double>(), g.at(1).get<int>());
    }
    const int R = static_cast<int>(integer(spec, "target", "reference_dim", 2));
    return heavy_spectrum_target(groups, R);
  }

  bad("target.kind", "unknown kind '" + kind + "'");
}

Schedule build_schedule(const Json& spec) {
  if (!spec.is_object()) bad("schedule", "expected an object");
  const std::string kind = str(spec, "schedule", "kind", std::string("linear"));
  Schedule s;
  if (kind == "linear")
    s = Schedule::linear();
  else if (kind == "cosine")
    s = Schedule::cosine();
  else
    bad("schedule.kind", "unknown kind '" + kind + "'");

  s.with_constant_epsilon(num(spec, "schedule", "epsilon", 0.0));

  const std::string p = str(spec, "schedule", "p", std::string("zero"));
  if (p == "cospi")
    s.with_p([](double t) { return std::cos(M_PI * t); });
  else if (p != "zero")
    bad("schedule.p", "unknown signal '" + p + "'");

  if (!spec.contains("training_grid") || !spec.at("training_grid").is_array() ||
      spec.at("training_grid").empty())
    bad("schedule.training_grid", "expected a nonempty array of times");
  std::vector<double> grid;
  for (const auto& t : spec.at("training_grid")) grid.push_back(t.get<double>());
  s.with_training_grid(std::move(grid));

  const double t_f = num(spec, "schedule", "t_f", 0.98);
  const long n_steps = integer(spec, "schedule", "n_sampling_steps", 100);
  if (!(t_f > 0.0 && t_f < 1.0)) bad("schedule.t_f", "must lie in (0, 1)");
  if (n_steps < 2) bad("schedule.n_sampling_steps", "must be >= 2");
  s.with_uniform_sampling_grid(static_cast<int>(n_steps), t_f);
  return s;
}

Activation build_activation(const std::string& name) { return Activation::from_name(name); }

Hyperparams build_hyperparams(const Json& spec) {
  Hyperparams hp;
  if (spec.is_null()) return hp;
  if (!spec.is_object()) bad("hyperparams", "expected an object");
  hp.eta = num(spec, "hyperparams", "eta", hp.eta);
  hp.weight_decay = num(spec, "hyperparams", "weight_decay", hp.weight_decay);
  if (spec.contains("include_quadratic"))
    hp.include_quadratic = spec.at("include_quadratic").get<bool>();
  const std::string coupling =
      str(spec, "hyperparams", "theta_coupling", std::string("qcal"));
  if (coupling == "qcal")
    hp.theta_coupling = ThetaCoupling::QcalLiteral;
  else if (coupling == "qc")
    hp.theta_coupling = ThetaCoupling::QcVariant;
  else
    bad("hyperparams.theta_coupling", "expected 'qcal' or 'qc'");
  hp.order_dim2 = static_cast<int>(integer(spec, "hyperparams", "order_dim2", hp.order_dim2));
  hp.order_dim3 = static_cast<int>(integer(spec, "hyperparams", "order_dim3", hp.order_dim3));
  hp.order_dim4 = static_cast<int>(integer(spec, "hyperparams", "order_dim4", hp.order_dim4));
  if (hp.eta <= 0.0) bad("hyperparams.eta", "must be positive");
  return hp;
}

DensityGrid build_grid(const Json& axes) {
  if (!axes.is_array() || axes.empty() || axes.size() > 2)
    bad("grid", "expected an array of 1 or 2 axes [lo, hi, n]");
  std::vector<DensityGrid::Axis> ax;
  for (std::size_t k = 0; k < axes.size(); ++k) {
    const auto& a = axes.at(k);
    if (!a.is_array() || a.size() != 3)
      bad("grid[" + std::to_string(k) + "]", "expected [lo, hi, n]");
    DensityGrid::Axis axis;
    axis.lo = a.at(0).get<double>();
    axis.hi = a.at(1).get<double>();
    axis.n = a.at(2).get<int>();
    if (!(axis.hi > axis.lo) || axis.n < 2)
      bad("grid[" + std::to_string(k) + "]", "need hi > lo and n >= 2");
    ax.push_back(axis);
  }
  return make_grid(ax);
}

SummaryState build_initial_state(const Json& init, const MixtureTarget& target, int r,
                                 double b0) {
  if (!init.is_object()) bad("model.init", "expected an object");
  const std::string kind = str(init, "model.init", "kind");
  if (kind == "cold")
    return init_cold(target, r, num(init, "model.init", "s", 0.1), b0);
  if (kind == "warm")
    return init_warm(target, r, num(init, "model.init", "norm", 0.1), b0);
  if (kind == "measured") {
    const int d = static_cast<int>(integer(init, "model.init", "d"));
    const double s = num(init, "model.init", "s", 0.1);
    const auto seed = static_cast<std::uint64_t>(integer(init, "model.init", "seed", 1));
    if (!target.embedding) bad("model.init", "measured init needs an embedded target");
    if (target.embedding->d != d)
      bad("model.init.d", "must match the target dimension " +
                              std::to_string(target.embedding->d));
    return measure_summary(init_params(d, r, s, seed, b0), target);
  }
  bad("model.init.kind", "unknown kind '" + kind + "'");
}

DensityGrid target_projected_density(const MixtureTarget& target,
                                     const DensityGrid& grid_spec) {
  if (!target.embedding)
    throw std::invalid_argument("target_projected_density needs an embedding");
  const Embedding& emb = *target.embedding;
  const int R = target.reference_dim;
  if (grid_spec.dim != R)
    throw std::invalid_argument("grid dimension must match the reference dimension");
  const int K = target.n_clusters();

  DensityGrid out = grid_spec;
  out.values.setZero(out.n_cells());
  const Eigen::MatrixXd centers = out.cell_centers();

  for (int c = 0; c < K; ++c) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(R, R);
    for (int i = 0; i < emb.d; ++i)
      cov.noalias() += emb.eigenvalues(i, c) * emb.reference.row(i).transpose() *
                       emb.reference.row(i);
    const Eigen::VectorXd mean = target.reference_overlaps.row(c).transpose();
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("degenerate projected cluster covariance");
    const double det_l = Eigen::MatrixXd(llt.matrixL()).diagonal().prod();
    const double norm =
        target.pi(c) / (std::pow(2.0 * M_PI, 0.5 * R) * det_l);
    for (int i = 0; i < centers.rows(); ++i) {
      const Eigen::VectorXd dlt = centers.row(i).transpose() - mean;
      const double q = dlt.dot(llt.solve(dlt));
      out.values(i) += norm * std::exp(-0.5 * q);
    }
  }
  out.raw_mass = out.mass();
  if (out.raw_mass > 0.0) out.values /= out.raw_mass;
  return out;
}

double column_variance(const Eigen::MatrixXd& samples, int col) {
  const auto n = static_cast<double>(samples.rows());
  const double mean = samples.col(col).mean();
  return (samples.col(col).array() - mean).square().sum() / n;
}

GeneratedDensity generated_density(const SummaryState& state, const Schedule& schedule,
                                   const Activation& act, int n_samples,
                                   std::uint64_t seed, const DensityGrid& grid_spec) {
  const ZEnsemble z = sample_Z(state, schedule, act, n_samples, seed);
  auto [law, projected] = project(state, z, schedule);
  GeneratedDensity out;
  out.density = density_on_grid(law, z.terminal(), grid_spec);
  out.projected = std::move(projected);
  out.z_terminal = z.terminal();
  return out;
}

// ---------------------------------------------------------------------------
// Presets

namespace {

Json preset_fig1_binary() {
  return Json{
      {"spec_version", 1},
      {"mode", "compare"},
      {"seed", 7},
      {"target", {{"kind", "binary"}, {"rho", 1.0}, {"d", 1000}}},
      {"schedule",
       {{"kind", "linear"},
        {"epsilon", 0.0},
        {"p", "zero"},
        {"training_grid", {0.5}},
        {"t_f", 0.9},
        {"n_sampling_steps", 100}}},
      {"model",
       {{"r", 1},
        {"activation", "tanh"},
        {"b0", 0.0},
        {"init", {{"kind", "warm"}, {"norm", 0.1}}}}},
      {"hyperparams", {{"eta", 0.2}, {"weight_decay", 1.5}}},
      {"run",
       {{"taus", {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0}},
        {"n_samples", 4000},
        {"grid", {{-2.5, 2.5, 101}}},
        {"with_sim", true},
        {"sim_d", 1000},
        {"sim_init_norm", 0.1},
        {"bandwidth", 1.5}}}};
}

Json preset_trimodal_tanh_dynamics() {
  return Json{
      {"spec_version", 1},
      {"mode", "theory-train"},
      {"seed", 3},
      {"target", {{"kind", "trimodal"}, {"d", 2}}},
      {"schedule",
       {{"kind", "linear"},
        {"epsilon", 0.0},
        {"p", "zero"},
        {"training_grid", {0.5}},
        {"t_f", 0.98},
        {"n_sampling_steps", 100}}},
      {"model",
       {{"r", 2},
        {"activation", "tanh"},
        {"b0", 0.0},
        {"init", {{"kind", "warm"}, {"norm", 0.1}}}}},
      {"hyperparams", {{"eta", 0.2}, {"weight_decay", 0.0}}},
      {"run", {{"tau", 10.0}, {"output_every", 0.1}}}};
}

Json preset_trimodal_tanh_density() {
  return Json{
      {"spec_version", 1},
      {"mode", "sample"},
      {"seed", 5},
      {"target", {{"kind", "trimodal"}, {"d", 2}}},
      {"schedule",
       {{"kind", "linear"},
        {"epsilon", 0.1},
        {"p", "zero"},
        {"training_grid", {0.5}},
        {"t_f", 0.98},
        {"n_sampling_steps", 100}}},
      {"model",
       {{"r", 2},
        {"activation", "tanh"},
        {"b0", 0.0},
        {"init", {{"kind", "warm"}, {"norm", 0.1}}}}},
      {"hyperparams", {{"eta", 0.2}, {"weight_decay", 1.5}}},
      {"run",
       {{"taus", {2.8}},
        {"n_samples", 4000},
        {"grid", {{-2.0, 2.0, 61}, {-2.0, 2.0, 61}}}}}};
}

Json preset_figA_trimodal_relu() {
  return Json{
      {"spec_version", 1},
      {"mode", "sample"},
      {"seed", 11},
      {"target", {{"kind", "trimodal"}, {"d", 500}}},
      {"schedule",
       {{"kind", "linear"},
        {"epsilon", 0.1},
        {"p", "zero"},
        {"training_grid", {0.7}},
        {"t_f", 0.98},
        {"n_sampling_steps", 100}}},
      {"model",
       {{"r", 4},
        {"activation", "relu"},
        {"b0", 0.0},
        {"init", {{"kind", "measured"}, {"d", 500}, {"s", 0.1}, {"seed", 11}}}}},
      {"hyperparams", {{"eta", 0.2}, {"weight_decay", 1.5}}},
      {"run",
       {{"taus", {1.0, 2.8}},
        {"n_samples", 4000},
        {"grid", {{-2.0, 2.0, 61}, {-2.0, 2.0, 61}}}}}};
}

Json preset_mnist_covariance() {
  return Json{
      {"spec_version", 1},
      {"mode", "sample"},
      {"seed", 13},
      {"target",
       {{"kind", "heavy_spectrum"},
        {"groups", {{6.0, 1}, {2.5, 1}, {0.8, 3}, {0.2, 10}, {0.01, 769}}},
        {"reference_dim", 2}}},
      {"schedule",
       {{"kind", "linear"},
        {"epsilon", 0.0},
        {"p", "zero"},
        {"training_grid", {0.5}},
        {"t_f", 0.98},
        {"n_sampling_steps", 50}}},
      {"model",
       {{"r", 2},
        {"activation", "tanh"},
        {"b0", 0.0},
        {"init", {{"kind", "measured"}, {"d", 784}, {"s", 1.0}, {"seed", 13}}}}},
      {"hyperparams", {{"eta", 0.2}, {"weight_decay", 0.784}}},
      {"run",
       {{"taus", {2.8}},
        {"n_samples", 4000},
        {"grid", {{-6.0, 6.0, 61}, {-5.0, 5.0, 61}}}}}};
}

Json preset_fig4_collapse() {
  return Json{
      {"spec_version", 1},
      {"mode", "collapse"},
      {"seed", 17},
      {"target",
       {{"kind", "heavy_spectrum"},
        {"groups", {{6.0, 1}, {2.5, 1}, {0.8, 3}, {0.2, 10}, {0.01, 769}}},
        {"reference_dim", 2}}},
      {"schedule",
       {{"kind", "linear"},
        {"epsilon", 0.0},
        {"p", "zero"},
        {"training_grid", {0.5}},
        {"t_f", 0.98},
        {"n_sampling_steps", 50}}},
      {"model",
       {{"r", 2},
        {"activation", "tanh"},
        {"b0", 0.0},
        {"init", {{"kind", "measured"}, {"d", 784}, {"s", 1.0}, {"seed", 17}}}}},
      {"hyperparams", {{"eta", 0.2}, {"weight_decay", 0.784}}},
      {"run",
       {{"generations", 2},
        {"tau_per_generation", 2.8},
        {"ode_step", 0.02},  // the later generations carry ~100 clusters
        {"n_samples", 4000},
        {"grid", {{-6.0, 6.0, 61}, {-5.0, 5.0, 61}}},
        {"pi_samples", 4000},
        {"pi_grid", {{-1.5, 1.5, 10}, {-2.5, 2.5, 10}}},
        {"pi_bandwidth", 1.5},
        {"regen_init_s", 1.0},
        {"ambient_d", 784}}}};
}

Json preset_linear_fixed_point() {
  return Json{
      {"spec_version", 1},
      {"mode", "theory-train"},
      {"seed", 1},
      {"target", {{"kind", "binary"}, {"rho", 1.0}, {"d", 2}}},
      {"schedule",
       {{"kind", "linear"},
        {"epsilon", 0.0},
        {"p", "zero"},
        {"training_grid", {0.5}},
        {"t_f", 0.9},
        {"n_sampling_steps", 100}}},
      {"model",
       {{"r", 1},
        {"activation", "identity"},
        {"b0", 0.0},
        {"init", {{"kind", "warm"}, {"norm", 0.1}}}}},
      {"hyperparams", {{"eta", 0.2}, {"weight_decay", 0.0}}},
      {"run", {{"tau", 60.0}, {"output_every", 0.5}}}};
}

Json preset_binary_time_encoding() {
  return Json{
      {"spec_version", 1},
      {"mode", "theory-train"},
      {"seed", 1},
      {"target", {{"kind", "imbalance"}, {"d", 2}}},
      {"schedule",
       {{"kind", "linear"},
        {"epsilon", 0.0},
        {"p", "cospi"},
        {"training_grid", {0.2, 0.4, 0.6, 0.8}},
        {"t_f", 0.98},
        {"n_sampling_steps", 100}}},
      {"model",
       {{"r", 2},
        {"activation", "tanh"},
        {"b0", 0.0},
        {"init", {{"kind", "warm"}, {"norm", 0.1}}}}},
      {"hyperparams", {{"eta", 0.5}, {"weight_decay", 0.1}}},
      {"run", {{"tau", 15.0}, {"output_every", 0.1}}}};
}

}  // namespace

std::vector<std::pair<std::string, std::string>> list_presets() {
  return {
      {"fig1_binary",
       "binary mixture, r=1 tanh: theory vs finite-d Hellinger across tau"},
      {"trimodal_tanh_dynamics", "three clusters, r=2 tanh: summary dynamics"},
      {"trimodal_tanh_density", "three clusters, r=2 tanh: projected density at tau=2.8"},
      {"figA_trimodal_relu", "three clusters, r=4 relu: projected densities"},
      {"mnist_covariance", "heavy-spectrum Gaussian, r=2 tanh: projected density"},
      {"fig4_collapse", "retrain-on-own-samples loop over several generations"},
      {"linear_fixed_point", "identity activation, r=1: convergence to the fixed point"},
      {"binary_time_encoding", "imbalanced clusters with p = cos(pi t) time encoding"},
  };
}

Json preset_config(const std::string& name) {
  if (name == "fig1_binary") return preset_fig1_binary();
  if (name == "trimodal_tanh_dynamics") return preset_trimodal_tanh_dynamics();
  if (name == "trimodal_tanh_density") return preset_trimodal_tanh_density();
  if (name == "figA_trimodal_relu") return preset_figA_trimodal_relu();
  if (name == "mnist_covariance") return preset_mnist_covariance();
  if (name == "fig4_collapse") return preset_fig4_collapse();
  if (name == "linear_fixed_point") return preset_linear_fixed_point();
  if (name == "binary_time_encoding") return preset_binary_time_encoding();
  throw std::invalid_argument("unknown preset: " + name);
}

std::string validate_config(const Json& config) {
  try {
    if (!config.is_object()) bad("config", "expected an object");
    if (integer(config, "config", "spec_version") != 1)
      bad("config.spec_version", "unsupported version");
    const std::string mode = str(config, "config", "mode");
    const bool known = mode == "theory-train" || mode == "sim-train" ||
                       mode == "sample" || mode == "compare" || mode == "collapse";
    if (!known) bad("config.mode", "unknown mode '" + mode + "'");

    if (!config.contains("target")) bad("config.target", "missing");
    const MixtureTarget target = build_target(config.at("target"));
    const TargetReport tr = validate_target(target);
    if (!tr.ok) bad("config.target", tr.issues.front());

    if (!config.contains("schedule")) bad("config.schedule", "missing");
    const Schedule schedule = build_schedule(config.at("schedule"));
    const ScheduleReport sr = validate_schedule(schedule);
    if (!sr.ok) bad("config.schedule", sr.issues.front());

    if (!config.contains("model")) bad("config.model", "missing");
    const Json& model = config.at("model");
    const int r = static_cast<int>(integer(model, "model", "r"));
    if (r < 1) bad("model.r", "must be >= 1");
    build_activation(str(model, "model", "activation"));
    if (!model.contains("init")) bad("model.init", "missing");
    build_initial_state(model.at("init"), target, r, num(model, "model", "b0", 0.0));

    build_hyperparams(config.contains("hyperparams") ? config.at("hyperparams")
                                                     : Json());

    if (!config.contains("run")) bad("config.run", "missing");
    const Json& run = config.at("run");
    if (mode == "theory-train") {
      if (num(run, "run", "tau") <= 0.0) bad("run.tau", "must be positive");
    } else if (mode == "sim-train") {
      if (num(run, "run", "tau") <= 0.0) bad("run.tau", "must be positive");
      if (!target.embedding) bad("config.target", "sim-train needs an embedded target");
    } else if (mode == "sample" || mode == "compare") {
      if (!run.contains("taus") || !run.at("taus").is_array() || run.at("taus").empty())
        bad("run.taus", "expected a nonempty array");
      if (integer(run, "run", "n_samples") < 2) bad("run.n_samples", "must be >= 2");
      build_grid(run.contains("grid") ? run.at("grid") : Json());
      if (mode == "compare" && run.value("with_sim", false) && !target.embedding)
        bad("config.target", "compare with_sim needs an embedded target");
    } else if (mode == "collapse") {
      if (integer(run, "run", "generations") < 1)
        bad("run.generations", "must be >= 1");
      if (num(run, "run", "tau_per_generation") <= 0.0)
        bad("run.tau_per_generation", "must be positive");
      if (integer(run, "run", "n_samples") < 2) bad("run.n_samples", "must be >= 2");
      if (integer(run, "run", "pi_samples", 4000) < 2)
        bad("run.pi_samples", "must be >= 2");
      const DensityGrid pg =
          build_grid(run.contains("pi_grid") ? run.at("pi_grid") : Json());
      if (pg.dim != r) bad("run.pi_grid", "dimension must equal model.r");
      build_grid(run.contains("grid") ? run.at("grid") : Json());
      if (integer(run, "run", "ambient_d", 1000) <= r)
        bad("run.ambient_d", "must exceed model.r");
    }
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

// ---------------------------------------------------------------------------
// Runner

namespace {

struct ExperimentContext {
  MixtureTarget target;
  Schedule schedule;
  Activation act;
  Hyperparams hp;
  int r = 1;
  double b0 = 0.0;
  std::uint64_t seed = 1;
  Json run;
};

void write_hellinger_csv(const std::string& path,
                         const std::vector<std::array<double, 3>>& rows, bool with_sim) {
  std::ofstream os(path);
  os << std::setprecision(17);
  os << (with_sim ? "tau,h2_theory,h2_sim\n" : "tau,h2_theory\n");
  for (const auto& row : rows) {
    os << row[0] << ',' << row[1];
    if (with_sim) os << ',' << row[2];
    os << '\n';
  }
}

IntegrateOptions integrate_options(const Json& run) {
  IntegrateOptions opts;
  opts.step = run.value("ode_step", 0.01);
  opts.output_every = run.value("output_every", 0.1);
  return opts;
}

void run_theory_train(const ExperimentContext& ctx, const Json& config,
                      const std::string& out_dir, RunResult& res, Json& extras) {
  const SummaryState s0 = build_initial_state(config.at("model").at("init"), ctx.target,
                                              ctx.r, ctx.b0);
  const double tau = ctx.run.at("tau").get<double>();
  const Trajectory traj =
      integrate(s0, ctx.target, ctx.schedule, ctx.hp, ctx.act, tau,
                integrate_options(ctx.run));
  const std::string path = out_dir + "/trajectory_theory.csv";
  write_trajectory_csv(path, traj, ctx.target);
  res.artifacts.push_back("trajectory_theory.csv");
  const SummaryState& sf = traj.back().second;
  extras["final_b"] = sf.b;
  extras["final_qcal_trace"] = sf.Qcal().trace();
}

void run_sim_train(const ExperimentContext& ctx, const Json& config,
                   const std::string& out_dir, RunResult& res, Json& extras) {
  const Embedding& emb = *ctx.target.embedding;
  const Json& init = config.at("model").at("init");
  const std::string kind = init.at("kind").get<std::string>();
  DAEParams p0;
  if (kind == "warm")
    p0 = warm_params(ctx.target, ctx.r, init.value("norm", 0.1), ctx.seed, ctx.b0);
  else if (kind == "cold" || kind == "measured")
    p0 = init_params(emb.d, ctx.r, init.value("s", 0.1),
                     init.value("seed", static_cast<long>(ctx.seed)), ctx.b0);
  else
    bad("model.init.kind", "unknown kind '" + kind + "'");

  const double tau = ctx.run.at("tau").get<double>();
  const long n_steps =
      static_cast<long>(std::llround(tau * emb.d / (2.0 * ctx.hp.eta)));
  const TrainResult tr =
      train(p0, ctx.target, ctx.schedule, ctx.hp, ctx.act, n_steps, ctx.seed);
  const std::string path = out_dir + "/trajectory_sim.csv";
  write_trajectory_csv(path, tr.measured, ctx.target);
  res.artifacts.push_back("trajectory_sim.csv");
  extras["n_steps"] = n_steps;
  extras["final_b"] = tr.params.b;
}

void run_sample(const ExperimentContext& ctx, const Json& config,
                const std::string& out_dir, RunResult& res, Json& extras) {
  std::vector<double> taus;
  for (const auto& t : ctx.run.at("taus")) taus.push_back(t.get<double>());
  std::sort(taus.begin(), taus.end());
  const int n_samples = ctx.run.at("n_samples").get<int>();
  const DensityGrid grid_spec = build_grid(ctx.run.at("grid"));

  SummaryState state = build_initial_state(config.at("model").at("init"), ctx.target,
                                           ctx.r, ctx.b0);
  IntegrateOptions opts = integrate_options(ctx.run);
  double reached = 0.0;
  Json vars = Json::array();
  for (double tau : taus) {
    if (tau > reached) {
      const Trajectory leg = integrate(state, ctx.target, ctx.schedule, ctx.hp, ctx.act,
                                       tau - reached, opts);
      state = leg.back().second;
      reached = tau;
    }
    const GeneratedDensity gd = generated_density(state, ctx.schedule, ctx.act,
                                                  n_samples, ctx.seed, grid_spec);
    const std::string tag = format_tau(tau);
    write_density_csv(out_dir + "/density_tau_" + tag + ".csv", gd.density);
    write_matrix(out_dir + "/samples_tau_" + tag + ".bin", gd.projected);
    res.artifacts.push_back("density_tau_" + tag + ".csv");
    res.artifacts.push_back("samples_tau_" + tag + ".bin");
    Json v = Json::array();
    for (int j = 0; j < gd.projected.cols(); ++j)
      v.push_back(column_variance(gd.projected, j));
    vars.push_back({{"tau", tau}, {"projected_variances", v}, {"b", state.b}});
  }
  extras["checkpoints"] = vars;
}

void run_compare(const ExperimentContext& ctx, const Json& config,
                 const std::string& out_dir, RunResult& res, Json& extras) {
  std::vector<double> taus;
  for (const auto& t : ctx.run.at("taus")) taus.push_back(t.get<double>());
  std::sort(taus.begin(), taus.end());
  const int n_samples = ctx.run.at("n_samples").get<int>();
  const DensityGrid grid_spec = build_grid(ctx.run.at("grid"));
  const bool with_sim = ctx.run.value("with_sim", false);
  const double bandwidth = ctx.run.value("bandwidth", 1.5);

  const DensityGrid target_density = target_projected_density(ctx.target, grid_spec);
  write_density_csv(out_dir + "/density_target.csv", target_density);
  res.artifacts.push_back("density_target.csv");

  // Finite-d side: one training run, snapshots at the matching step counts.
  std::vector<DAEParams> snapshots;
  const Embedding* emb = ctx.target.embedding ? &*ctx.target.embedding : nullptr;
  if (with_sim) {
    const Json& init = config.at("model").at("init");
    const std::string kind = init.at("kind").get<std::string>();
    DAEParams p0;
    if (kind == "warm")
      p0 = warm_params(ctx.target, ctx.r, init.value("norm", 0.1), ctx.seed, ctx.b0);
    else
      p0 = init_params(emb->d, ctx.r, init.value("s", 0.1),
                       init.value("seed", static_cast<long>(ctx.seed)), ctx.b0);
    std::vector<long> steps;
    for (double tau : taus)
      steps.push_back(static_cast<long>(std::llround(tau * emb->d / (2.0 * ctx.hp.eta))));
    train_snapshots(p0, ctx.target, ctx.schedule, ctx.hp, ctx.act, steps, ctx.seed,
                    snapshots);
  }

  SummaryState state = build_initial_state(config.at("model").at("init"), ctx.target,
                                           ctx.r, ctx.b0);
  IntegrateOptions opts = integrate_options(ctx.run);
  double reached = 0.0;
  std::vector<std::array<double, 3>> rows;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const double tau = taus[i];
    if (tau > reached) {
      const Trajectory leg = integrate(state, ctx.target, ctx.schedule, ctx.hp, ctx.act,
                                       tau - reached, opts);
      state = leg.back().second;
      reached = tau;
    }
    const GeneratedDensity gd = generated_density(state, ctx.schedule, ctx.act,
                                                  n_samples, ctx.seed, grid_spec);
    const std::string tag = format_tau(tau);
    write_density_csv(out_dir + "/density_theory_tau_" + tag + ".csv", gd.density);
    res.artifacts.push_back("density_theory_tau_" + tag + ".csv");
    std::array<double, 3> row{tau, hellinger(gd.density, target_density), 0.0};

    if (with_sim) {
      const Eigen::MatrixXd x =
          generate_samples(snapshots[i], ctx.schedule, ctx.act, n_samples, ctx.seed + 1);
      const Eigen::MatrixXd projected = x * emb->reference;
      const DensityGrid sim_density = kde(projected, bandwidth, grid_spec);
      write_density_csv(out_dir + "/density_sim_tau_" + tag + ".csv", sim_density);
      res.artifacts.push_back("density_sim_tau_" + tag + ".csv");
      row[2] = hellinger(sim_density, target_density);
    }
    rows.push_back(row);
  }
  write_hellinger_csv(out_dir + "/hellinger_vs_tau.csv", rows, with_sim);
  res.artifacts.push_back("hellinger_vs_tau.csv");
  Json jr = Json::array();
  for (const auto& row : rows) {
    Json e{{"tau", row[0]}, {"h2_theory", row[1]}};
    if (with_sim) e["h2_sim"] = row[2];
    jr.push_back(e);
  }
  extras["hellinger"] = jr;
}

void run_collapse(const ExperimentContext& ctx, const Json& config,
                  const std::string& out_dir, RunResult& res, Json& extras) {
  const int generations = ctx.run.at("generations").get<int>();
  const double tau = ctx.run.at("tau_per_generation").get<double>();
  const int n_samples = ctx.run.at("n_samples").get<int>();
  const int pi_samples = ctx.run.value("pi_samples", 4000);
  const double pi_bandwidth = ctx.run.value("pi_bandwidth", 1.5);
  const double regen_s = ctx.run.value("regen_init_s", 0.1);
  const int ambient_d = ctx.run.value("ambient_d", 1000);
  const DensityGrid grid_spec = build_grid(ctx.run.at("grid"));
  const DensityGrid pi_grid = build_grid(ctx.run.at("pi_grid"));

  const DensityGrid reference = target_projected_density(ctx.target, grid_spec);
  write_density_csv(out_dir + "/density_target.csv", reference);
  res.artifacts.push_back("density_target.csv");

  extras["pi_discretization"] = Json{{"samples", pi_samples},
                                     {"grid", ctx.run.at("pi_grid")},
                                     {"bandwidth", pi_bandwidth}};

  std::ofstream summary(out_dir + "/collapse_summary.csv");
  summary << std::setprecision(17) << "generation,b,h2_vs_target";
  for (int j = 0; j < ctx.target.reference_dim; ++j) summary << ",var" << j;
  summary << '\n';
  res.artifacts.push_back("collapse_summary.csv");

  MixtureTarget target = ctx.target;
  IntegrateOptions opts = integrate_options(ctx.run);
  Json gens = Json::array();
  for (int gen = 1; gen <= generations; ++gen) {
    SummaryState s0 =
        gen == 1 ? build_initial_state(config.at("model").at("init"), target, ctx.r,
                                       ctx.b0)
                 : init_cold(target, ctx.r, regen_s, ctx.b0);
    const Trajectory traj =
        integrate(s0, target, ctx.schedule, ctx.hp, ctx.act, tau, opts);
    const SummaryState state = traj.back().second;

    const GeneratedDensity gd =
        generated_density(state, ctx.schedule, ctx.act, n_samples,
                          ctx.seed + static_cast<std::uint64_t>(gen), grid_spec);
    const std::string tag = std::to_string(gen);
    write_density_csv(out_dir + "/density_gen" + tag + ".csv", gd.density);
    res.artifacts.push_back("density_gen" + tag + ".csv");

    const double h2 = hellinger(gd.density, reference);
    summary << gen << ',' << state.b << ',' << h2;
    Json v = Json::array();
    for (int j = 0; j < gd.projected.cols(); ++j) {
      const double var = column_variance(gd.projected, j);
      summary << ',' << var;
      v.push_back(var);
    }
    summary << '\n';
    gens.push_back({{"generation", gen},
                    {"b", state.b},
                    {"h2_vs_target", h2},
                    {"projected_variances", v}});

    if (gen < generations) {
      const ZEnsemble z =
          sample_Z(state, ctx.schedule, ctx.act, pi_samples,
                   ctx.seed + 1000 + static_cast<std::uint64_t>(gen));
      target = next_generation_target(state, ctx.schedule, z.terminal(), pi_grid,
                                      pi_bandwidth, ambient_d);
    }
  }
  extras["generations"] = gens;
}

}  // namespace

RunResult run_experiment(const Json& config, const std::string& out_dir,
                         std::optional<std::uint64_t> seed_override) {
  RunResult res;
  const std::string err = validate_config(config);
  if (!err.empty()) {
    res.status = 2;
    res.message = err;
    return res;
  }

  const auto wall_start = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);

  ExperimentContext ctx;
  ctx.target = build_target(config.at("target"));
  ctx.schedule = build_schedule(config.at("schedule"));
  const Json& model = config.at("model");
  ctx.act = build_activation(model.at("activation").get<std::string>());
  ctx.hp = build_hyperparams(config.contains("hyperparams") ? config.at("hyperparams")
                                                            : Json());
  ctx.r = model.at("r").get<int>();
  ctx.b0 = model.value("b0", 0.0);
  ctx.seed = seed_override ? *seed_override
                           : static_cast<std::uint64_t>(config.value("seed", 1));
  ctx.run = config.at("run");

  const std::string mode = config.at("mode").get<std::string>();
  Json extras = Json::object();
  try {
    if (mode == "theory-train")
      run_theory_train(ctx, config, out_dir, res, extras);
    else if (mode == "sim-train")
      run_sim_train(ctx, config, out_dir, res, extras);
    else if (mode == "sample")
      run_sample(ctx, config, out_dir, res, extras);
    else if (mode == "compare")
      run_compare(ctx, config, out_dir, res, extras);
    else if (mode == "collapse")
      run_collapse(ctx, config, out_dir, res, extras);
  } catch (const std::exception& e) {
    res.status = 1;
    res.message = e.what();
    return res;
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start)
          .count();

  Json manifest;
  manifest["config"] = config;
  manifest["config_hash"] = hash_hex(config);
  manifest["mode"] = mode;
  manifest["seed"] = ctx.seed;
  manifest["wall_seconds"] = wall;
  manifest["artifacts"] = res.artifacts;
  manifest["extras"] = extras;
  std::ofstream mf(out_dir + "/manifest.json");
  mf << manifest.dump(2) << '\n';
  res.artifacts.push_back("manifest.json");
  res.message = "ok";
  return res;
}

}  // namespace flowlab
