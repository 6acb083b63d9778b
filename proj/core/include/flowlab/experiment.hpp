#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "flowlab/activation.hpp"
#include "flowlab/density.hpp"
#include "flowlab/dynamics.hpp"
#include "flowlab/schedule.hpp"
#include "flowlab/summary_state.hpp"
#include "flowlab/target.hpp"

namespace flowlab {

using Json = nlohmann::json;

/// Builders from config subtrees; throw std::invalid_argument with a
/// field-path message on bad input.
MixtureTarget build_target(const Json& spec);
Schedule build_schedule(const Json& spec);
Activation build_activation(const std::string& name);
Hyperparams build_hyperparams(const Json& spec);
DensityGrid build_grid(const Json& axes);

/// Initial summary state per the config's init block: cold(s), warm(norm) or
/// measured(d, s, seed) which draws finite-d weights and measures them.
SummaryState build_initial_state(const Json& init, const MixtureTarget& target, int r,
                                 double b0);

/// Exact projection of an embedded target onto its reference space:
/// mixture of N(P^c, E^T Sigma(c) E) with weights pi.
DensityGrid target_projected_density(const MixtureTarget& target,
                                     const DensityGrid& grid_spec);

/// Empirical variance of one sample column.
double column_variance(const Eigen::MatrixXd& samples, int col);

/// Theory-side pipeline at one training time: integrate (done by caller),
/// sample Z, project, render density.
struct GeneratedDensity {
  DensityGrid density;
  Eigen::MatrixXd projected;  // n x R samples
  Eigen::MatrixXd z_terminal; // n x r
};
GeneratedDensity generated_density(const SummaryState& state, const Schedule& schedule,
                                   const Activation& act, int n_samples,
                                   std::uint64_t seed, const DensityGrid& grid_spec);

std::vector<std::pair<std::string, std::string>> list_presets();
Json preset_config(const std::string& name);

/// Empty string if the config is valid, else a field-path diagnostic.
std::string validate_config(const Json& config);

struct RunResult {
  int status = 0;
  std::string message;
  std::vector<std::string> artifacts;
};

RunResult run_experiment(const Json& config, const std::string& out_dir,
                         std::optional<std::uint64_t> seed_override = std::nullopt);

}  // namespace flowlab
