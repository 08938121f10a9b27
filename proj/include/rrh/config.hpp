#pragma once

#include <string>

#include "rrh/evaluation.hpp"

namespace rrh {

/// Whole-experiment configuration. Defaults are the benchmark setup: Heston
/// S0=10, v0=theta=0.3^2, mu=0.08, kappa=3, xi=2, rho=-0.5 on 200 steps over
/// one year traded every 4 steps; down-barrier call with K=10, B=8.5;
/// CVaR_0.2 risk; Wasserstein-1 ball of radius 0.02 in robust mode.
struct ExperimentConfig {
    HestonParams market{};
    TimeGrid grid{};
    BarrierOptionSpec option{BarrierKind::knock_in, 10.0, 8.5, 1.0};
    double risk_alpha = 0.2;
    double risk_beta = 0.9;
    double risk_p_weight = 1.0;
    TransactionCostSpec cost{0.0};
    TrainConfig train{};
    RobustConfig robust{};
    bool robust_keys_present = false;  // set when a robust.* key appears in file/flags
    int policy_hidden_layers = 5;
    int policy_width = 35;
    double policy_bound = 2.0;
    int adversary_width = 10;
    int eval_n_paths = 100000;
    std::uint64_t eval_seed = 9001;
    std::string out_dir = "out";

    void validate() const;
    HedgingProblem problem() const;  // option maturity is the grid maturity
    DistortionSpec distortion() const;
    MLPSpec policy_spec() const;
    MLPSpec adversary_spec() const;
};

/// Applies one `section.key = value` assignment; throws std::invalid_argument
/// naming the key on unknown keys or unparsable values.
void apply_config_key(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Flat hierarchical text: one `section.key = value` per line, '#' comments.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

/// Canonical re-parseable echo of the effective configuration.
std::string echo_config(const ExperimentConfig& config);

}  // namespace rrh
