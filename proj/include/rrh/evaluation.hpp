#pragma once

#include <string>
#include <vector>

#include "rrh/training.hpp"

namespace rrh {

/// Frozen-strategy statistics on one simulated batch. `reported` is the
/// tail-mean convention (-risk) that matches the paper's signed CVaR numbers;
/// `risk` is the internal lower-is-better value the optimiser minimises.
struct EvaluationReport {
    std::string strategy_id;
    HestonParams market;
    TimeGrid grid;
    BarrierOptionSpec option;
    TransactionCostSpec cost;
    int n_paths = 0;
    std::uint64_t seed = 0;
    double premium = 0.0;
    double risk = 0.0;
    double reported = 0.0;
    double reported_se = 0.0;  // batch-means standard error of `reported`
    double lte = 0.0;
    double ute = 0.0;
    std::vector<double> wealth;
    std::vector<double> total_variation;
    EpisodeBatch episode;
};

/// Per-path total variation of the holdings, sum_i |Delta_i - Delta_{i-1}|
/// with Delta_{-1} = 0.
std::vector<double> total_variation(const EpisodeBatch& episode);

/// Freeze the policy, simulate under the (possibly overridden) market, roll
/// out, and compute all statistics. LTE/UTE use the supplied alpha/beta.
EvaluationReport evaluate_policy(const MLPParams& policy, const HedgingProblem& problem,
                                 const DistortionSpec& gamma, const UtilitySpec& utility,
                                 double tail_alpha, double tail_beta, int n_paths,
                                 std::uint64_t seed, double premium = 0.0,
                                 const std::string& strategy_id = "policy");

/// Same statistics for the Black-Scholes benchmark deltas at the matched
/// volatility, with Eq.-3 wealth (costs included).
EvaluationReport evaluate_bs_benchmark(const HedgingProblem& problem, double sigma,
                                       const DistortionSpec& gamma, const UtilitySpec& utility,
                                       double tail_alpha, double tail_beta, int n_paths,
                                       std::uint64_t seed, double premium = 0.0);

/// Variance-matched sigma estimated from a dedicated simulation of the given
/// market; deterministic per (params, grid, n_paths, seed), so one value per
/// seed serves every benchmark.
double matched_sigma_for(const HestonParams& market, const TimeGrid& grid, int n_paths,
                         std::uint64_t seed);

/// Translation pricing: with a report computed at premium 0, the price that
/// moves the reported tail mean to `target` is target - reported. Verifies
/// the translation identity on the shifted sample to 1e-10.
double price_to_target(const EvaluationReport& report_at_zero_premium, const DistortionSpec& gamma,
                       const UtilitySpec& utility, double target);

/// Convenience: CVaR_alpha pricing for a policy checkpoint (identity utility
/// required; that is what makes the measure translation invariant).
double price_to_cvar_target(const MLPParams& policy, const HedgingProblem& problem, double alpha,
                            const UtilitySpec& utility, double target, int n_paths,
                            std::uint64_t seed);

struct SweepRow {
    double p = 0.0;
    double lte = 0.0;
    double ute = 0.0;
    double risk = 0.0;
};

/// Trains one non-robust policy per loss weight p (shared seeds) and records
/// the tail decomposition of the resulting wealth on a shared evaluation
/// batch.
std::vector<SweepRow> phase_sweep(const HedgingProblem& problem, double alpha, double beta,
                                  const std::vector<double>& p_grid, const TrainConfig& config,
                                  const MLPSpec& policy_spec, int eval_paths,
                                  std::uint64_t eval_seed);

/// Midpoint of the adjacent grid pair with the largest UTE increase as p
/// decreases (the detected phase-transition location).
double detect_phase_jump(const std::vector<SweepRow>& rows);

/// Trains the no-option trading problem with holdings clipped to
/// [-bound, bound] and classifies the learned behaviour.
struct LeverageReport {
    enum class Regime { no_trade, full_leverage, mixed };
    double risk = 0.0;
    double reported = 0.0;
    double reported_se = 0.0;
    double median_abs_delta = 0.0;
    double saturation_fraction = 0.0;  // fraction of holdings with |d| > 0.8*bound
    Regime regime = Regime::mixed;
};

LeverageReport leverage_dichotomy_check(double alpha, double beta, double p,
                                        const HestonParams& market, const TimeGrid& grid,
                                        double inventory_bound, const TrainConfig& config,
                                        const MLPSpec& policy_spec, int eval_paths,
                                        std::uint64_t eval_seed);

/// CSV emitters for the schemas the figures are rebuilt from.
void write_pnl_csv(const std::string& path, const std::vector<double>& wealth);
void write_tv_csv(const std::string& path, const std::vector<double>& tv);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

struct PricingRow {
    std::string scheme;
    std::string option;
    double price = 0.0;
    bool has_cvar = false;
    double cvar_reported = 0.0;
};
void write_pricing_csv(const std::string& path, const std::vector<PricingRow>& rows);

}  // namespace rrh
