#pragma once

#include <iosfwd>
#include <vector>

#include "rrh/instruments.hpp"
#include "rrh/market_sim.hpp"
#include "rrh/nn.hpp"

namespace rrh {

/// Proportional transaction cost: trading q shares at price S costs c*S*|q|.
struct TransactionCostSpec {
    double c = 0.0;

    void validate() const;
    bool active() const { return c > 0.0; }
};

/// Policy inputs at a trading time: {t/T, S_t/S0, M_t/S0, hit indicator} and,
/// when costs are active, the previous holding (raw). M_t is the fine-grid
/// running minimum up to the trading step.
int feature_dim(const TransactionCostSpec& cost);

/// One feature row per path for trading index i. prev_delta must have one
/// entry per path when costs are active (pass {} otherwise).
Matrix build_features(const PathBatch& batch, const BarrierOptionSpec& option, int trading_index,
                      const std::vector<double>& prev_delta, const TransactionCostSpec& cost);

/// Holdings, terminal wealth and cost per path for one batch of episodes.
/// Wealth follows
///   X = V0 + sum_i Delta_i (S_{i+1} - S_i) - sum_i c |Delta_i - Delta_{i-1}| S_i - V_N
/// over the trading grid, with Delta_{-1} = 0, no terminal unwind, and V_N
/// the barrier payoff monitored on the full fine grid.
struct EpisodeBatch {
    Matrix holdings;                 // n_paths x n_trading_times
    std::vector<double> wealth;      // per path
    std::vector<double> costs_paid;  // per path
    Matrix trading_prices;           // n_paths x (n_trading_times+1), last column = S_T
    std::vector<double> terminal_payoff;
    std::vector<Matrix> features;    // per trading step; filled by policy rollouts
    double premium = 0.0;
    const PathBatch* source = nullptr;

    std::size_t n_paths() const { return holdings.rows(); }
    int n_trading_times() const { return static_cast<int>(holdings.cols()); }
};

/// Wealth for externally supplied holdings (benchmark deltas, forced
/// strategies in tests).
EpisodeBatch rollout_with_holdings(const PathBatch& batch, const BarrierOptionSpec& option,
                                   const TransactionCostSpec& cost, const Matrix& holdings,
                                   double premium);

/// Runs the policy over a path batch and keeps enough state to differentiate
/// each path's terminal wealth with respect to the policy parameters. With
/// costs active the previous holding is a feature, so the backward pass
/// propagates through time.
class PolicyRollout {
public:
    PolicyRollout(const MLPParams& policy, const PathBatch& batch, const BarrierOptionSpec& option,
                  const TransactionCostSpec& cost, double premium, bool with_grad);

    const EpisodeBatch& episode() const { return episode_; }
    EpisodeBatch release_episode() { return std::move(episode_); }
    const MLPParams& policy() const { return policy_; }
    bool with_grad() const { return with_grad_; }

    /// Gradient of sum_j upstream[j] * wealth[j] with respect to the policy
    /// parameters. Requires construction with with_grad = true.
    std::vector<double> wealth_grad(const std::vector<double>& upstream) const;

private:
    MLPParams policy_;
    TransactionCostSpec cost_;
    bool with_grad_;
    EpisodeBatch episode_;
    std::vector<ForwardCache> caches_;  // one per trading step
};

/// CSV with header path_id,trading_step,time,price,delta,wealth_terminal.
void write_episode_csv(std::ostream& os, const EpisodeBatch& episode, const TimeGrid& grid);
void write_episode_csv(const std::string& path, const EpisodeBatch& episode, const TimeGrid& grid);

}  // namespace rrh
