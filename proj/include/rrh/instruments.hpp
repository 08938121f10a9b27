#pragma once

#include "rrh/common.hpp"
#include "rrh/market_sim.hpp"

namespace rrh {

enum class BarrierKind { knock_in, knock_out };

const char* to_string(BarrierKind kind);
BarrierKind barrier_kind_from_string(const std::string& s);

/// Down-barrier call: strike K above barrier B.
struct BarrierOptionSpec {
    BarrierKind kind = BarrierKind::knock_in;
    double strike = 10.0;
    double barrier = 8.5;
    double maturity = 1.0;

    void validate() const;
    bool operator==(const BarrierOptionSpec&) const = default;
};

/// Whether the barrier counts as hit. A touch (min == B) counts as a hit for
/// both option types, so in/out payoff parity holds pathwise.
inline bool barrier_hit(double path_min, double barrier) { return path_min <= barrier; }

/// Knock-in pays (S_T-K)+ iff the fine-grid minimum hit the barrier,
/// knock-out pays it iff the minimum stayed above.
double payoff(const BarrierOptionSpec& spec, double terminal_price, double path_min);

/// Zero-rate Black-Scholes call. Degenerates to (S-K)+ at tau=0 or sigma=0.
double bs_call_price(double S, double K, double sigma, double tau);

/// Phi(d+): the vanilla call delta at zero rates.
double bs_call_delta(double S, double K, double sigma, double tau);

/// Reflection-principle barrier prices. Pre-hit requires S > B:
///   knock-in  = (S/B) C_BS(B^2/S, K),  knock-out = C_BS(S,K) - knock-in.
/// Post-hit the knock-in is a vanilla call and the knock-out is worthless.
double bs_barrier_price(const BarrierOptionSpec& spec, double S, double sigma, double tau,
                        bool breached);

/// Derivative of bs_barrier_price in S. Pre-hit knock-in:
///   (1/B) C_BS(B^2/S, K) - (B/S) Phi(d+(B^2/S, K));
/// knock-out = Phi(d+(S,K)) - knock-in. Post-hit: Phi(d+) / 0.
double bs_barrier_delta(const BarrierOptionSpec& spec, double S, double sigma, double tau,
                        bool breached);

/// Variance-matched Black-Scholes volatility: stdev(log S_T) / sqrt(T).
/// degenerate is set (and sigma = 0) when all terminal prices coincide.
struct SigmaMatch {
    double sigma = 0.0;
    bool degenerate = false;
};
SigmaMatch match_bs_sigma(const PathBatch& batch);

/// Benchmark delta-hedge holdings, one column per trading time: the barrier
/// delta evaluated at the trading-time price with tau = T - t_i and the hit
/// state taken from the fine-grid running minimum. Unclipped.
Matrix bs_hedge_rollout(const BarrierOptionSpec& spec, const PathBatch& batch, double sigma);

}  // namespace rrh
