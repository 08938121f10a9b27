#include "rrh/instruments.hpp"

#include <algorithm>

namespace rrh {

const char* to_string(BarrierKind kind) {
    return kind == BarrierKind::knock_in ? "knock_in" : "knock_out";
}

BarrierKind barrier_kind_from_string(const std::string& s) {
    if (s == "knock_in") return BarrierKind::knock_in;
    if (s == "knock_out") return BarrierKind::knock_out;
    throw std::invalid_argument("unknown barrier kind: " + s);
}

void BarrierOptionSpec::validate() const {
    if (!(strike > 0.0) || !std::isfinite(strike)) {
        throw std::invalid_argument("BarrierOptionSpec: strike must be positive");
    }
    if (!(barrier > 0.0) || barrier >= strike) {
        throw std::invalid_argument("BarrierOptionSpec: requires 0 < barrier < strike");
    }
    if (!(maturity > 0.0)) throw std::invalid_argument("BarrierOptionSpec: maturity must be positive");
}

double payoff(const BarrierOptionSpec& spec, double terminal_price, double path_min) {
    const double vanilla = std::max(terminal_price - spec.strike, 0.0);
    const bool hit = barrier_hit(path_min, spec.barrier);
    if (spec.kind == BarrierKind::knock_in) return hit ? vanilla : 0.0;
    return hit ? 0.0 : vanilla;
}

namespace {

double d_plus(double S, double K, double sigma, double tau) {
    return (std::log(S / K) + 0.5 * sigma * sigma * tau) / (sigma * std::sqrt(tau));
}

}  // namespace

double bs_call_price(double S, double K, double sigma, double tau) {
    if (!(S > 0.0) || !(K > 0.0)) throw std::invalid_argument("bs_call_price: S, K must be positive");
    if (sigma < 0.0) throw std::invalid_argument("bs_call_price: sigma must be nonnegative");
    if (tau < 0.0) throw std::invalid_argument("bs_call_price: tau must be nonnegative");
    if (sigma == 0.0 || tau == 0.0) return std::max(S - K, 0.0);
    const double dp = d_plus(S, K, sigma, tau);
    const double dm = dp - sigma * std::sqrt(tau);
    return S * norm_cdf(dp) - K * norm_cdf(dm);
}

double bs_call_delta(double S, double K, double sigma, double tau) {
    if (!(S > 0.0) || !(K > 0.0)) throw std::invalid_argument("bs_call_delta: S, K must be positive");
    if (sigma < 0.0) throw std::invalid_argument("bs_call_delta: sigma must be nonnegative");
    if (tau < 0.0) throw std::invalid_argument("bs_call_delta: tau must be nonnegative");
    if (sigma == 0.0 || tau == 0.0) return S > K ? 1.0 : (S < K ? 0.0 : 0.5);
    return norm_cdf(d_plus(S, K, sigma, tau));
}

double bs_barrier_price(const BarrierOptionSpec& spec, double S, double sigma, double tau,
                        bool breached) {
    spec.validate();
    if (!(S > 0.0)) throw std::invalid_argument("bs_barrier_price: S must be positive");
    if (breached) {
        return spec.kind == BarrierKind::knock_in ? bs_call_price(S, spec.strike, sigma, tau) : 0.0;
    }
    if (S <= spec.barrier) {
        throw std::domain_error("bs_barrier_price: S <= barrier requires breached=true");
    }
    const double B = spec.barrier;
    const double knock_in = (S / B) * bs_call_price(B * B / S, spec.strike, sigma, tau);
    if (spec.kind == BarrierKind::knock_in) return knock_in;
    return bs_call_price(S, spec.strike, sigma, tau) - knock_in;
}

double bs_barrier_delta(const BarrierOptionSpec& spec, double S, double sigma, double tau,
                        bool breached) {
    spec.validate();
    if (!(S > 0.0)) throw std::invalid_argument("bs_barrier_delta: S must be positive");
    if (breached) {
        return spec.kind == BarrierKind::knock_in ? bs_call_delta(S, spec.strike, sigma, tau) : 0.0;
    }
    if (S <= spec.barrier) {
        throw std::domain_error("bs_barrier_delta: S <= barrier requires breached=true");
    }
    const double B = spec.barrier;
    const double reflected = B * B / S;
    const double delta_in = (1.0 / B) * bs_call_price(reflected, spec.strike, sigma, tau) -
                            (B / S) * bs_call_delta(reflected, spec.strike, sigma, tau);
    if (spec.kind == BarrierKind::knock_in) return delta_in;
    return bs_call_delta(S, spec.strike, sigma, tau) - delta_in;
}

SigmaMatch match_bs_sigma(const PathBatch& batch) {
    const std::size_t n = batch.n_paths();
    if (n < 2) throw std::invalid_argument("match_bs_sigma: need at least 2 paths");
    const std::size_t last = batch.prices.cols() - 1;
    double mean = 0.0;
    for (std::size_t p = 0; p < n; ++p) mean += std::log(batch.prices(p, last));
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        const double d = std::log(batch.prices(p, last)) - mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(n - 1);
    if (var == 0.0) return {0.0, true};
    return {std::sqrt(var / batch.grid.maturity), false};
}

Matrix bs_hedge_rollout(const BarrierOptionSpec& spec, const PathBatch& batch, double sigma) {
    spec.validate();
    const int n_trades = batch.grid.n_trading_times();
    const int stride = batch.grid.trade_every;
    const double T = batch.grid.maturity;
    Matrix holdings(batch.n_paths(), static_cast<std::size_t>(n_trades));
    for (std::size_t p = 0; p < batch.n_paths(); ++p) {
        const double* price = batch.prices.row(p);
        double running_min = price[0];
        int step = 0;
        for (int i = 0; i < n_trades; ++i) {
            const int target = i * stride;
            for (; step <= target; ++step) running_min = std::min(running_min, price[step]);
            const double S = price[target];
            const double tau = T - batch.grid.trading_time(i);
            const bool hit = barrier_hit(running_min, spec.barrier);
            holdings(p, static_cast<std::size_t>(i)) = bs_barrier_delta(spec, S, sigma, tau, hit);
        }
    }
    return holdings;
}

}  // namespace rrh
