#include "rrh/hedging_env.hpp"

#include <cstdio>
#include <fstream>

namespace rrh {

void TransactionCostSpec::validate() const {
    if (c < 0.0 || !std::isfinite(c)) {
        throw std::invalid_argument("TransactionCostSpec: c must be nonnegative");
    }
}

int feature_dim(const TransactionCostSpec& cost) { return cost.active() ? 5 : 4; }

namespace {

/// Fine-grid running minimum at a trading step, per path.
std::vector<double> running_min_at_step(const PathBatch& batch, int fine_step) {
    std::vector<double> m(batch.n_paths());
    for (std::size_t p = 0; p < batch.n_paths(); ++p) {
        const double* price = batch.prices.row(p);
        double running = price[0];
        for (int k = 1; k <= fine_step; ++k) running = std::min(running, price[k]);
        m[p] = running;
    }
    return m;
}

void fill_feature_row(double* row, double t_scaled, double price, double run_min, double s0,
                      double barrier, const TransactionCostSpec& cost, double prev_delta) {
    row[0] = t_scaled;
    row[1] = price / s0;
    row[2] = run_min / s0;
    row[3] = barrier_hit(run_min, barrier) ? 1.0 : 0.0;
    if (cost.active()) row[4] = prev_delta;
}

EpisodeBatch make_episode_shell(const PathBatch& batch, const BarrierOptionSpec& option,
                                double premium) {
    const int n_trades = batch.grid.n_trading_times();
    const int stride = batch.grid.trade_every;
    const std::size_t n = batch.n_paths();

    EpisodeBatch ep;
    ep.holdings = Matrix(n, static_cast<std::size_t>(n_trades));
    ep.wealth.assign(n, 0.0);
    ep.costs_paid.assign(n, 0.0);
    ep.trading_prices = Matrix(n, static_cast<std::size_t>(n_trades) + 1);
    ep.terminal_payoff.assign(n, 0.0);
    ep.premium = premium;
    ep.source = &batch;

    for (std::size_t p = 0; p < n; ++p) {
        const double* price = batch.prices.row(p);
        double* tp = ep.trading_prices.row(p);
        for (int i = 0; i <= n_trades; ++i) tp[i] = price[i * stride];
        double path_min = price[0];
        for (int k = 1; k <= batch.grid.n_steps; ++k) path_min = std::min(path_min, price[k]);
        ep.terminal_payoff[p] = payoff(option, price[batch.grid.n_steps], path_min);
    }
    return ep;
}

/// Eq.-3 accumulation given holdings already in place.
void accumulate_wealth(EpisodeBatch& ep, const TransactionCostSpec& cost) {
    const int n_trades = ep.n_trading_times();
    for (std::size_t p = 0; p < ep.n_paths(); ++p) {
        const double* tp = ep.trading_prices.row(p);
        const double* d = ep.holdings.row(p);
        double pnl = 0.0;
        double paid = 0.0;
        double prev = 0.0;
        for (int i = 0; i < n_trades; ++i) {
            pnl += d[i] * (tp[i + 1] - tp[i]);
            paid += cost.c * std::abs(d[i] - prev) * tp[i];
            prev = d[i];
        }
        ep.costs_paid[p] = paid;
        // Premium added last so a premium shift moves each sample bit-exactly.
        ep.wealth[p] = (pnl - paid - ep.terminal_payoff[p]) + ep.premium;
    }
}

}  // namespace

Matrix build_features(const PathBatch& batch, const BarrierOptionSpec& option, int trading_index,
                      const std::vector<double>& prev_delta, const TransactionCostSpec& cost) {
    cost.validate();
    const int n_trades = batch.grid.n_trading_times();
    if (trading_index < 0 || trading_index >= n_trades) {
        throw std::invalid_argument("build_features: trading_index out of range");
    }
    if (cost.active() && prev_delta.size() != batch.n_paths()) {
        throw ContractError("build_features: prev_delta required when costs are active");
    }
    const int fine_step = trading_index * batch.grid.trade_every;
    const auto run_min = running_min_at_step(batch, fine_step);
    const double t_scaled = batch.grid.trading_time(trading_index) / batch.grid.maturity;

    Matrix feats(batch.n_paths(), static_cast<std::size_t>(feature_dim(cost)));
    for (std::size_t p = 0; p < batch.n_paths(); ++p) {
        fill_feature_row(feats.row(p), t_scaled, batch.prices(p, fine_step), run_min[p],
                         batch.params.s0, option.barrier, cost,
                         cost.active() ? prev_delta[p] : 0.0);
    }
    return feats;
}

EpisodeBatch rollout_with_holdings(const PathBatch& batch, const BarrierOptionSpec& option,
                                   const TransactionCostSpec& cost, const Matrix& holdings,
                                   double premium) {
    cost.validate();
    option.validate();
    if (holdings.rows() != batch.n_paths() ||
        holdings.cols() != static_cast<std::size_t>(batch.grid.n_trading_times())) {
        throw ContractError("rollout_with_holdings: holdings shape mismatch");
    }
    EpisodeBatch ep = make_episode_shell(batch, option, premium);
    ep.holdings = holdings;
    accumulate_wealth(ep, cost);
    return ep;
}

PolicyRollout::PolicyRollout(const MLPParams& policy, const PathBatch& batch,
                             const BarrierOptionSpec& option, const TransactionCostSpec& cost,
                             double premium, bool with_grad)
    : policy_(policy), cost_(cost), with_grad_(with_grad) {
    cost_.validate();
    option.validate();
    if (policy_.spec.input_dim != feature_dim(cost_)) {
        throw ContractError("PolicyRollout: policy input_dim does not match feature dimension");
    }
    if (policy_.spec.output_dim != 1) {
        throw ContractError("PolicyRollout: policy must have a single output");
    }

    const int n_trades = batch.grid.n_trading_times();
    const int stride = batch.grid.trade_every;
    const std::size_t n = batch.n_paths();
    episode_ = make_episode_shell(batch, option, premium);
    episode_.features.reserve(static_cast<std::size_t>(n_trades));
    if (with_grad_) caches_.resize(static_cast<std::size_t>(n_trades));

    std::vector<double> run_min(n);
    for (std::size_t p = 0; p < n; ++p) run_min[p] = batch.prices(p, 0);
    std::vector<double> prev_delta(n, 0.0);

    const int dim = feature_dim(cost_);
    for (int i = 0; i < n_trades; ++i) {
        const int fine_step = i * stride;
        for (std::size_t p = 0; p < n; ++p) {
            const double* price = batch.prices.row(p);
            const int from = i == 0 ? 1 : (i - 1) * stride + 1;
            for (int k = from; k <= fine_step; ++k) run_min[p] = std::min(run_min[p], price[k]);
        }
        const double t_scaled = batch.grid.trading_time(i) / batch.grid.maturity;
        Matrix feats(n, static_cast<std::size_t>(dim));
        for (std::size_t p = 0; p < n; ++p) {
            fill_feature_row(feats.row(p), t_scaled, batch.prices(p, fine_step), run_min[p],
                             batch.params.s0, option.barrier, cost_, prev_delta[p]);
        }

        Matrix out = mlp_forward(policy_, feats, with_grad_ ? &caches_[i] : nullptr);
        for (std::size_t p = 0; p < n; ++p) {
            const double d = out(p, 0);
            if (!std::isfinite(d)) {
                throw TrainingError("PolicyRollout: non-finite holding at trading step " +
                                    std::to_string(i));
            }
            episode_.holdings(p, static_cast<std::size_t>(i)) = d;
            prev_delta[p] = d;
        }
        episode_.features.push_back(std::move(feats));
    }

    accumulate_wealth(episode_, cost_);
}

std::vector<double> PolicyRollout::wealth_grad(const std::vector<double>& upstream) const {
    if (!with_grad_) throw ContractError("PolicyRollout: constructed without gradients");
    if (upstream.size() != episode_.n_paths()) {
        throw ContractError("PolicyRollout: upstream size mismatch");
    }
    const int n_trades = episode_.n_trading_times();
    const std::size_t n = episode_.n_paths();
    const double c = cost_.c;

    GradBuffer grad;
    grad.param_grad.assign(policy_.values.size(), 0.0);
    grad.input_grad = Matrix(n, static_cast<std::size_t>(policy_.spec.input_dim));

    Matrix g_delta(n, 1);
    std::vector<double> carry(n, 0.0);  // d wealth / d Delta_i via step i+1's prev_delta feature

    for (int i = n_trades - 1; i >= 0; --i) {
        for (std::size_t p = 0; p < n; ++p) {
            const double* tp = episode_.trading_prices.row(p);
            const double* d = episode_.holdings.row(p);
            const double prev = i == 0 ? 0.0 : d[i - 1];
            double g = (tp[i + 1] - tp[i]) - c * sgn(d[i] - prev) * tp[i];
            if (i + 1 < n_trades) g += c * sgn(d[i + 1] - d[i]) * tp[i + 1];
            g_delta(p, 0) = upstream[p] * g + carry[p];
        }
        std::fill(grad.input_grad.data().begin(), grad.input_grad.data().end(), 0.0);
        mlp_backward(policy_, caches_[static_cast<std::size_t>(i)], g_delta, grad);
        if (cost_.active() && i > 0) {
            for (std::size_t p = 0; p < n; ++p) carry[p] = grad.input_grad(p, 4);
        }
    }
    return grad.param_grad;
}

void write_episode_csv(std::ostream& os, const EpisodeBatch& episode, const TimeGrid& grid) {
    os << "path_id,trading_step,time,price,delta,wealth_terminal\n";
    char buf[160];
    for (std::size_t p = 0; p < episode.n_paths(); ++p) {
        for (int i = 0; i < episode.n_trading_times(); ++i) {
            std::snprintf(buf, sizeof(buf), "%zu,%d,%.17g,%.17g,%.17g,%.17g\n", p, i,
                          grid.trading_time(i), episode.trading_prices(p, i),
                          episode.holdings(p, static_cast<std::size_t>(i)), episode.wealth[p]);
            os << buf;
        }
    }
}

void write_episode_csv(const std::string& path, const EpisodeBatch& episode, const TimeGrid& grid) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_episode_csv(os, episode, grid);
}

}  // namespace rrh
