#include "rrh/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace rrh {

std::vector<double> total_variation(const EpisodeBatch& episode) {
    std::vector<double> tv(episode.n_paths(), 0.0);
    for (std::size_t p = 0; p < episode.n_paths(); ++p) {
        const double* d = episode.holdings.row(p);
        double prev = 0.0;
        double acc = 0.0;
        for (int i = 0; i < episode.n_trading_times(); ++i) {
            acc += std::abs(d[i] - prev);
            prev = d[i];
        }
        tv[p] = acc;
    }
    return tv;
}

namespace {

double batch_means_se(const std::vector<double>& wealth, const DistortionSpec& gamma,
                      const UtilitySpec& utility) {
    const std::size_t n = wealth.size();
    const std::size_t n_blocks = std::min<std::size_t>(20, n / 2);
    if (n_blocks < 2) return 0.0;
    std::vector<double> block_vals;
    block_vals.reserve(n_blocks);
    const std::size_t block = n / n_blocks;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        std::vector<double> slice(wealth.begin() + b * block, wealth.begin() + (b + 1) * block);
        block_vals.push_back(-rdeu_empirical(EmpiricalDistribution(std::move(slice)), gamma, utility));
    }
    double mean = 0.0;
    for (double v : block_vals) mean += v;
    mean /= static_cast<double>(n_blocks);
    double ss = 0.0;
    for (double v : block_vals) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n_blocks - 1));
    return sd / std::sqrt(static_cast<double>(n_blocks));
}

EvaluationReport report_from_episode(EpisodeBatch episode, const std::string& strategy_id,
                                     const HedgingProblem& problem, const DistortionSpec& gamma,
                                     const UtilitySpec& utility, double tail_alpha,
                                     double tail_beta, int n_paths, std::uint64_t seed,
                                     double premium) {
    EvaluationReport rep;
    rep.strategy_id = strategy_id;
    rep.market = problem.market;
    rep.grid = problem.grid;
    rep.option = problem.option;
    rep.cost = problem.cost;
    rep.n_paths = n_paths;
    rep.seed = seed;
    rep.premium = premium;
    rep.wealth = episode.wealth;
    rep.total_variation = total_variation(episode);

    EmpiricalDistribution dist(rep.wealth);
    rep.risk = rdeu_empirical(dist, gamma, utility);
    rep.reported = -rep.risk;
    rep.reported_se = batch_means_se(rep.wealth, gamma, utility);
    const TailPair tails = tail_expectations(dist, tail_alpha, tail_beta);
    rep.lte = tails.lower;
    rep.ute = tails.upper;
    episode.source = nullptr;  // the batch dies with this scope
    rep.episode = std::move(episode);
    return rep;
}

}  // namespace

EvaluationReport evaluate_policy(const MLPParams& policy, const HedgingProblem& problem,
                                 const DistortionSpec& gamma, const UtilitySpec& utility,
                                 double tail_alpha, double tail_beta, int n_paths,
                                 std::uint64_t seed, double premium,
                                 const std::string& strategy_id) {
    problem.validate();
    const PathBatch batch = simulate_heston(problem.market, problem.grid, n_paths, seed);
    PolicyRollout rollout(policy, batch, problem.option, problem.cost, premium, false);
    return report_from_episode(rollout.release_episode(), strategy_id, problem, gamma, utility,
                               tail_alpha, tail_beta, n_paths, seed, premium);
}

EvaluationReport evaluate_bs_benchmark(const HedgingProblem& problem, double sigma,
                                       const DistortionSpec& gamma, const UtilitySpec& utility,
                                       double tail_alpha, double tail_beta, int n_paths,
                                       std::uint64_t seed, double premium) {
    problem.validate();
    const PathBatch batch = simulate_heston(problem.market, problem.grid, n_paths, seed);
    const Matrix holdings = bs_hedge_rollout(problem.option, batch, sigma);
    EpisodeBatch episode = rollout_with_holdings(batch, problem.option, problem.cost, holdings, premium);
    return report_from_episode(std::move(episode), "bs_delta", problem, gamma, utility, tail_alpha,
                               tail_beta, n_paths, seed, premium);
}

double matched_sigma_for(const HestonParams& market, const TimeGrid& grid, int n_paths,
                         std::uint64_t seed) {
    const PathBatch batch = simulate_heston(market, grid, n_paths, seed);
    const SigmaMatch match = match_bs_sigma(batch);
    if (match.degenerate) throw std::domain_error("matched_sigma_for: degenerate terminal prices");
    return match.sigma;
}

double price_to_target(const EvaluationReport& report, const DistortionSpec& gamma,
                       const UtilitySpec& utility, double target) {
    if (utility.kind != UtilitySpec::Kind::identity) {
        throw ContractError("price_to_target: translation pricing requires the identity utility");
    }
    if (report.premium != 0.0) {
        throw ContractError("price_to_target: report must be computed at zero premium");
    }
    const double price = target - report.reported;
    // Translation identity check on the shifted sample.
    std::vector<double> shifted = report.wealth;
    for (double& w : shifted) w += price;
    const double achieved = -rdeu_empirical(EmpiricalDistribution(std::move(shifted)), gamma, utility);
    if (std::abs(achieved - target) > 1e-10) {
        throw std::logic_error("price_to_target: translation identity violated");
    }
    return price;
}

double price_to_cvar_target(const MLPParams& policy, const HedgingProblem& problem, double alpha,
                            const UtilitySpec& utility, double target, int n_paths,
                            std::uint64_t seed) {
    const DistortionSpec gamma = DistortionSpec::cvar(alpha);
    const EvaluationReport rep =
        evaluate_policy(policy, problem, gamma, utility, alpha, 0.9, n_paths, seed, 0.0);
    return price_to_target(rep, gamma, utility, target);
}

std::vector<SweepRow> phase_sweep(const HedgingProblem& problem, double alpha, double beta,
                                  const std::vector<double>& p_grid, const TrainConfig& config,
                                  const MLPSpec& policy_spec, int eval_paths,
                                  std::uint64_t eval_seed) {
    std::vector<SweepRow> rows;
    rows.reserve(p_grid.size());
    const UtilitySpec utility = UtilitySpec::identity();
    for (double p : p_grid) {
        const DistortionSpec gamma = DistortionSpec::alpha_beta(alpha, beta, p);
        const TrainResult trained = train_nonrobust(config, problem, gamma, utility, policy_spec);
        const EvaluationReport rep = evaluate_policy(trained.policy, problem, gamma, utility, alpha,
                                                     beta, eval_paths, eval_seed, 0.0);
        rows.push_back({p, rep.lte, rep.ute, rep.risk});
    }
    return rows;
}

double detect_phase_jump(const std::vector<SweepRow>& rows) {
    if (rows.size() < 2) throw std::invalid_argument("detect_phase_jump: need >= 2 sweep rows");
    std::vector<SweepRow> sorted = rows;
    std::sort(sorted.begin(), sorted.end(),
              [](const SweepRow& a, const SweepRow& b) { return a.p < b.p; });
    double best_jump = -std::numeric_limits<double>::infinity();
    double location = sorted.front().p;
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
        const double jump = sorted[k].ute - sorted[k + 1].ute;  // UTE gained moving down in p
        if (jump > best_jump) {
            best_jump = jump;
            location = 0.5 * (sorted[k].p + sorted[k + 1].p);
        }
    }
    return location;
}

LeverageReport leverage_dichotomy_check(double alpha, double beta, double p,
                                        const HestonParams& market, const TimeGrid& grid,
                                        double inventory_bound, const TrainConfig& config,
                                        const MLPSpec& policy_spec, int eval_paths,
                                        std::uint64_t eval_seed) {
    if (!(inventory_bound > 0.0)) {
        throw std::invalid_argument("leverage_dichotomy_check: bound must be positive");
    }
    // Strike far above any simulated price: the embedded option pays exactly
    // zero, leaving the pure trading problem.
    HedgingProblem problem;
    problem.market = market;
    problem.grid = grid;
    problem.option = BarrierOptionSpec{BarrierKind::knock_in, 1e9, 8.5, grid.maturity};
    problem.cost = TransactionCostSpec{0.0};

    MLPSpec spec = policy_spec;
    spec.output_activation = OutputActivation::tanh_scaled;
    spec.bound = inventory_bound;

    const DistortionSpec gamma = DistortionSpec::alpha_beta(alpha, beta, p);
    const UtilitySpec utility = UtilitySpec::identity();
    const TrainResult trained = train_nonrobust(config, problem, gamma, utility, spec);
    const EvaluationReport rep =
        evaluate_policy(trained.policy, problem, gamma, utility, alpha, beta, eval_paths, eval_seed);

    LeverageReport out;
    out.risk = rep.risk;
    out.reported = rep.reported;
    out.reported_se = rep.reported_se;

    std::vector<double> abs_d;
    abs_d.reserve(rep.episode.holdings.data().size());
    std::size_t saturated = 0;
    for (double d : rep.episode.holdings.data()) {
        abs_d.push_back(std::abs(d));
        if (std::abs(d) > 0.8 * inventory_bound) ++saturated;
    }
    std::nth_element(abs_d.begin(), abs_d.begin() + abs_d.size() / 2, abs_d.end());
    out.median_abs_delta = abs_d[abs_d.size() / 2];
    out.saturation_fraction = static_cast<double>(saturated) / static_cast<double>(abs_d.size());

    const bool risk_near_zero = std::abs(out.reported) <= std::max(3.0 * out.reported_se, 0.02);
    if (risk_near_zero && out.median_abs_delta <= 0.3 * inventory_bound) {
        out.regime = LeverageReport::Regime::no_trade;
    } else if (out.median_abs_delta >= 0.6 * inventory_bound) {
        out.regime = LeverageReport::Regime::full_leverage;
    } else {
        out.regime = LeverageReport::Regime::mixed;
    }
    return out;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    return os;
}

}  // namespace

void write_pnl_csv(const std::string& path, const std::vector<double>& wealth) {
    auto os = open_out(path);
    os << "path_id,wealth\n";
    char buf[64];
    for (std::size_t i = 0; i < wealth.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, wealth[i]);
        os << buf;
    }
}

void write_tv_csv(const std::string& path, const std::vector<double>& tv) {
    auto os = open_out(path);
    os << "path_id,total_variation\n";
    char buf[64];
    for (std::size_t i = 0; i < tv.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, tv[i]);
        os << buf;
    }
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    auto os = open_out(path);
    os << "p,lte,ute,risk\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", r.p, r.lte, r.ute, r.risk);
        os << buf;
    }
}

void write_pricing_csv(const std::string& path, const std::vector<PricingRow>& rows) {
    auto os = open_out(path);
    os << "scheme,option,price,cvar_reported\n";
    char buf[128];
    for (const auto& r : rows) {
        if (r.has_cvar) {
            std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g\n", r.scheme.c_str(),
                          r.option.c_str(), r.price, r.cvar_reported);
        } else {
            std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,\n", r.scheme.c_str(), r.option.c_str(),
                          r.price);
        }
        os << buf;
    }
}

}  // namespace rrh
