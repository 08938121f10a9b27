#include "rrh/training.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace rrh {

void TrainConfig::validate() const {
    if (batch_size < 32) throw std::invalid_argument("TrainConfig: batch_size must be >= 32");
    if (iterations < 1) throw std::invalid_argument("TrainConfig: iterations must be >= 1");
    if (!(lr_policy > 0.0) || !(lr_adversary > 0.0)) {
        throw std::invalid_argument("TrainConfig: learning rates must be positive");
    }
}

void RobustConfig::validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("RobustConfig: epsilon must be positive");
    if (!(order >= 1.0)) throw std::invalid_argument("RobustConfig: order must be >= 1");
    if (lambda < 0.0) throw std::invalid_argument("RobustConfig: lambda must be nonnegative");
    if (!(mu > 0.0)) throw std::invalid_argument("RobustConfig: mu must be positive");
    if (!(mu_growth > 1.0)) throw std::invalid_argument("RobustConfig: mu_growth must exceed 1");
    if (inner_steps < 0 || outer_steps < 1) {
        throw std::invalid_argument("RobustConfig: invalid step counts");
    }
}

void HedgingProblem::validate() const {
    market.validate();
    grid.validate();
    option.validate();
    cost.validate();
}

double l2_norm(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

AdversarySample make_adversary_sample(std::vector<double> x_phi, std::vector<double> x_theta) {
    if (x_phi.size() != x_theta.size() || x_phi.empty()) {
        throw ContractError("make_adversary_sample: sample size mismatch");
    }
    const std::size_t n = x_phi.size();
    std::vector<std::uint32_t> order_phi(n), order_theta(n);
    std::iota(order_phi.begin(), order_phi.end(), 0u);
    std::iota(order_theta.begin(), order_theta.end(), 0u);
    std::stable_sort(order_phi.begin(), order_phi.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x_phi[a] < x_phi[b]; });
    std::stable_sort(order_theta.begin(), order_theta.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x_theta[a] < x_theta[b]; });

    AdversarySample sample;
    sample.partner_of_theta.resize(n);
    sample.partner_of_phi.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        sample.partner_of_theta[order_theta[r]] = x_phi[order_phi[r]];
        sample.partner_of_phi[order_phi[r]] = x_theta[order_theta[r]];
    }
    sample.x_phi = std::move(x_phi);
    sample.x_theta = std::move(x_theta);
    return sample;
}

KernelGradientScheme::KernelGradientScheme(const std::vector<double>& samples) : x_(samples) {
    const std::size_t n = x_.size();
    if (n < 2) throw std::invalid_argument("KernelGradientScheme: need >= 2 samples");
    EmpiricalDistribution dist(x_);
    const Bandwidth bw = silverman_half_bandwidth(dist);
    h_ = bw.h;
    degenerate_ = bw.degenerate;
    if (degenerate_) return;

    cdf_.assign(n, 0.0);
    weight_sum_.assign(n, 0.0);
    // Cache the kernel matrix when it fits comfortably (w_ij is reused by
    // every coefficients() call); above the cap recompute on the fly.
    cached_ = n <= 4096;
    if (cached_) weights_ = Matrix(n, n);

    const double inv_h = 1.0 / h_;
    parallel_for_blocks(n, [&](std::size_t, BlockRange r) {
        for (std::size_t i = r.begin; i < r.end; ++i) {
            double cdf_acc = 0.0;
            double w_acc = 0.0;
            double* w_row = cached_ ? weights_.row(i) : nullptr;
            for (std::size_t j = 0; j < n; ++j) {
                const double z = (x_[i] - x_[j]) * inv_h;
                const double w = std::exp(-0.5 * z * z);
                cdf_acc += norm_cdf(z);
                w_acc += w;
                if (w_row) w_row[j] = w;
            }
            cdf_[i] = cdf_acc / static_cast<double>(n);
            weight_sum_[i] = w_acc;
        }
    });
}

std::vector<double> KernelGradientScheme::coefficients(const std::vector<double>& integrand) const {
    const std::size_t n = x_.size();
    if (integrand.size() != n) throw ContractError("KernelGradientScheme: integrand size mismatch");
    std::vector<double> coeff(n, 0.0);
    if (degenerate_) return coeff;

    std::vector<double> scaled(n);
    for (std::size_t i = 0; i < n; ++i) scaled[i] = integrand[i] / weight_sum_[i];

    const double inv_n = 1.0 / static_cast<double>(n);
    const double inv_h = 1.0 / h_;
    parallel_for_blocks(n, [&](std::size_t, BlockRange r) {
        for (std::size_t j = r.begin; j < r.end; ++j) {
            double acc = 0.0;
            if (cached_) {
                // w_ij symmetric: read row j.
                const double* w_row = weights_.row(j);
                for (std::size_t i = 0; i < n; ++i) acc += scaled[i] * w_row[i];
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    const double z = (x_[i] - x_[j]) * inv_h;
                    acc += scaled[i] * std::exp(-0.5 * z * z);
                }
            }
            coeff[j] = -inv_n * acc;
        }
    });
    return coeff;
}

GradientResult nonrobust_gradient(const PolicyRollout& rollout, const DistortionSpec& gamma,
                                  const UtilitySpec& utility) {
    const std::vector<double>& wealth = rollout.episode().wealth;
    KernelGradientScheme scheme(wealth);
    if (scheme.degenerate()) {
        return {std::vector<double>(rollout.policy().values.size(), 0.0), true};
    }
    const std::size_t n = wealth.size();
    std::vector<double> integrand(n);
    for (std::size_t i = 0; i < n; ++i) {
        integrand[i] = utility.derivative(wealth[i]) * gamma_weight(scheme.cdf_at_samples()[i], gamma);
    }
    return {rollout.wealth_grad(scheme.coefficients(integrand)), false};
}

double penalty_c(const std::vector<double>& x_theta, const std::vector<double>& x_phi,
                 const RobustConfig& robust) {
    robust.validate();
    const double d = wasserstein_p(EmpiricalDistribution(x_theta), EmpiricalDistribution(x_phi),
                                   robust.order);
    return std::max(0.0, std::pow(d, robust.order) - std::pow(robust.epsilon, robust.order));
}

double lambda_effective(const std::vector<double>& x_theta, const std::vector<double>& x_phi,
                        const RobustConfig& robust) {
    const double d = wasserstein_p(EmpiricalDistribution(x_theta), EmpiricalDistribution(x_phi),
                                   robust.order);
    if (!(d > robust.epsilon)) return 0.0;
    const double c = std::pow(d, robust.order) - std::pow(robust.epsilon, robust.order);
    return robust.lambda + robust.mu * c;
}

namespace {

/// |X - Xc|^(p-1) sgn(X - Xc) scaled by p, per sample.
std::vector<double> transport_integrand(const std::vector<double>& x,
                                        const std::vector<double>& partner, double order) {
    std::vector<double> t(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double diff = x[i] - partner[i];
        const double mag = order == 1.0 ? 1.0 : std::pow(std::abs(diff), order - 1.0);
        t[i] = order * mag * sgn(diff);
    }
    return t;
}

/// Shared body of the two inner-gradient flavours; penalty_sign = +1 gives
/// the Lagrangian gradient, -1 the constrained-ascent objective.
GradientResult inner_gradient_impl(const AdversarySample& sample, const MLPParams& adversary,
                                   const ForwardCache& adv_cache, const DistortionSpec& gamma,
                                   const UtilitySpec& utility, const RobustConfig& robust,
                                   double penalty_sign) {
    robust.validate();
    KernelGradientScheme scheme(sample.x_theta);
    if (scheme.degenerate()) {
        return {std::vector<double>(adversary.values.size(), 0.0), true};
    }
    const std::size_t n = sample.x_theta.size();
    const double lam = lambda_effective(sample.x_theta, sample.x_phi, robust);
    std::vector<double> integrand(n);
    const auto transport = transport_integrand(sample.x_theta, sample.partner_of_theta, robust.order);
    for (std::size_t i = 0; i < n; ++i) {
        const double risk_term =
            utility.derivative(sample.x_theta[i]) * gamma_weight(scheme.cdf_at_samples()[i], gamma);
        integrand[i] = risk_term - penalty_sign * lam * transport[i];
    }
    const auto upstream = scheme.coefficients(integrand);

    Matrix upstream_m(n, 1);
    for (std::size_t i = 0; i < n; ++i) upstream_m(i, 0) = upstream[i];
    GradBuffer grad;
    mlp_backward(adversary, adv_cache, upstream_m, grad);
    return {std::move(grad.param_grad), false};
}

GradientResult outer_gradient_impl(const AdversarySample& sample, const PolicyRollout& rollout,
                                   const MLPParams& adversary, const ForwardCache& adv_cache,
                                   const DistortionSpec& gamma, const UtilitySpec& utility,
                                   const RobustConfig& robust, double penalty_sign) {
    robust.validate();
    KernelGradientScheme theta_scheme(sample.x_theta);
    KernelGradientScheme phi_scheme(sample.x_phi);
    if (theta_scheme.degenerate() || phi_scheme.degenerate()) {
        return {std::vector<double>(rollout.policy().values.size(), 0.0), true};
    }
    const std::size_t n = sample.x_theta.size();
    const double lam = lambda_effective(sample.x_theta, sample.x_phi, robust);

    // Route through F_theta: coefficients on grad_phi x_theta_j.
    std::vector<double> theta_integrand(n);
    const auto transport_theta =
        transport_integrand(sample.x_theta, sample.partner_of_theta, robust.order);
    for (std::size_t i = 0; i < n; ++i) {
        const double risk_term = utility.derivative(sample.x_theta[i]) *
                                 gamma_weight(theta_scheme.cdf_at_samples()[i], gamma);
        theta_integrand[i] = risk_term - penalty_sign * lam * transport_theta[i];
    }
    const auto theta_coeff = theta_scheme.coefficients(theta_integrand);

    // Chain through the adversary: upstream on x_theta becomes upstream on
    // x_phi via the adversary's input gradient.
    Matrix theta_upstream(n, 1);
    for (std::size_t i = 0; i < n; ++i) theta_upstream(i, 0) = theta_coeff[i];
    GradBuffer adv_grad;
    mlp_backward(adversary, adv_cache, theta_upstream, adv_grad);

    std::vector<double> rollout_upstream(n);
    for (std::size_t i = 0; i < n; ++i) rollout_upstream[i] = adv_grad.input_grad(i, 0);

    // Route through G_phi: the penalty's direct dependence on x_phi.
    if (lam != 0.0) {
        const auto transport_phi =
            transport_integrand(sample.partner_of_phi, sample.x_phi, robust.order);
        std::vector<double> phi_integrand(n);
        for (std::size_t i = 0; i < n; ++i) {
            phi_integrand[i] = penalty_sign * lam * transport_phi[i];
        }
        const auto phi_coeff = phi_scheme.coefficients(phi_integrand);
        for (std::size_t i = 0; i < n; ++i) rollout_upstream[i] += phi_coeff[i];
    }

    return {rollout.wealth_grad(rollout_upstream), false};
}

}  // namespace

GradientResult inner_gradient(const AdversarySample& sample, const MLPParams& adversary,
                              const ForwardCache& adv_cache, const DistortionSpec& gamma,
                              const UtilitySpec& utility, const RobustConfig& robust) {
    return inner_gradient_impl(sample, adversary, adv_cache, gamma, utility, robust, +1.0);
}

GradientResult inner_objective_gradient(const AdversarySample& sample, const MLPParams& adversary,
                                        const ForwardCache& adv_cache, const DistortionSpec& gamma,
                                        const UtilitySpec& utility, const RobustConfig& robust) {
    return inner_gradient_impl(sample, adversary, adv_cache, gamma, utility, robust, -1.0);
}

GradientResult outer_gradient(const AdversarySample& sample, const PolicyRollout& rollout,
                              const MLPParams& adversary, const ForwardCache& adv_cache,
                              const DistortionSpec& gamma, const UtilitySpec& utility,
                              const RobustConfig& robust) {
    return outer_gradient_impl(sample, rollout, adversary, adv_cache, gamma, utility, robust, +1.0);
}

std::uint64_t train_sim_seed(std::uint64_t seed, int outer_iteration) {
    return mix_seed(seed, 0x100000000ULL + static_cast<std::uint64_t>(outer_iteration));
}

std::uint64_t inner_sim_seed(std::uint64_t seed, int cycle) {
    return mix_seed(seed, 0x200000000ULL + static_cast<std::uint64_t>(cycle));
}

std::uint64_t policy_init_seed(std::uint64_t seed) { return mix_seed(seed, 0xF1); }

std::uint64_t adversary_init_seed(std::uint64_t seed) { return mix_seed(seed, 0xF2); }

TrainResult train_nonrobust(const TrainConfig& config, const HedgingProblem& problem,
                            const DistortionSpec& gamma, const UtilitySpec& utility,
                            const MLPSpec& policy_spec) {
    config.validate();
    problem.validate();
    policy_spec.validate();
    if (policy_spec.input_dim != feature_dim(problem.cost)) {
        throw ContractError("train_nonrobust: policy input_dim does not match feature dimension");
    }

    TrainResult result;
    result.policy = init_mlp(policy_spec, policy_init_seed(config.seed));
    AdamState adam(config.lr_policy);

    std::optional<PathBatch> fixed;
    if (!config.resimulate_per_batch) {
        fixed = simulate_heston(problem.market, problem.grid, config.batch_size,
                                train_sim_seed(config.seed, 0));
    }

    for (int it = 0; it < config.iterations; ++it) {
        const PathBatch batch =
            fixed ? *fixed
                  : simulate_heston(problem.market, problem.grid, config.batch_size,
                                    train_sim_seed(config.seed, it));
        try {
            PolicyRollout rollout(result.policy, batch, problem.option, problem.cost, 0.0, true);
            const double risk =
                rdeu_empirical(EmpiricalDistribution(rollout.episode().wealth), gamma, utility);
            if (!std::isfinite(risk)) {
                result.diverged = true;
                result.message = "risk became non-finite at iteration " + std::to_string(it);
                break;
            }
            const GradientResult g = nonrobust_gradient(rollout, gamma, utility);
            const double gnorm = l2_norm(g.grad);
            adam_step(adam, result.policy, g.grad);
            result.history.push_back({it, risk, risk, 0.0, 0.0, 0.0, gnorm});
        } catch (const TrainingError& err) {
            result.diverged = true;
            result.message = std::string(err.what()) + " at iteration " + std::to_string(it);
            break;
        }
    }
    return result;
}

namespace {

struct AdversaryPass {
    Matrix inputs;
    ForwardCache cache;
    std::vector<double> x_theta;
};

AdversaryPass run_adversary(const MLPParams& adversary, const std::vector<double>& x_phi) {
    AdversaryPass pass;
    pass.inputs = Matrix(x_phi.size(), 1);
    for (std::size_t i = 0; i < x_phi.size(); ++i) pass.inputs(i, 0) = x_phi[i];
    const Matrix out = mlp_forward(adversary, pass.inputs, &pass.cache);
    pass.x_theta.resize(x_phi.size());
    for (std::size_t i = 0; i < x_phi.size(); ++i) {
        pass.x_theta[i] = out(i, 0);
        if (!std::isfinite(pass.x_theta[i])) {
            throw TrainingError("adversary produced non-finite wealth distortion");
        }
    }
    return pass;
}

}  // namespace

TrainResult train_robust(const TrainConfig& config, const RobustConfig& robust,
                         const HedgingProblem& problem, const DistortionSpec& gamma,
                         const UtilitySpec& utility, const MLPSpec& policy_spec,
                         const MLPSpec& adversary_spec) {
    config.validate();
    robust.validate();
    problem.validate();
    policy_spec.validate();
    adversary_spec.validate();
    if (policy_spec.input_dim != feature_dim(problem.cost)) {
        throw ContractError("train_robust: policy input_dim does not match feature dimension");
    }
    if (adversary_spec.input_dim != 1 || adversary_spec.output_dim != 1) {
        throw ContractError("train_robust: adversary must map wealth to wealth (1 -> 1)");
    }

    TrainResult result;
    result.policy = init_mlp(policy_spec, policy_init_seed(config.seed));
    result.adversary = init_mlp(adversary_spec, adversary_init_seed(config.seed));
    AdamState adam_policy(config.lr_policy);
    AdamState adam_adversary(config.lr_adversary);

    RobustConfig state = robust;  // lambda/mu evolve
    double prev_violation = std::numeric_limits<double>::infinity();
    // Below this the violation is boundary-riding noise (one optimiser step
    // worth of distortion), not a constraint the penalty still has to fix.
    const double violation_tol =
        std::max(0.5 * std::pow(robust.epsilon, robust.order), 1e-2);
    int violating_tail = 0;  // consecutive trailing cycles above tolerance
    int outer_count = 0;

    for (int cycle = 0; cycle < config.iterations; ++cycle) {
        try {
            // Adversary ascent on one fresh batch (the policy is frozen, so a
            // single rollout serves every inner step of the cycle).
            if (state.inner_steps > 0) {
                const PathBatch batch =
                    simulate_heston(problem.market, problem.grid, config.batch_size,
                                    inner_sim_seed(config.seed, cycle));
                const PolicyRollout rollout(result.policy, batch, problem.option, problem.cost, 0.0,
                                            false);
                for (int k = 0; k < state.inner_steps; ++k) {
                    AdversaryPass pass = run_adversary(*result.adversary, rollout.episode().wealth);
                    AdversarySample sample =
                        make_adversary_sample(rollout.episode().wealth, std::move(pass.x_theta));
                    GradientResult g = inner_objective_gradient(sample, *result.adversary,
                                                                pass.cache, gamma, utility, state);
                    for (double& v : g.grad) v = -v;  // ascend
                    adam_step(adam_adversary, *result.adversary, g.grad);
                }
            }

            // Policy descent.
            double cycle_violation = 0.0;
            double cycle_signed_gap = 0.0;  // d^p - eps^p, negative when slack
            for (int k = 0; k < state.outer_steps; ++k) {
                const PathBatch batch =
                    simulate_heston(problem.market, problem.grid, config.batch_size,
                                    train_sim_seed(config.seed, outer_count));
                PolicyRollout rollout(result.policy, batch, problem.option, problem.cost, 0.0, true);
                AdversaryPass pass = run_adversary(*result.adversary, rollout.episode().wealth);
                AdversarySample sample =
                    make_adversary_sample(rollout.episode().wealth, std::move(pass.x_theta));

                const double risk_phi =
                    rdeu_empirical(EmpiricalDistribution(sample.x_phi), gamma, utility);
                const double risk_theta =
                    rdeu_empirical(EmpiricalDistribution(sample.x_theta), gamma, utility);
                const double dist = wasserstein_p(EmpiricalDistribution(sample.x_theta),
                                                  EmpiricalDistribution(sample.x_phi), state.order);
                if (!std::isfinite(risk_phi) || !std::isfinite(risk_theta)) {
                    throw TrainingError("risk became non-finite");
                }
                cycle_violation = penalty_c(sample.x_theta, sample.x_phi, state);
                cycle_signed_gap =
                    std::pow(dist, state.order) - std::pow(state.epsilon, state.order);

                GradientResult g = outer_gradient(sample, rollout, *result.adversary, pass.cache,
                                                  gamma, utility, state);
                const double gnorm = l2_norm(g.grad);
                adam_step(adam_policy, result.policy, g.grad);
                result.history.push_back(
                    {cycle, risk_phi, risk_theta, dist, state.lambda, state.mu, gnorm});
                ++outer_count;
            }

            // Augmented-Lagrangian updates. The multiplier follows the signed
            // gap so it relaxes again when the constraint goes slack (with a
            // truncated violation the max(0, .) clamp would never bind and
            // lambda would only ratchet upward, pinning the adversary strictly
            // inside the ball). The penalty constant only grows while a
            // significant violation fails to shrink.
            state.lambda = std::max(0.0, state.lambda + state.mu * cycle_signed_gap);
            if (cycle_violation > violation_tol && cycle_violation > 0.5 * prev_violation) {
                state.mu = std::min(state.mu * state.mu_growth, 1e8);
            }
            prev_violation = cycle_violation;
            violating_tail = cycle_violation > violation_tol ? violating_tail + 1 : 0;
        } catch (const TrainingError& err) {
            result.diverged = true;
            result.message = std::string(err.what()) + " at cycle " + std::to_string(cycle);
            return result;
        }
    }

    const int tail_budget = std::max(10, config.iterations / 10);
    if (violating_tail >= tail_budget) {
        char msg[256];
        std::snprintf(msg, sizeof(msg),
                      "persistent Wasserstein constraint violation: last %d cycles above c=%g "
                      "(lambda=%g, mu=%g)",
                      violating_tail, violation_tol, state.lambda, state.mu);
        throw TrainingError(msg);
    }
    return result;
}

void write_history_csv(const std::string& path, const std::vector<TrainHistoryRow>& history) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "iter,risk_phi,risk_theta,wasserstein,lambda,mu,grad_norm\n";
    char buf[220];
    for (const auto& row : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.iter,
                      row.risk_phi, row.risk_theta, row.wasserstein, row.lambda, row.mu,
                      row.grad_norm);
        os << buf;
    }
}

}  // namespace rrh
