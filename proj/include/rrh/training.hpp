#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rrh/hedging_env.hpp"
#include "rrh/risk.hpp"

namespace rrh {

struct TrainConfig {
    int batch_size = 1024;
    int iterations = 2000;
    double lr_policy = 1e-3;
    double lr_adversary = 1e-3;
    std::uint64_t seed = 1;
    bool resimulate_per_batch = true;

    void validate() const;
};

/// Wasserstein-ball constraint state for the augmented Lagrangian
///   L = R + lambda*c + (mu/2)*c^2,  c = (d_p^p - eps^p)_+.
/// lambda and mu are the current multiplier/penalty values; the robust
/// trainer updates its own copies along the run.
struct RobustConfig {
    double epsilon = 0.02;
    double order = 1.0;
    double lambda = 0.0;
    double mu = 10.0;
    double mu_growth = 2.0;
    int inner_steps = 10;
    int outer_steps = 1;

    void validate() const;
};

/// Market + contract + friction bundle that defines one hedging task.
struct HedgingProblem {
    HestonParams market;
    TimeGrid grid;
    BarrierOptionSpec option;
    TransactionCostSpec cost;

    void validate() const;
};

/// Base-model wealth, distorted wealth, and the comonotonic pairing between
/// their order statistics. partner_of_theta[j] is the phi-sample occupying
/// the same rank as x_theta[j]; partner_of_phi is the mirror.
struct AdversarySample {
    std::vector<double> x_phi;
    std::vector<double> x_theta;
    std::vector<double> partner_of_theta;
    std::vector<double> partner_of_phi;
};

AdversarySample make_adversary_sample(std::vector<double> x_phi, std::vector<double> x_theta);

/// The shared discretisation of E[ g(X) grad F(x)|_X / f(X) ]: Gaussian
/// kernel weights w_ij = Phi'((x_i-x_j)/h) at the Silverman/2 bandwidth turn
/// per-sample integrand values b_i into per-sample upstream coefficients
///   c_j = -(1/N) sum_i b_i w_ij / sum_k w_ik,
/// so that sum_j c_j grad x_j realises the estimator.
class KernelGradientScheme {
public:
    explicit KernelGradientScheme(const std::vector<double>& samples);

    bool degenerate() const { return degenerate_; }
    double bandwidth() const { return h_; }
    const std::vector<double>& cdf_at_samples() const { return cdf_; }
    std::vector<double> coefficients(const std::vector<double>& integrand) const;

private:
    std::vector<double> x_;
    double h_ = 0.0;
    bool degenerate_ = false;
    std::vector<double> cdf_;
    std::vector<double> weight_sum_;
    Matrix weights_;  // cached kernel matrix when the batch is small enough
    bool cached_ = false;
};

struct GradientResult {
    std::vector<double> grad;
    bool degenerate_bandwidth = false;
};

/// Policy gradient of the RDEU risk of the rollout's wealth (the
/// kernel-weighted estimator; zero with a flag when the batch is degenerate).
GradientResult nonrobust_gradient(const PolicyRollout& rollout, const DistortionSpec& gamma,
                                  const UtilitySpec& utility);

/// Wasserstein-ball violation c = (d_p^p - eps^p)_+; zero inside the ball.
double penalty_c(const std::vector<double>& x_theta, const std::vector<double>& x_phi,
                 const RobustConfig& robust);

/// Multiplier weight Lambda = (lambda + mu*c) 1(d_p > eps), detached.
double lambda_effective(const std::vector<double>& x_theta, const std::vector<double>& x_phi,
                        const RobustConfig& robust);

/// Gradient of the augmented Lagrangian with respect to the adversary
/// parameters (the integrand {U' gamma(F_theta) - p Lambda |X-Xc|^(p-1) sgn}
/// pushed through the kernel scheme).
GradientResult inner_gradient(const AdversarySample& sample, const MLPParams& adversary,
                              const ForwardCache& adv_cache, const DistortionSpec& gamma,
                              const UtilitySpec& utility, const RobustConfig& robust);

/// Gradient of the adversary's constrained objective R - lambda*c - (mu/2)c^2
/// (risk term ascends, penalty restrains); the trainer maximises this.
GradientResult inner_objective_gradient(const AdversarySample& sample, const MLPParams& adversary,
                                        const ForwardCache& adv_cache, const DistortionSpec& gamma,
                                        const UtilitySpec& utility, const RobustConfig& robust);

/// Gradient of the augmented Lagrangian with respect to the policy
/// parameters; this is the direction the policy descends. Policy dependence
/// enters through both routes: X_theta = H_theta(X_phi(phi)) chains through
/// the adversary's input gradient, and the penalty also sees X_phi directly
/// through the phi-side kernel scheme.
GradientResult outer_gradient(const AdversarySample& sample, const PolicyRollout& rollout,
                              const MLPParams& adversary, const ForwardCache& adv_cache,
                              const DistortionSpec& gamma, const UtilitySpec& utility,
                              const RobustConfig& robust);

struct TrainHistoryRow {
    int iter = 0;
    double risk_phi = 0.0;
    double risk_theta = 0.0;
    double wasserstein = 0.0;
    double lambda = 0.0;
    double mu = 0.0;
    double grad_norm = 0.0;
};

struct TrainResult {
    MLPParams policy;
    std::optional<MLPParams> adversary;
    std::vector<TrainHistoryRow> history;
    bool diverged = false;
    std::string message;
};

/// Seed streams, exposed so evaluations can reuse training-time batches.
std::uint64_t train_sim_seed(std::uint64_t seed, int outer_iteration);
std::uint64_t inner_sim_seed(std::uint64_t seed, int cycle);
std::uint64_t policy_init_seed(std::uint64_t seed);
std::uint64_t adversary_init_seed(std::uint64_t seed);

/// Mini-batch RDEU descent: simulate (or reuse) paths, roll the policy out,
/// apply the kernel-gradient estimator, Adam-update. Deterministic per seed.
TrainResult train_nonrobust(const TrainConfig& config, const HedgingProblem& problem,
                            const DistortionSpec& gamma, const UtilitySpec& utility,
                            const MLPSpec& policy_spec);

/// Alternating robust loop: inner_steps of adversary ascent on one fresh
/// batch per cycle, outer_steps of policy descent on fresh batches, then
/// lambda <- max(0, lambda + mu*c) and mu growth while the violation stalls.
TrainResult train_robust(const TrainConfig& config, const RobustConfig& robust,
                         const HedgingProblem& problem, const DistortionSpec& gamma,
                         const UtilitySpec& utility, const MLPSpec& policy_spec,
                         const MLPSpec& adversary_spec);

/// CSV with header iter,risk_phi,risk_theta,wasserstein,lambda,mu,grad_norm.
void write_history_csv(const std::string& path, const std::vector<TrainHistoryRow>& history);

double l2_norm(const std::vector<double>& v);

}  // namespace rrh
