#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "rrh/common.hpp"

namespace rrh {

/// Heston model parameters. Rates are per year, variances in 1/year.
struct HestonParams {
    double s0 = 10.0;     // initial asset price
    double v0 = 0.09;     // initial variance
    double mu = 0.08;     // drift
    double kappa = 3.0;   // variance mean-reversion rate
    double theta = 0.09;  // long-run variance
    double xi = 2.0;      // volatility of volatility
    double rho = -0.5;    // Brownian correlation

    void validate() const;
    bool operator==(const HestonParams&) const = default;
};

/// Fine simulation grid plus the coarser trading schedule. Trading happens
/// every `trade_every` fine steps, i.e. at times t_i = (trade_every*i/n_steps)*maturity.
struct TimeGrid {
    int n_steps = 200;
    double maturity = 1.0;
    int trade_every = 4;

    void validate() const;
    int n_trading_times() const { return n_steps / trade_every; }
    double dt() const { return maturity / n_steps; }
    double time_at_step(int step) const { return maturity * step / n_steps; }
    double trading_time(int i) const { return time_at_step(i * trade_every); }
    bool operator==(const TimeGrid&) const = default;
};

/// Simulated price/variance paths on the fine grid, column k = step k.
/// prices(i, 0) == s0 and all prices are positive; stored variances are the
/// truncated (nonnegative) values the scheme actually uses.
struct PathBatch {
    Matrix prices;     // n_paths x (n_steps+1)
    Matrix variances;  // same shape
    std::uint64_t seed = 0;
    HestonParams params;
    TimeGrid grid;

    std::size_t n_paths() const { return prices.rows(); }
};

/// Full-truncation Euler for the variance, Euler on log-price with the
/// truncated variance in drift correction and diffusion. Correlated normals
/// z_s = z1, z_v = rho*z1 + sqrt(1-rho^2)*z2. Each path runs on its own
/// mix_seed(seed, path) substream, so disjoint path blocks can be simulated
/// concurrently and the result never depends on the schedule.
PathBatch simulate_heston(const HestonParams& params, const TimeGrid& grid, int n_paths,
                          std::uint64_t seed);

/// Exact log-normal stepping (no discretisation bias). Consumes the same
/// two-normal draw pattern per step as the Heston scheme, so a seed-matched
/// xi=0 Heston run sees identical Brownian increments.
PathBatch simulate_gbm(double s0, double mu, double sigma, const TimeGrid& grid, int n_paths,
                       std::uint64_t seed);

/// M(i,k) = min over fine steps 0..k of prices(i,.). Non-increasing in k.
Matrix running_minimum(const PathBatch& batch);

/// CSV with header path_id,step,time,price,variance.
void write_paths_csv(std::ostream& os, const PathBatch& batch);
void write_paths_csv(const std::string& path, const PathBatch& batch);

/// Compact binary cache keyed by (params, grid, n_paths, seed). The keyed
/// overload verifies the stored key and throws ContractError on mismatch.
void write_paths_cache(const std::string& path, const PathBatch& batch);
PathBatch read_paths_cache(const std::string& path);
PathBatch read_paths_cache(const std::string& path, const HestonParams& params,
                           const TimeGrid& grid, int n_paths, std::uint64_t seed);

}  // namespace rrh
