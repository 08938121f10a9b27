#pragma once

#include <vector>

#include "rrh/common.hpp"

namespace rrh {

/// Quantile-level weight function. The alpha-beta family is the U-shaped
///   gamma(u) = (1/eta) [ p 1(u <= alpha) + (1-p) 1(u >= beta) ],
/// eta = p*alpha + (1-p)*(1-beta); p = 1 recovers CVaR at level alpha.
/// The uniform kind (gamma == 1) yields plain expected utility.
struct DistortionSpec {
    enum class Kind { alpha_beta, uniform };

    Kind kind = Kind::alpha_beta;
    double alpha = 0.2;
    double beta = 0.9;
    double p_weight = 1.0;

    static DistortionSpec alpha_beta(double alpha, double beta, double p_weight);
    static DistortionSpec cvar(double alpha);
    static DistortionSpec uniform();

    double eta() const { return p_weight * alpha + (1.0 - p_weight) * (1.0 - beta); }
    void validate() const;
};

/// gamma(u) for u in [0,1].
double gamma_weight(double u, const DistortionSpec& spec);

/// Exact integral of gamma over [a,b] (gamma is piecewise constant).
double gamma_integral(double a, double b, const DistortionSpec& spec);

/// Utility on terminal wealth; identity for all experiments here, kept as a
/// spec so concave alternatives can slot in.
struct UtilitySpec {
    enum class Kind { identity };
    Kind kind = Kind::identity;

    static UtilitySpec identity() { return {}; }
    double value(double x) const { return x; }
    double derivative(double) const { return 1.0; }
};

/// Sample of terminal wealth values with a cached sorting permutation.
class EmpiricalDistribution {
public:
    explicit EmpiricalDistribution(std::vector<double> samples);

    std::size_t size() const { return samples_.size(); }
    const std::vector<double>& samples() const { return samples_; }
    const std::vector<std::uint32_t>& sorted_view() const { return sorted_view_; }
    double order_stat(std::size_t rank) const { return samples_[sorted_view_[rank]]; }
    double mean() const;
    double stdev() const;  // unbiased

private:
    std::vector<double> samples_;
    std::vector<std::uint32_t> sorted_view_;
};

/// Rank-dependent expected utility risk via the quantile representation,
///   R = -sum_i U(x_(i)) * Integral_{(i-1)/N}^{i/N} gamma.
/// Lower is better; for wealth samples the reported "CVaR" convention is -R.
double rdeu_empirical(const EmpiricalDistribution& dist, const DistortionSpec& gamma,
                      const UtilitySpec& utility);

/// rdeu_empirical with the p=1 spec at level alpha.
double cvar_empirical(const EmpiricalDistribution& dist, double alpha);

/// Unconditional truncated means over the bottom floor(alpha N) and top
/// floor((1-beta) N) order statistics, both divided by N.
struct TailPair {
    double lower = 0.0;
    double upper = 0.0;
};
TailPair tail_expectations(const EmpiricalDistribution& dist, double alpha, double beta);

/// Order-p Wasserstein distance between two equal-size empirical measures:
/// the comonotonic (order-statistic) coupling is optimal in one dimension.
double wasserstein_p(const EmpiricalDistribution& a, const EmpiricalDistribution& b, double order);

/// h = 0.53 * stdev * N^(-1/5), floored (and flagged) for degenerate samples.
struct Bandwidth {
    double h = 0.0;
    bool degenerate = false;
};
Bandwidth silverman_half_bandwidth(const EmpiricalDistribution& dist);

/// Gaussian kernel estimates F(x) = (1/N) sum Phi((x-x_i)/h) and its density.
double kde_cdf(double x, const EmpiricalDistribution& dist, double h);
double kde_pdf(double x, const EmpiricalDistribution& dist, double h);

}  // namespace rrh
