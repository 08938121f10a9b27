#include "rrh/risk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rrh {

DistortionSpec DistortionSpec::alpha_beta(double alpha, double beta, double p_weight) {
    DistortionSpec spec{Kind::alpha_beta, alpha, beta, p_weight};
    spec.validate();
    return spec;
}

DistortionSpec DistortionSpec::cvar(double alpha) {
    // beta is inert at p_weight = 1; keep it valid.
    DistortionSpec spec{Kind::alpha_beta, alpha, std::max(alpha, 0.5), 1.0};
    spec.validate();
    return spec;
}

DistortionSpec DistortionSpec::uniform() { return {Kind::uniform, 0.0, 0.0, 0.0}; }

void DistortionSpec::validate() const {
    if (kind == Kind::uniform) return;
    if (!(alpha > 0.0) || !(alpha <= beta) || !(beta < 1.0)) {
        throw std::invalid_argument("DistortionSpec: requires 0 < alpha <= beta < 1");
    }
    if (!(p_weight >= 0.0) || !(p_weight <= 1.0)) {
        throw std::invalid_argument("DistortionSpec: p_weight must be in [0,1]");
    }
    if (!(eta() > 0.0)) throw std::invalid_argument("DistortionSpec: eta must be positive");
}

double gamma_weight(double u, const DistortionSpec& spec) {
    if (u < 0.0 || u > 1.0) throw std::invalid_argument("gamma_weight: u must be in [0,1]");
    if (spec.kind == DistortionSpec::Kind::uniform) return 1.0;
    spec.validate();
    double w = 0.0;
    if (u <= spec.alpha) w += spec.p_weight;
    if (u >= spec.beta) w += 1.0 - spec.p_weight;
    return w / spec.eta();
}

double gamma_integral(double a, double b, const DistortionSpec& spec) {
    if (a > b) std::swap(a, b);
    a = std::clamp(a, 0.0, 1.0);
    b = std::clamp(b, 0.0, 1.0);
    if (spec.kind == DistortionSpec::Kind::uniform) return b - a;
    const double lower = std::max(0.0, std::min(b, spec.alpha) - a);
    const double upper = std::max(0.0, b - std::max(a, spec.beta));
    return (spec.p_weight * lower + (1.0 - spec.p_weight) * upper) / spec.eta();
}

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> samples)
    : samples_(std::move(samples)) {
    if (samples_.empty()) throw std::domain_error("EmpiricalDistribution: empty sample");
    sorted_view_.resize(samples_.size());
    std::iota(sorted_view_.begin(), sorted_view_.end(), 0u);
    std::stable_sort(sorted_view_.begin(), sorted_view_.end(),
                     [&](std::uint32_t i, std::uint32_t j) { return samples_[i] < samples_[j]; });
}

double EmpiricalDistribution::mean() const {
    double s = 0.0;
    for (double x : samples_) s += x;
    return s / static_cast<double>(samples_.size());
}

double EmpiricalDistribution::stdev() const {
    if (samples_.size() < 2) return 0.0;
    const double m = mean();
    double ss = 0.0;
    for (double x : samples_) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(samples_.size() - 1));
}

double rdeu_empirical(const EmpiricalDistribution& dist, const DistortionSpec& gamma,
                      const UtilitySpec& utility) {
    const double n = static_cast<double>(dist.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        const double w = gamma_integral(static_cast<double>(i) / n,
                                        static_cast<double>(i + 1) / n, gamma);
        if (w != 0.0) acc += utility.value(dist.order_stat(i)) * w;
    }
    return -acc;
}

double cvar_empirical(const EmpiricalDistribution& dist, double alpha) {
    return rdeu_empirical(dist, DistortionSpec::cvar(alpha), UtilitySpec::identity());
}

namespace {

// floor(x) that forgives the 1-ulp error in products like (1-0.8)*10.
std::size_t floor_count(double x) {
    const double r = std::round(x);
    return static_cast<std::size_t>(std::abs(x - r) < 1e-9 ? r : std::floor(x));
}

}  // namespace

TailPair tail_expectations(const EmpiricalDistribution& dist, double alpha, double beta) {
    if (!(alpha > 0.0) || !(alpha <= beta) || !(beta < 1.0)) {
        throw std::invalid_argument("tail_expectations: requires 0 < alpha <= beta < 1");
    }
    const std::size_t n = dist.size();
    const std::size_t n_lower = floor_count(alpha * static_cast<double>(n));
    const std::size_t n_upper = floor_count((1.0 - beta) * static_cast<double>(n));
    if (n_lower == 0) throw std::domain_error("tail_expectations: floor(alpha*N) is zero");
    TailPair tails;
    for (std::size_t i = 0; i < n_lower; ++i) tails.lower += dist.order_stat(i);
    for (std::size_t i = n - n_upper; i < n; ++i) tails.upper += dist.order_stat(i);
    tails.lower /= static_cast<double>(n);
    tails.upper /= static_cast<double>(n);
    return tails;
}

double wasserstein_p(const EmpiricalDistribution& a, const EmpiricalDistribution& b, double order) {
    if (a.size() != b.size()) {
        throw std::domain_error("wasserstein_p: samples must have equal size");
    }
    if (!(order >= 1.0)) throw std::invalid_argument("wasserstein_p: order must be >= 1");
    const std::size_t n = a.size();
    double acc = 0.0;
    if (order == 1.0) {
        for (std::size_t i = 0; i < n; ++i) acc += std::abs(a.order_stat(i) - b.order_stat(i));
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            acc += std::pow(std::abs(a.order_stat(i) - b.order_stat(i)), order);
        }
    }
    acc /= static_cast<double>(n);
    return order == 1.0 ? acc : std::pow(acc, 1.0 / order);
}

Bandwidth silverman_half_bandwidth(const EmpiricalDistribution& dist) {
    if (dist.size() < 2) throw std::invalid_argument("silverman_half_bandwidth: need >= 2 samples");
    const double sd = dist.stdev();
    if (sd == 0.0) {
        return {1e-8 * (1.0 + std::abs(dist.mean())), true};
    }
    return {0.53 * sd * std::pow(static_cast<double>(dist.size()), -0.2), false};
}

double kde_cdf(double x, const EmpiricalDistribution& dist, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("kde_cdf: bandwidth must be positive");
    double acc = 0.0;
    for (double xi : dist.samples()) acc += norm_cdf((x - xi) / h);
    return acc / static_cast<double>(dist.size());
}

double kde_pdf(double x, const EmpiricalDistribution& dist, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("kde_pdf: bandwidth must be positive");
    double acc = 0.0;
    for (double xi : dist.samples()) acc += norm_pdf((x - xi) / h);
    return acc / (static_cast<double>(dist.size()) * h);
}

}  // namespace rrh
