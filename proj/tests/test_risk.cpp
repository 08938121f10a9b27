#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "rrh/risk.hpp"

using namespace rrh;

namespace {

/// Standard normal quantile by bisection on norm_cdf (test-side oracle).
double norm_ppf(double p) {
    double lo = -10.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (norm_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Jump-aware midpoint quadrature of gamma over [0,1]: gamma is piecewise
/// constant with breaks at alpha and beta, so integrate each piece with the
/// midpoint rule.
double gamma_mass_by_quadrature(const DistortionSpec& spec, int total_points) {
    std::vector<double> breaks = {0.0, 1.0};
    if (spec.kind == DistortionSpec::Kind::alpha_beta) {
        breaks.insert(breaks.end() - 1, spec.alpha);
        breaks.insert(breaks.end() - 1, spec.beta);
        std::sort(breaks.begin(), breaks.end());
    }
    double acc = 0.0;
    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
        const double a = breaks[s], b = breaks[s + 1];
        if (b <= a) continue;
        const int n = std::max(1, static_cast<int>(total_points * (b - a)));
        const double du = (b - a) / n;
        for (int i = 0; i < n; ++i) acc += gamma_weight(a + (i + 0.5) * du, spec) * du;
    }
    return acc;
}

std::vector<double> standard_normal_sample(std::size_t n, std::uint64_t seed) {
    NormalPairRng rng(seed);
    std::vector<double> out;
    out.reserve(n);
    while (out.size() < n) {
        const auto [z1, z2] = rng.next_pair();
        out.push_back(z1);
        if (out.size() < n) out.push_back(z2);
    }
    return out;
}

const UtilitySpec kIdentity = UtilitySpec::identity();

}  // namespace

TEST_CASE("gamma weight matches the closed form") {
    const DistortionSpec cvar = DistortionSpec::cvar(0.2);  // eta = 0.2
    CHECK(gamma_weight(0.05, cvar) == doctest::Approx(5.0));
    CHECK(gamma_weight(0.2, cvar) == doctest::Approx(5.0));
    CHECK(gamma_weight(0.21, cvar) == 0.0);
    CHECK(gamma_weight(0.95, cvar) == 0.0);

    const DistortionSpec ab = DistortionSpec::alpha_beta(0.1, 0.9, 0.7);  // eta = 0.1
    CHECK(gamma_weight(0.05, ab) == doctest::Approx(7.0));
    CHECK(gamma_weight(0.5, ab) == 0.0);
    CHECK(gamma_weight(0.95, ab) == doctest::Approx(3.0));

    CHECK_THROWS_AS(gamma_weight(1.5, ab), std::invalid_argument);
    CHECK_THROWS_AS(DistortionSpec::alpha_beta(0.0, 0.9, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(DistortionSpec::alpha_beta(0.5, 0.4, 0.5), std::invalid_argument);
}

TEST_CASE("gamma integrates to one for any valid spec") {
    const std::vector<DistortionSpec> specs = {
        DistortionSpec::cvar(0.2),
        DistortionSpec::alpha_beta(0.1, 0.9, 0.7),
        DistortionSpec::alpha_beta(0.25, 0.4, 0.0),
        DistortionSpec::alpha_beta(0.05, 0.95, 0.5),
        DistortionSpec::uniform(),
    };
    for (const auto& spec : specs) {
        CHECK(std::abs(gamma_mass_by_quadrature(spec, 100000) - 1.0) <= 1e-6);
        CHECK(gamma_integral(0.0, 1.0, spec) == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("rdeu puts all cvar mass on the worst order statistics") {
    const EmpiricalDistribution dist({-2.0, -1.0, 0.0, 1.0});
    const double risk = rdeu_empirical(dist, DistortionSpec::cvar(0.25), kIdentity);
    CHECK(risk == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("uniform distortion reduces rdeu to the negated mean") {
    const auto samples = standard_normal_sample(257, 4);
    const EmpiricalDistribution dist(samples);
    const double risk = rdeu_empirical(dist, DistortionSpec::uniform(), kIdentity);
    CHECK(risk == doctest::Approx(-dist.mean()).epsilon(1e-12));
}

TEST_CASE("rdeu is translation equivariant and positively homogeneous") {
    const auto samples = standard_normal_sample(500, 9);
    const DistortionSpec gamma = DistortionSpec::alpha_beta(0.15, 0.85, 0.6);
    const double base = rdeu_empirical(EmpiricalDistribution(samples), gamma, kIdentity);

    for (double m : {-2.5, 0.4, 10.0}) {
        auto shifted = samples;
        for (double& x : shifted) x += m;
        const double risk = rdeu_empirical(EmpiricalDistribution(shifted), gamma, kIdentity);
        CHECK(std::abs(risk - (base - m)) <= 1e-12);
    }
    for (double scale : {0.5, 2.0, 7.0}) {
        auto scaled = samples;
        for (double& x : scaled) x *= scale;
        const double risk = rdeu_empirical(EmpiricalDistribution(scaled), gamma, kIdentity);
        CHECK(std::abs(risk - scale * base) <= 1e-10 * std::max(1.0, std::abs(base)));
    }
}

TEST_CASE("rdeu is monotone in the sample") {
    NormalPairRng rng(12);
    const DistortionSpec gamma = DistortionSpec::alpha_beta(0.2, 0.8, 0.7);
    for (int trial = 0; trial < 20; ++trial) {
        auto a = standard_normal_sample(101, 100 + trial);
        auto b = a;
        for (double& x : b) x += std::abs(rng.next_unit());
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());  // a <= b elementwise after sorting
        CHECK(rdeu_empirical(EmpiricalDistribution(a), gamma, kIdentity) >=
              rdeu_empirical(EmpiricalDistribution(b), gamma, kIdentity));
    }
}

TEST_CASE("empirical cvar matches the expected-shortfall closed form") {
    const auto samples = standard_normal_sample(100000, 31);
    const double cvar = cvar_empirical(EmpiricalDistribution(samples), 0.2);
    const double expected = norm_pdf(norm_ppf(0.2)) / 0.2;  // 1.3998
    CHECK(expected == doctest::Approx(1.3998).epsilon(1e-4));
    CHECK(std::abs(cvar - expected) <= 0.02);
}

TEST_CASE("cvar of constant samples and equivalence with the p=1 spec") {
    const EmpiricalDistribution constant(std::vector<double>(64, 3.25));
    CHECK(cvar_empirical(constant, 0.2) == -3.25);

    const auto samples = standard_normal_sample(333, 77);
    const EmpiricalDistribution dist(samples);
    CHECK(cvar_empirical(dist, 0.3) ==
          rdeu_empirical(dist, DistortionSpec::cvar(0.3), kIdentity));
}

TEST_CASE("tail expectations are truncated means over order statistics") {
    const EmpiricalDistribution dist({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
    const TailPair tails = tail_expectations(dist, 0.2, 0.8);
    CHECK(tails.lower == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(tails.upper == doctest::Approx(1.9).epsilon(1e-14));

    CHECK_THROWS_AS(tail_expectations(EmpiricalDistribution({1.0, 2.0}), 0.2, 0.8),
                    std::domain_error);
}

TEST_CASE("symmetric samples give mirrored tails") {
    auto samples = standard_normal_sample(400, 55);
    std::vector<double> sym;
    for (double x : samples) {
        sym.push_back(x);
        sym.push_back(-x);
    }
    const TailPair tails = tail_expectations(EmpiricalDistribution(sym), 0.1, 0.9);
    CHECK(tails.lower == doctest::Approx(-tails.upper).epsilon(1e-12));
}

TEST_CASE("alpha-beta risk decomposes into tail expectations") {
    // N chosen so alpha*N and (1-beta)*N are integers and the quantile cells
    // align exactly with the truncated sums.
    const auto samples = standard_normal_sample(1000, 91);
    const EmpiricalDistribution dist(samples);
    for (double p : {1.0, 0.84, 0.7, 0.3}) {
        const DistortionSpec gamma = DistortionSpec::alpha_beta(0.1, 0.9, p);
        const TailPair tails = tail_expectations(dist, 0.1, 0.9);
        const double recomposed =
            -(p * tails.lower + (1.0 - p) * tails.upper) / gamma.eta();
        CHECK(std::abs(recomposed - rdeu_empirical(dist, gamma, kIdentity)) <= 1e-10);
    }
}

TEST_CASE("wasserstein distance basics") {
    const EmpiricalDistribution a({0.0, 1.0});
    const EmpiricalDistribution b({1.0, 2.0});
    CHECK(wasserstein_p(a, a, 1.0) == 0.0);
    CHECK(wasserstein_p(a, b, 1.0) == doctest::Approx(1.0).epsilon(1e-15));

    const auto samples = standard_normal_sample(256, 17);
    for (double m : {-3.0, 0.125, 42.0}) {
        auto shifted = samples;
        for (double& x : shifted) x += m;
        const double d = wasserstein_p(EmpiricalDistribution(samples),
                                       EmpiricalDistribution(shifted), 1.0);
        CHECK(std::abs(d - std::abs(m)) <= 1e-12);
    }

    CHECK_THROWS_AS(wasserstein_p(a, EmpiricalDistribution({1.0, 2.0, 3.0}), 1.0),
                    std::domain_error);
}

TEST_CASE("wasserstein satisfies the metric axioms on random triples") {
    for (double order : {1.0, 2.0}) {
        for (int trial = 0; trial < 10; ++trial) {
            const EmpiricalDistribution x(standard_normal_sample(64, 300 + trial));
            auto ys = standard_normal_sample(64, 400 + trial);
            for (double& v : ys) v = 2.0 * v + 0.3;
            auto zs = standard_normal_sample(64, 500 + trial);
            for (double& v : zs) v = 0.5 * v - 1.0;
            const EmpiricalDistribution y(ys), z(zs);
            const double dxy = wasserstein_p(x, y, order);
            const double dyx = wasserstein_p(y, x, order);
            const double dxz = wasserstein_p(x, z, order);
            const double dyz = wasserstein_p(y, z, order);
            CHECK(dxy >= 0.0);
            CHECK(dxy == doctest::Approx(dyx).epsilon(1e-14));
            CHECK(dxz <= dxy + dyz + 1e-12);
        }
    }
}

TEST_CASE("silverman half bandwidth") {
    // Sample engineered to have unbiased stdev exactly 1.
    const std::size_t n = 100000;
    const double a = std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n));
    std::vector<double> samples(n);
    for (std::size_t i = 0; i < n; ++i) samples[i] = (i % 2 == 0) ? a : -a;
    const Bandwidth bw = silverman_half_bandwidth(EmpiricalDistribution(samples));
    CHECK_FALSE(bw.degenerate);
    CHECK(bw.h == doctest::Approx(0.053).epsilon(1e-12));

    // Scaling: samples*c scales h by |c|.
    const auto base = standard_normal_sample(512, 2);
    auto scaled = base;
    for (double& x : scaled) x *= -4.0;
    const double h0 = silverman_half_bandwidth(EmpiricalDistribution(base)).h;
    const double h1 = silverman_half_bandwidth(EmpiricalDistribution(scaled)).h;
    CHECK(h1 == doctest::Approx(4.0 * h0).epsilon(1e-12));

    const Bandwidth flat = silverman_half_bandwidth(EmpiricalDistribution({5.0, 5.0, 5.0}));
    CHECK(flat.degenerate);
    CHECK(flat.h == doctest::Approx(1e-8 * 6.0).epsilon(1e-12));
}

TEST_CASE("kde cdf and pdf behave like a distribution") {
    const auto samples = standard_normal_sample(200, 66);
    const EmpiricalDistribution dist(samples);
    const double h = silverman_half_bandwidth(dist).h;

    const double lo = *std::min_element(samples.begin(), samples.end());
    const double hi = *std::max_element(samples.begin(), samples.end());
    CHECK(kde_cdf(lo - 20.0 * h, dist, h) <= 1e-6);
    CHECK(kde_cdf(hi + 20.0 * h, dist, h) >= 1.0 - 1e-6);

    double prev = -1.0;
    for (double x = lo - h; x <= hi + h; x += 0.05) {
        const double cdf = kde_cdf(x, dist, h);
        CHECK(cdf >= prev);
        CHECK(kde_pdf(x, dist, h) >= 0.0);
        prev = cdf;
    }

    // Trapezoid mass of the density.
    const double a = lo - 10.0 * h, b = hi + 10.0 * h;
    const int n = 20000;
    const double dx = (b - a) / n;
    double mass = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        mass += w * kde_pdf(a + i * dx, dist, h) * dx;
    }
    CHECK(std::abs(mass - 1.0) <= 1e-4);

    CHECK(kde_cdf(0.0, EmpiricalDistribution({0.0}), 1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(kde_cdf(0.0, dist, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(kde_pdf(0.0, dist, -1.0), std::invalid_argument);
}
