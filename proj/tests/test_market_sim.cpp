#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "rrh/market_sim.hpp"

using namespace rrh;

namespace {

const HestonParams kPaperParams{10.0, 0.09, 0.08, 3.0, 0.09, 2.0, -0.5};
const TimeGrid kPaperGrid{200, 1.0, 4};

double terminal_mean(const PathBatch& batch) {
    const std::size_t last = batch.prices.cols() - 1;
    double acc = 0.0;
    for (std::size_t p = 0; p < batch.n_paths(); ++p) acc += batch.prices(p, last);
    return acc / static_cast<double>(batch.n_paths());
}

double terminal_se(const PathBatch& batch, std::size_t col) {
    const double n = static_cast<double>(batch.n_paths());
    double mean = 0.0;
    for (std::size_t p = 0; p < batch.n_paths(); ++p) mean += batch.prices(p, col);
    mean /= n;
    double ss = 0.0;
    for (std::size_t p = 0; p < batch.n_paths(); ++p) {
        const double d = batch.prices(p, col) - mean;
        ss += d * d;
    }
    return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

}  // namespace

TEST_CASE("heston terminal mean matches s0*exp(mu*T) within 3 SE") {
    const PathBatch batch = simulate_heston(kPaperParams, kPaperGrid, 50000, 42);
    const double expected = 10.0 * std::exp(0.08);  // zero-mean diffusion term
    const double se = terminal_se(batch, batch.prices.cols() - 1);
    CHECK(std::abs(terminal_mean(batch) - expected) <= 3.0 * se);
}

TEST_CASE("xi=0 with v0=theta degenerates to GBM pathwise") {
    HestonParams params = kPaperParams;
    params.xi = 0.0;
    params.v0 = 0.09;
    params.theta = 0.09;
    const PathBatch heston = simulate_heston(params, kPaperGrid, 64, 7);
    const PathBatch gbm = simulate_gbm(10.0, 0.08, 0.3, kPaperGrid, 64, 7);
    for (std::size_t p = 0; p < heston.n_paths(); ++p) {
        for (std::size_t k = 0; k < heston.prices.cols(); ++k) {
            CHECK(heston.prices(p, k) == doctest::Approx(gbm.prices(p, k)).epsilon(1e-10));
        }
    }
}

TEST_CASE("same seed reproduces bit-identical paths") {
    const PathBatch a = simulate_heston(kPaperParams, kPaperGrid, 128, 99);
    const PathBatch b = simulate_heston(kPaperParams, kPaperGrid, 128, 99);
    CHECK(a.prices == b.prices);
    CHECK(a.variances == b.variances);
}

TEST_CASE("result does not depend on worker count") {
    setenv("RRH_THREADS", "3", 1);
    const PathBatch threaded = simulate_heston(kPaperParams, kPaperGrid, 300, 5);
    setenv("RRH_THREADS", "1", 1);
    const PathBatch serial = simulate_heston(kPaperParams, kPaperGrid, 300, 5);
    unsetenv("RRH_THREADS");
    CHECK(threaded.prices == serial.prices);
    CHECK(threaded.variances == serial.variances);
}

TEST_CASE("all simulated prices are positive and start at s0") {
    const PathBatch batch = simulate_heston(kPaperParams, kPaperGrid, 500, 3);
    for (std::size_t p = 0; p < batch.n_paths(); ++p) {
        CHECK(batch.prices(p, 0) == 10.0);
        for (std::size_t k = 0; k < batch.prices.cols(); ++k) {
            CHECK(batch.prices(p, k) > 0.0);
            CHECK(batch.variances(p, k) >= 0.0);
        }
    }
}

TEST_CASE("variance is stationary at v0=theta within 3 SE") {
    const PathBatch batch = simulate_heston(kPaperParams, kPaperGrid, 50000, 11);
    const std::size_t last = batch.variances.cols() - 1;
    const double n = static_cast<double>(batch.n_paths());
    double mean = 0.0;
    for (std::size_t p = 0; p < batch.n_paths(); ++p) mean += batch.variances(p, last);
    mean /= n;
    double ss = 0.0;
    for (std::size_t p = 0; p < batch.n_paths(); ++p) {
        const double d = batch.variances(p, last) - mean;
        ss += d * d;
    }
    const double se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    CHECK(std::abs(mean - 0.09) <= 3.0 * se);
}

TEST_CASE("invalid heston parameters are rejected") {
    HestonParams bad = kPaperParams;
    bad.rho = -1.5;
    CHECK_THROWS_AS(simulate_heston(bad, kPaperGrid, 10, 1), std::invalid_argument);
    bad = kPaperParams;
    bad.v0 = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(simulate_heston(bad, kPaperGrid, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(simulate_heston(kPaperParams, TimeGrid{200, 1.0, 3}, 10, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(simulate_heston(kPaperParams, kPaperGrid, 0, 1), std::invalid_argument);
}

TEST_CASE("gbm with sigma=0 is the deterministic exponential") {
    const PathBatch batch = simulate_gbm(10.0, 0.08, 0.0, kPaperGrid, 3, 1);
    for (std::size_t p = 0; p < batch.n_paths(); ++p) {
        for (std::size_t k = 0; k < batch.prices.cols(); ++k) {
            const double t = kPaperGrid.time_at_step(static_cast<int>(k));
            CHECK(batch.prices(p, k) == doctest::Approx(10.0 * std::exp(0.08 * t)).epsilon(1e-12));
        }
    }
}

TEST_CASE("driftless gbm terminal mean is a martingale within 3 SE") {
    const PathBatch batch = simulate_gbm(10.0, 0.0, 0.3, kPaperGrid, 50000, 12);
    const double se = terminal_se(batch, batch.prices.cols() - 1);
    CHECK(std::abs(terminal_mean(batch) - 10.0) <= 3.0 * se);
}

TEST_CASE("gbm single path is reproducible and sigma<0 rejected") {
    const PathBatch a = simulate_gbm(10.0, 0.05, 0.2, kPaperGrid, 1, 77);
    const PathBatch b = simulate_gbm(10.0, 0.05, 0.2, kPaperGrid, 1, 77);
    CHECK(a.prices == b.prices);
    CHECK_THROWS_AS(simulate_gbm(10.0, 0.05, -0.1, kPaperGrid, 1, 77), std::invalid_argument);
}

TEST_CASE("running minimum follows the definition") {
    PathBatch batch;
    batch.grid = TimeGrid{2, 1.0, 1};
    batch.params.s0 = 10.0;
    batch.prices = Matrix(1, 3);
    batch.prices(0, 0) = 10.0;
    batch.prices(0, 1) = 9.0;
    batch.prices(0, 2) = 11.0;
    batch.variances = Matrix(1, 3);
    const Matrix m = running_minimum(batch);
    CHECK(m(0, 0) == 10.0);
    CHECK(m(0, 1) == 9.0);
    CHECK(m(0, 2) == 9.0);
}

TEST_CASE("running minimum is non-increasing and bounded by the price") {
    const PathBatch batch = simulate_heston(kPaperParams, kPaperGrid, 200, 21);
    const Matrix m = running_minimum(batch);
    for (std::size_t p = 0; p < batch.n_paths(); ++p) {
        for (std::size_t k = 0; k < m.cols(); ++k) {
            CHECK(m(p, k) <= batch.prices(p, k));
            if (k > 0) CHECK(m(p, k) <= m(p, k - 1));
        }
    }

    // Monotone increasing path stays at s0.
    PathBatch rising;
    rising.grid = TimeGrid{3, 1.0, 1};
    rising.prices = Matrix(1, 4);
    for (int k = 0; k < 4; ++k) rising.prices(0, static_cast<std::size_t>(k)) = 10.0 + k;
    rising.variances = Matrix(1, 4);
    const Matrix mr = running_minimum(rising);
    for (std::size_t k = 0; k < 4; ++k) CHECK(mr(0, k) == 10.0);
}

TEST_CASE("paths cache round-trips and validates its key") {
    const PathBatch batch = simulate_heston(kPaperParams, kPaperGrid, 32, 1234);
    const std::string path = "test_paths_cache.bin";
    write_paths_cache(path, batch);
    const PathBatch loaded = read_paths_cache(path, kPaperParams, kPaperGrid, 32, 1234);
    CHECK(loaded.prices == batch.prices);
    CHECK(loaded.variances == batch.variances);
    CHECK(loaded.seed == batch.seed);
    CHECK_THROWS_AS(read_paths_cache(path, kPaperParams, kPaperGrid, 32, 999), ContractError);
    HestonParams other = kPaperParams;
    other.kappa = 1.0;
    CHECK_THROWS_AS(read_paths_cache(path, other, kPaperGrid, 32, 1234), ContractError);
    std::remove(path.c_str());
}
