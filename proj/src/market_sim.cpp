#include "rrh/market_sim.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rrh {

namespace {

bool finite(double x) { return std::isfinite(x); }

}  // namespace

void HestonParams::validate() const {
    if (!finite(s0) || !finite(v0) || !finite(mu) || !finite(kappa) || !finite(theta) ||
        !finite(xi) || !finite(rho)) {
        throw std::invalid_argument("HestonParams: non-finite parameter");
    }
    if (s0 <= 0.0) throw std::invalid_argument("HestonParams: s0 must be positive");
    if (v0 < 0.0) throw std::invalid_argument("HestonParams: v0 must be nonnegative");
    if (kappa < 0.0) throw std::invalid_argument("HestonParams: kappa must be nonnegative");
    if (theta < 0.0) throw std::invalid_argument("HestonParams: theta must be nonnegative");
    if (xi < 0.0) throw std::invalid_argument("HestonParams: xi must be nonnegative");
    if (std::abs(rho) > 1.0) throw std::invalid_argument("HestonParams: |rho| must be <= 1");
}

void TimeGrid::validate() const {
    if (n_steps < 1) throw std::invalid_argument("TimeGrid: n_steps must be >= 1");
    if (!(maturity > 0.0) || !finite(maturity)) {
        throw std::invalid_argument("TimeGrid: maturity must be positive");
    }
    if (trade_every < 1) throw std::invalid_argument("TimeGrid: trade_every must be >= 1");
    if (n_steps % trade_every != 0) {
        throw std::invalid_argument("TimeGrid: n_steps must be divisible by trade_every");
    }
}

PathBatch simulate_heston(const HestonParams& params, const TimeGrid& grid, int n_paths,
                          std::uint64_t seed) {
    params.validate();
    grid.validate();
    if (n_paths < 1) throw std::invalid_argument("simulate_heston: n_paths must be >= 1");

    const int n = grid.n_steps;
    const double dt = grid.dt();
    const double sqrt_dt = std::sqrt(dt);
    const double rho = params.rho;
    const double rho_c = std::sqrt(std::max(0.0, 1.0 - rho * rho));

    PathBatch batch;
    batch.prices = Matrix(static_cast<std::size_t>(n_paths), static_cast<std::size_t>(n + 1));
    batch.variances = Matrix(static_cast<std::size_t>(n_paths), static_cast<std::size_t>(n + 1));
    batch.seed = seed;
    batch.params = params;
    batch.grid = grid;

    parallel_for_blocks(static_cast<std::size_t>(n_paths), [&](std::size_t, BlockRange r) {
        for (std::size_t p = r.begin; p < r.end; ++p) {
            NormalPairRng rng(mix_seed(seed, p));
            double* price = batch.prices.row(p);
            double* var = batch.variances.row(p);
            double log_s = std::log(params.s0);
            double v = params.v0;  // raw state; may dip below zero
            price[0] = params.s0;
            var[0] = std::max(v, 0.0);
            for (int k = 0; k < n; ++k) {
                const auto [z1, z2] = rng.next_pair();
                const double z_s = z1;
                const double z_v = rho * z1 + rho_c * z2;
                const double v_plus = std::max(v, 0.0);
                const double vol = std::sqrt(v_plus);
                log_s += (params.mu - 0.5 * v_plus) * dt + vol * sqrt_dt * z_s;
                v += params.kappa * (params.theta - v_plus) * dt + params.xi * vol * sqrt_dt * z_v;
                price[k + 1] = std::exp(log_s);
                var[k + 1] = std::max(v, 0.0);
            }
        }
    });
    return batch;
}

PathBatch simulate_gbm(double s0, double mu, double sigma, const TimeGrid& grid, int n_paths,
                       std::uint64_t seed) {
    if (!(s0 > 0.0) || !finite(s0)) throw std::invalid_argument("simulate_gbm: s0 must be positive");
    if (sigma < 0.0 || !finite(sigma)) {
        throw std::invalid_argument("simulate_gbm: sigma must be nonnegative");
    }
    if (!finite(mu)) throw std::invalid_argument("simulate_gbm: mu must be finite");
    grid.validate();
    if (n_paths < 1) throw std::invalid_argument("simulate_gbm: n_paths must be >= 1");

    const int n = grid.n_steps;
    const double dt = grid.dt();
    const double drift = (mu - 0.5 * sigma * sigma) * dt;
    const double diff = sigma * std::sqrt(dt);

    PathBatch batch;
    batch.prices = Matrix(static_cast<std::size_t>(n_paths), static_cast<std::size_t>(n + 1));
    batch.variances =
        Matrix(static_cast<std::size_t>(n_paths), static_cast<std::size_t>(n + 1), sigma * sigma);
    batch.seed = seed;
    batch.params = HestonParams{s0, sigma * sigma, mu, 0.0, sigma * sigma, 0.0, 0.0};
    batch.grid = grid;

    parallel_for_blocks(static_cast<std::size_t>(n_paths), [&](std::size_t, BlockRange r) {
        for (std::size_t p = r.begin; p < r.end; ++p) {
            NormalPairRng rng(mix_seed(seed, p));
            double* price = batch.prices.row(p);
            double log_s = std::log(s0);
            price[0] = s0;
            for (int k = 0; k < n; ++k) {
                const auto [z1, z2] = rng.next_pair();
                (void)z2;  // draw pattern matches simulate_heston
                log_s += drift + diff * z1;
                price[k + 1] = std::exp(log_s);
            }
        }
    });
    return batch;
}

Matrix running_minimum(const PathBatch& batch) {
    const std::size_t rows = batch.prices.rows();
    const std::size_t cols = batch.prices.cols();
    Matrix m(rows, cols);
    for (std::size_t p = 0; p < rows; ++p) {
        const double* price = batch.prices.row(p);
        double* out = m.row(p);
        double running = price[0];
        for (std::size_t k = 0; k < cols; ++k) {
            running = std::min(running, price[k]);
            out[k] = running;
        }
    }
    return m;
}

void write_paths_csv(std::ostream& os, const PathBatch& batch) {
    os << "path_id,step,time,price,variance\n";
    char buf[160];
    for (std::size_t p = 0; p < batch.n_paths(); ++p) {
        for (std::size_t k = 0; k < batch.prices.cols(); ++k) {
            std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g,%.17g,%.17g\n", p, k,
                          batch.grid.time_at_step(static_cast<int>(k)), batch.prices(p, k),
                          batch.variances(p, k));
            os << buf;
        }
    }
}

void write_paths_csv(const std::string& path, const PathBatch& batch) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_paths_csv(os, batch);
}

namespace {

constexpr char kCacheMagic[8] = {'R', 'R', 'H', 'P', 'A', 'T', 'H', '1'};

struct CacheKey {
    HestonParams params;
    TimeGrid grid;
    std::uint64_t n_paths;
    std::uint64_t seed;
};

void write_raw(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_raw(std::istream& is, void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is) throw std::runtime_error("path cache: truncated file");
}

}  // namespace

void write_paths_cache(const std::string& path, const PathBatch& batch) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_raw(os, kCacheMagic, sizeof(kCacheMagic));
    const double key_d[10] = {batch.params.s0,    batch.params.v0,  batch.params.mu,
                              batch.params.kappa, batch.params.theta, batch.params.xi,
                              batch.params.rho,   batch.grid.maturity,
                              static_cast<double>(batch.grid.n_steps),
                              static_cast<double>(batch.grid.trade_every)};
    write_raw(os, key_d, sizeof(key_d));
    const std::uint64_t key_i[2] = {batch.n_paths(), batch.seed};
    write_raw(os, key_i, sizeof(key_i));
    write_raw(os, batch.prices.data().data(), batch.prices.data().size() * sizeof(double));
    write_raw(os, batch.variances.data().data(), batch.variances.data().size() * sizeof(double));
}

PathBatch read_paths_cache(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    char magic[8];
    read_raw(is, magic, sizeof(magic));
    if (std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("path cache: bad magic in " + path);
    }
    double key_d[10];
    read_raw(is, key_d, sizeof(key_d));
    std::uint64_t key_i[2];
    read_raw(is, key_i, sizeof(key_i));

    PathBatch batch;
    batch.params = HestonParams{key_d[0], key_d[1], key_d[2], key_d[3], key_d[4], key_d[5], key_d[6]};
    batch.grid = TimeGrid{static_cast<int>(key_d[8]), key_d[7], static_cast<int>(key_d[9])};
    batch.seed = key_i[1];
    const auto n_paths = static_cast<std::size_t>(key_i[0]);
    const auto cols = static_cast<std::size_t>(batch.grid.n_steps) + 1;
    batch.prices = Matrix(n_paths, cols);
    batch.variances = Matrix(n_paths, cols);
    read_raw(is, batch.prices.data().data(), batch.prices.data().size() * sizeof(double));
    read_raw(is, batch.variances.data().data(), batch.variances.data().size() * sizeof(double));
    return batch;
}

PathBatch read_paths_cache(const std::string& path, const HestonParams& params,
                           const TimeGrid& grid, int n_paths, std::uint64_t seed) {
    PathBatch batch = read_paths_cache(path);
    if (!(batch.params == params) || !(batch.grid == grid) ||
        batch.n_paths() != static_cast<std::size_t>(n_paths) || batch.seed != seed) {
        throw ContractError("path cache key mismatch: " + path);
    }
    return batch;
}

}  // namespace rrh
