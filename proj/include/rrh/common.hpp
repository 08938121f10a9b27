#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace rrh {

/// Row-major dense matrix of doubles. Rows are contiguous so hot loops can
/// work on raw pointers.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Violation of an API contract (shape mismatch, stale cache, checkpoint
/// incompatibility). Distinct from bad numeric input, which throws
/// std::invalid_argument / std::domain_error.
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

/// Runtime failure during an optimisation loop (NaN wealth, divergence,
/// persistent constraint violation). Carries a diagnostic message.
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// Standard normal cdf / pdf.
inline double norm_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865475244); }
inline double norm_pdf(double z) { return 0.3989422804014326779 * std::exp(-0.5 * z * z); }

/// splitmix64 step; used to derive independent seed streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Deterministic stream derivation: the same (seed, stream) pair always maps
/// to the same substream seed, independent of call order.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (0xA0761D6478BD642FULL + stream * 0xE7037ED1A0B428DBULL);
    return splitmix64(s);
}

/// Seedable normal generator: mt19937_64 driving an explicit Box-Muller
/// transform. std::normal_distribution is implementation-defined, so runs
/// would not reproduce across standard libraries; this construction is
/// bit-stable everywhere mt19937_64 is.
class NormalPairRng {
public:
    explicit NormalPairRng(std::uint64_t seed) : gen_(seed) {}

    /// One Box-Muller pair per call; consumes exactly two 64-bit draws.
    std::pair<double, double> next_pair() {
        const double u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));  // u1 in [0,1) => 1-u1 in (0,1]
        const double a = 6.283185307179586477 * u2;
        return {r * std::cos(a), r * std::sin(a)};
    }

    double next_unit() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

private:
    std::mt19937_64 gen_;
};

/// Fixed-size block partition of [0, n). The block layout depends only on n,
/// never on the worker count, so any parallel schedule that reduces blocks in
/// index order reproduces the serial result bit-for-bit.
struct BlockRange {
    std::size_t begin;
    std::size_t end;
};

std::vector<BlockRange> block_partition(std::size_t n, std::size_t block_size = 256);

/// Runs fn(block_index, range) over the fixed partition. Worker count comes
/// from RRH_THREADS (default: hardware concurrency). fn must only write to
/// block-local state; combine per-block results in block order afterwards.
void parallel_for_blocks(std::size_t n, const std::function<void(std::size_t, BlockRange)>& fn,
                         std::size_t block_size = 256);

}  // namespace rrh
