#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rrh/common.hpp"

namespace rrh {

/// Output-layer activations. tanh_scaled squashes into (-bound, bound);
/// residual_linear adds the raw input back (input_dim must equal output_dim),
/// giving an exact identity map while the final layer is zero.
enum class OutputActivation { tanh_scaled, linear, residual_linear };

const char* to_string(OutputActivation a);
OutputActivation output_activation_from_string(const std::string& s);

/// Feed-forward architecture: SiLU hidden layers, one of the output
/// activations above. SiLU is x * sigmoid(x) = x / (1 + e^(-x)).
struct MLPSpec {
    int input_dim = 1;
    std::vector<int> hidden;
    int output_dim = 1;
    OutputActivation output_activation = OutputActivation::linear;
    double bound = 2.0;

    void validate() const;
    int param_count() const;
    bool operator==(const MLPSpec&) const = default;
};

/// Flat parameter vector. Layout per layer: weight matrix [out x in]
/// row-major, then bias [out].
struct MLPParams {
    MLPSpec spec;
    std::vector<double> values;
    std::uint64_t init_seed = 0;

    double checksum() const;
};

/// Fan-in-scaled uniform init U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every
/// layer, except that a residual_linear net gets a zero final layer so it
/// starts as the identity.
MLPParams init_mlp(const MLPSpec& spec, std::uint64_t seed);

/// Intermediate state captured by forward for use in backward. Tied to the
/// exact parameter values it was computed with. Hidden activations are not
/// stored: a_l = z_l * s_l is recomputed from the pre-activations and cached
/// sigmoids, which also gives the SiLU derivative without further exp calls.
struct ForwardCache {
    MLPSpec spec;
    double param_checksum = 0.0;
    Matrix inputs;
    std::vector<Matrix> preacts;   // z_l per layer (including the output layer)
    std::vector<Matrix> sigmoids;  // sigmoid(z_l) per hidden layer
    Matrix outputs;
};

/// Batched forward pass; fills cache when given.
Matrix mlp_forward(const MLPParams& params, const Matrix& inputs, ForwardCache* cache = nullptr);

/// Accumulated gradients of the scalar sum(upstream . outputs) with respect
/// to parameters and inputs.
struct GradBuffer {
    std::vector<double> param_grad;
    Matrix input_grad;

    void reset();
};

/// Reverse-mode pass. The cache must come from a forward with the same
/// parameter values (ContractError otherwise). Accumulates into grad.
void mlp_backward(const MLPParams& params, const ForwardCache& cache, const Matrix& upstream,
                  GradBuffer& grad);

/// Bias-corrected Adam.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;

    explicit AdamState(double learning_rate = 1e-3) : lr(learning_rate) {}
};

void adam_step(AdamState& state, MLPParams& params, const std::vector<double>& grad);

/// Checkpoint: one JSON header line (spec, seed, free-form metadata), then
/// one parameter value per line. Loading against an expected spec fails on
/// mismatch.
void save_checkpoint(const std::string& path, const MLPParams& params,
                     const std::map<std::string, std::string>& meta = {});
MLPParams load_checkpoint(const std::string& path, const MLPSpec* expected = nullptr,
                          std::map<std::string, std::string>* meta_out = nullptr);

}  // namespace rrh
