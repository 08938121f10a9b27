#include "rrh/nn.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rrh {

const char* to_string(OutputActivation a) {
    switch (a) {
        case OutputActivation::tanh_scaled: return "tanh_scaled";
        case OutputActivation::linear: return "linear";
        case OutputActivation::residual_linear: return "residual_linear";
    }
    return "?";
}

OutputActivation output_activation_from_string(const std::string& s) {
    if (s == "tanh_scaled") return OutputActivation::tanh_scaled;
    if (s == "linear") return OutputActivation::linear;
    if (s == "residual_linear") return OutputActivation::residual_linear;
    throw std::invalid_argument("unknown output activation: " + s);
}

void MLPSpec::validate() const {
    if (input_dim < 1 || output_dim < 1) {
        throw std::invalid_argument("MLPSpec: dimensions must be >= 1");
    }
    for (int w : hidden) {
        if (w < 1) throw std::invalid_argument("MLPSpec: hidden widths must be >= 1");
    }
    if (output_activation == OutputActivation::tanh_scaled && !(bound > 0.0)) {
        throw std::invalid_argument("MLPSpec: tanh_scaled requires bound > 0");
    }
    if (output_activation == OutputActivation::residual_linear && input_dim != output_dim) {
        throw std::invalid_argument("MLPSpec: residual_linear requires input_dim == output_dim");
    }
}

namespace {

std::vector<int> layer_widths(const MLPSpec& spec) {
    std::vector<int> w;
    w.reserve(spec.hidden.size() + 2);
    w.push_back(spec.input_dim);
    for (int h : spec.hidden) w.push_back(h);
    w.push_back(spec.output_dim);
    return w;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

int MLPSpec::param_count() const {
    const auto widths = layer_widths(*this);
    int count = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        count += widths[l + 1] * (widths[l] + 1);
    }
    return count;
}

double MLPParams::checksum() const {
    double acc = static_cast<double>(values.size());
    for (double v : values) acc += v;
    return acc;
}

MLPParams init_mlp(const MLPSpec& spec, std::uint64_t seed) {
    spec.validate();
    MLPParams params;
    params.spec = spec;
    params.init_seed = seed;
    params.values.assign(static_cast<std::size_t>(spec.param_count()), 0.0);

    const auto widths = layer_widths(spec);
    const std::size_t n_layers = widths.size() - 1;
    std::size_t offset = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const int fan_in = widths[l];
        const int fan_out = widths[l + 1];
        const std::size_t count = static_cast<std::size_t>(fan_out) * (fan_in + 1);
        const bool zero_layer =
            spec.output_activation == OutputActivation::residual_linear && l == n_layers - 1;
        if (!zero_layer) {
            NormalPairRng rng(mix_seed(seed, l));
            const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (std::size_t i = 0; i < count; ++i) {
                params.values[offset + i] = scale * (2.0 * rng.next_unit() - 1.0);
            }
        }
        offset += count;
    }
    return params;
}

namespace {

/// Dot product over eight independent accumulator lanes so the compiler can
/// vectorise without reassociating a single FP reduction chain.
inline double dot(const double* __restrict__ a, const double* __restrict__ b, int n) {
    double lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        for (int k = 0; k < 8; ++k) lanes[k] += a[i + k] * b[i + k];
    }
    for (; i < n; ++i) lanes[i & 7] += a[i] * b[i];
    return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
           ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
}

/// z = x W^T + b over a batch of rows.
void affine_forward(const Matrix& x, const double* __restrict__ W, const double* __restrict__ b,
                    int in_w, int out_w, Matrix& z) {
    const std::size_t batch = x.rows();
    for (std::size_t r = 0; r < batch; ++r) {
        const double* __restrict__ xr = x.row(r);
        double* __restrict__ zr = z.row(r);
        for (int o = 0; o < out_w; ++o) {
            zr[o] = b[o] + dot(W + static_cast<std::size_t>(o) * in_w, xr, in_w);
        }
    }
}

}  // namespace

Matrix mlp_forward(const MLPParams& params, const Matrix& inputs, ForwardCache* cache) {
    params.spec.validate();
    if (inputs.cols() != static_cast<std::size_t>(params.spec.input_dim)) {
        throw ContractError("mlp_forward: input width mismatch");
    }
    if (params.values.size() != static_cast<std::size_t>(params.spec.param_count())) {
        throw ContractError("mlp_forward: parameter count mismatch");
    }

    const auto widths = layer_widths(params.spec);
    const std::size_t n_layers = widths.size() - 1;
    const std::size_t batch = inputs.rows();

    if (cache) {
        cache->spec = params.spec;
        cache->param_checksum = params.checksum();
        cache->inputs = inputs;
        cache->preacts.clear();
        cache->preacts.reserve(n_layers);
        cache->sigmoids.clear();
        cache->sigmoids.reserve(n_layers - 1);
    }

    Matrix current = inputs;
    std::size_t offset = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const int in_w = widths[l];
        const int out_w = widths[l + 1];
        const double* W = params.values.data() + offset;
        const double* b = W + static_cast<std::size_t>(out_w) * in_w;
        Matrix z(batch, static_cast<std::size_t>(out_w));
        affine_forward(current, W, b, in_w, out_w, z);

        const bool last = (l == n_layers - 1);
        if (!last) {
            Matrix s(batch, static_cast<std::size_t>(out_w));
            Matrix a(batch, static_cast<std::size_t>(out_w));
            for (std::size_t r = 0; r < batch; ++r) {
                const double* __restrict__ zr = z.row(r);
                double* __restrict__ sr = s.row(r);
                double* __restrict__ ar = a.row(r);
                for (int o = 0; o < out_w; ++o) {
                    sr[o] = sigmoid(zr[o]);
                    ar[o] = zr[o] * sr[o];
                }
            }
            if (cache) {
                cache->preacts.push_back(std::move(z));
                cache->sigmoids.push_back(std::move(s));
            }
            current = std::move(a);
        } else {
            Matrix y(batch, static_cast<std::size_t>(out_w));
            switch (params.spec.output_activation) {
                case OutputActivation::linear:
                    y = z;
                    break;
                case OutputActivation::tanh_scaled: {
                    const double bound = params.spec.bound;
                    for (std::size_t r = 0; r < batch; ++r) {
                        const double* __restrict__ zr = z.row(r);
                        double* __restrict__ yr = y.row(r);
                        for (int o = 0; o < out_w; ++o) yr[o] = bound * std::tanh(zr[o]);
                    }
                    break;
                }
                case OutputActivation::residual_linear:
                    for (std::size_t r = 0; r < batch; ++r) {
                        const double* __restrict__ zr = z.row(r);
                        const double* __restrict__ xr = inputs.row(r);
                        double* __restrict__ yr = y.row(r);
                        for (int o = 0; o < out_w; ++o) yr[o] = xr[o] + zr[o];
                    }
                    break;
            }
            if (cache) {
                cache->preacts.push_back(std::move(z));
                cache->outputs = y;
            }
            current = std::move(y);
        }
        offset += static_cast<std::size_t>(out_w) * (in_w + 1);
    }
    return current;
}

void GradBuffer::reset() {
    std::fill(param_grad.begin(), param_grad.end(), 0.0);
    std::fill(input_grad.data().begin(), input_grad.data().end(), 0.0);
}

void mlp_backward(const MLPParams& params, const ForwardCache& cache, const Matrix& upstream,
                  GradBuffer& grad) {
    if (!(cache.spec == params.spec) || cache.param_checksum != params.checksum()) {
        throw ContractError("mlp_backward: cache is stale for these parameters");
    }
    const auto widths = layer_widths(params.spec);
    const std::size_t n_layers = widths.size() - 1;
    const std::size_t batch = cache.inputs.rows();
    if (upstream.rows() != batch || upstream.cols() != static_cast<std::size_t>(params.spec.output_dim)) {
        throw ContractError("mlp_backward: upstream shape mismatch");
    }

    if (grad.param_grad.empty()) {
        grad.param_grad.assign(params.values.size(), 0.0);
    } else if (grad.param_grad.size() != params.values.size()) {
        throw ContractError("mlp_backward: grad buffer parameter shape mismatch");
    }
    if (grad.input_grad.empty()) {
        grad.input_grad = Matrix(batch, static_cast<std::size_t>(params.spec.input_dim));
    } else if (grad.input_grad.rows() != batch ||
               grad.input_grad.cols() != static_cast<std::size_t>(params.spec.input_dim)) {
        throw ContractError("mlp_backward: grad buffer input shape mismatch");
    }

    // Output activation derivative.
    Matrix gz = upstream;
    switch (params.spec.output_activation) {
        case OutputActivation::linear:
            break;
        case OutputActivation::tanh_scaled: {
            const double bound = params.spec.bound;
            for (std::size_t r = 0; r < batch; ++r) {
                const double* __restrict__ yr = cache.outputs.row(r);
                double* __restrict__ gr = gz.row(r);
                for (std::size_t o = 0; o < gz.cols(); ++o) {
                    gr[o] *= bound - yr[o] * yr[o] / bound;
                }
            }
            break;
        }
        case OutputActivation::residual_linear:
            // Identity path straight to the inputs.
            for (std::size_t r = 0; r < batch; ++r) {
                const double* __restrict__ ur = upstream.row(r);
                double* __restrict__ ir = grad.input_grad.row(r);
                for (std::size_t o = 0; o < upstream.cols(); ++o) ir[o] += ur[o];
            }
            break;
    }

    std::size_t layer_offsets_total = 0;
    std::vector<std::size_t> offsets(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        offsets[l] = layer_offsets_total;
        layer_offsets_total += static_cast<std::size_t>(widths[l + 1]) * (widths[l] + 1);
    }

    // Walk layers backwards; gz holds dLoss/dz_l.
    std::vector<double> a_prev_row;
    for (std::size_t l = n_layers; l-- > 0;) {
        const int in_w = widths[l];
        const int out_w = widths[l + 1];
        const double* W = params.values.data() + offsets[l];
        double* dW = grad.param_grad.data() + offsets[l];
        double* db = dW + static_cast<std::size_t>(out_w) * in_w;
        a_prev_row.resize(static_cast<std::size_t>(in_w));

        Matrix ga(batch, static_cast<std::size_t>(in_w));
        for (std::size_t r = 0; r < batch; ++r) {
            const double* __restrict__ gzr = gz.row(r);
            double* __restrict__ gar = ga.row(r);
            // a_{l-1} = z * sigmoid(z) for hidden layers, raw inputs for l=0.
            const double* __restrict__ ar;
            if (l == 0) {
                ar = cache.inputs.row(r);
            } else {
                const double* __restrict__ zr = cache.preacts[l - 1].row(r);
                const double* __restrict__ sr = cache.sigmoids[l - 1].row(r);
                for (int i = 0; i < in_w; ++i) a_prev_row[i] = zr[i] * sr[i];
                ar = a_prev_row.data();
            }
            for (int o = 0; o < out_w; ++o) {
                const double g = gzr[o];
                const double* __restrict__ w_row = W + static_cast<std::size_t>(o) * in_w;
                double* __restrict__ dw_row = dW + static_cast<std::size_t>(o) * in_w;
                for (int i = 0; i < in_w; ++i) {
                    dw_row[i] += g * ar[i];
                    gar[i] += g * w_row[i];
                }
                db[o] += g;
            }
        }

        if (l == 0) {
            for (std::size_t r = 0; r < batch; ++r) {
                const double* __restrict__ gar = ga.row(r);
                double* __restrict__ ir = grad.input_grad.row(r);
                for (int i = 0; i < in_w; ++i) ir[i] += gar[i];
            }
        } else {
            // SiLU derivative from the cached sigmoid: s (1 + z (1 - s)).
            const Matrix& z_prev = cache.preacts[l - 1];
            const Matrix& s_prev = cache.sigmoids[l - 1];
            gz = Matrix(batch, static_cast<std::size_t>(in_w));
            for (std::size_t r = 0; r < batch; ++r) {
                const double* __restrict__ gar = ga.row(r);
                const double* __restrict__ zr = z_prev.row(r);
                const double* __restrict__ sr = s_prev.row(r);
                double* __restrict__ gzr = gz.row(r);
                for (int i = 0; i < in_w; ++i) {
                    gzr[i] = gar[i] * (sr[i] * (1.0 + zr[i] * (1.0 - sr[i])));
                }
            }
        }
    }
}

void adam_step(AdamState& state, MLPParams& params, const std::vector<double>& grad) {
    if (grad.size() != params.values.size()) {
        throw ContractError("adam_step: gradient shape mismatch");
    }
    if (state.m.empty()) {
        state.m.assign(params.values.size(), 0.0);
        state.v.assign(params.values.size(), 0.0);
    } else if (state.m.size() != params.values.size()) {
        throw ContractError("adam_step: state shape mismatch");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.values.size(); ++i) {
        const double g = grad[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params.values[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
}

void save_checkpoint(const std::string& path, const MLPParams& params,
                     const std::map<std::string, std::string>& meta) {
    nlohmann::json header;
    header["format"] = "rrh-mlp-1";
    header["input_dim"] = params.spec.input_dim;
    header["hidden"] = params.spec.hidden;
    header["output_dim"] = params.spec.output_dim;
    header["output_activation"] = to_string(params.spec.output_activation);
    header["bound"] = params.spec.bound;
    header["init_seed"] = params.init_seed;
    header["meta"] = meta;

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << header.dump() << "\n";
    char buf[64];
    for (double v : params.values) {
        std::snprintf(buf, sizeof(buf), "%.17g\n", v);
        os << buf;
    }
}

MLPParams load_checkpoint(const std::string& path, const MLPSpec* expected,
                          std::map<std::string, std::string>* meta_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    std::string header_line;
    if (!std::getline(is, header_line)) throw std::runtime_error("checkpoint: missing header");
    nlohmann::json header = nlohmann::json::parse(header_line);
    if (header.value("format", "") != std::string("rrh-mlp-1")) {
        throw std::runtime_error("checkpoint: unknown format in " + path);
    }

    MLPParams params;
    params.spec.input_dim = header.at("input_dim").get<int>();
    params.spec.hidden = header.at("hidden").get<std::vector<int>>();
    params.spec.output_dim = header.at("output_dim").get<int>();
    params.spec.output_activation =
        output_activation_from_string(header.at("output_activation").get<std::string>());
    params.spec.bound = header.at("bound").get<double>();
    params.init_seed = header.at("init_seed").get<std::uint64_t>();
    if (meta_out && header.contains("meta")) {
        *meta_out = header.at("meta").get<std::map<std::string, std::string>>();
    }

    if (expected && !(params.spec == *expected)) {
        throw ContractError("checkpoint spec mismatch: " + path);
    }

    params.values.reserve(static_cast<std::size_t>(params.spec.param_count()));
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        params.values.push_back(std::strtod(line.c_str(), nullptr));
    }
    if (params.values.size() != static_cast<std::size_t>(params.spec.param_count())) {
        throw ContractError("checkpoint parameter count mismatch: " + path);
    }
    return params;
}

}  // namespace rrh
