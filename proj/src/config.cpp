#include "rrh/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace rrh {

void ExperimentConfig::validate() const {
    problem().validate();
    distortion().validate();
    train.validate();
    robust.validate();
    if (policy_hidden_layers < 1 || policy_width < 1 || adversary_width < 1) {
        throw std::invalid_argument("config: network sizes must be >= 1");
    }
    if (!(policy_bound > 0.0)) throw std::invalid_argument("config: policy.bound must be positive");
    if (eval_n_paths < 2) throw std::invalid_argument("config: eval.n_paths must be >= 2");
}

HedgingProblem ExperimentConfig::problem() const {
    HedgingProblem p;
    p.market = market;
    p.grid = grid;
    p.option = option;
    p.option.maturity = grid.maturity;
    p.cost = cost;
    return p;
}

DistortionSpec ExperimentConfig::distortion() const {
    return DistortionSpec::alpha_beta(risk_alpha, risk_beta, risk_p_weight);
}

MLPSpec ExperimentConfig::policy_spec() const {
    MLPSpec spec;
    spec.input_dim = feature_dim(cost);
    spec.hidden.assign(static_cast<std::size_t>(policy_hidden_layers), policy_width);
    spec.output_dim = 1;
    spec.output_activation = OutputActivation::tanh_scaled;
    spec.bound = policy_bound;
    return spec;
}

MLPSpec ExperimentConfig::adversary_spec() const {
    MLPSpec spec;
    spec.input_dim = 1;
    spec.hidden = {adversary_width};
    spec.output_dim = 1;
    spec.output_activation = OutputActivation::residual_linear;
    return spec;
}

namespace {

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad numeric value for key '" + key + "': " + value);
    }
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad integer value for key '" + key + "': " + value);
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad seed value for key '" + key + "': " + value);
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::invalid_argument("config: bad boolean value for key '" + key + "': " + value);
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

void apply_config_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
    if (key == "market.s0") c.market.s0 = parse_double(key, value);
    else if (key == "market.v0") c.market.v0 = parse_double(key, value);
    else if (key == "market.mu") c.market.mu = parse_double(key, value);
    else if (key == "market.kappa") c.market.kappa = parse_double(key, value);
    else if (key == "market.theta") c.market.theta = parse_double(key, value);
    else if (key == "market.xi") c.market.xi = parse_double(key, value);
    else if (key == "market.rho") c.market.rho = parse_double(key, value);
    else if (key == "grid.n_steps") c.grid.n_steps = parse_int(key, value);
    else if (key == "grid.maturity") c.grid.maturity = parse_double(key, value);
    else if (key == "grid.trade_every") c.grid.trade_every = parse_int(key, value);
    else if (key == "option.kind") c.option.kind = barrier_kind_from_string(value);
    else if (key == "option.strike") c.option.strike = parse_double(key, value);
    else if (key == "option.barrier") c.option.barrier = parse_double(key, value);
    else if (key == "risk.alpha") c.risk_alpha = parse_double(key, value);
    else if (key == "risk.beta") c.risk_beta = parse_double(key, value);
    else if (key == "risk.p_weight") c.risk_p_weight = parse_double(key, value);
    else if (key == "cost.c") c.cost.c = parse_double(key, value);
    else if (key == "train.batch_size") c.train.batch_size = parse_int(key, value);
    else if (key == "train.iterations") c.train.iterations = parse_int(key, value);
    else if (key == "train.lr_policy") c.train.lr_policy = parse_double(key, value);
    else if (key == "train.lr_adversary") c.train.lr_adversary = parse_double(key, value);
    else if (key == "train.seed") c.train.seed = parse_u64(key, value);
    else if (key == "train.resimulate_per_batch") c.train.resimulate_per_batch = parse_bool(key, value);
    else if (key == "robust.epsilon") { c.robust.epsilon = parse_double(key, value); c.robust_keys_present = true; }
    else if (key == "robust.order") { c.robust.order = parse_double(key, value); c.robust_keys_present = true; }
    else if (key == "robust.lambda") { c.robust.lambda = parse_double(key, value); c.robust_keys_present = true; }
    else if (key == "robust.mu") { c.robust.mu = parse_double(key, value); c.robust_keys_present = true; }
    else if (key == "robust.mu_growth") { c.robust.mu_growth = parse_double(key, value); c.robust_keys_present = true; }
    else if (key == "robust.inner_steps") { c.robust.inner_steps = parse_int(key, value); c.robust_keys_present = true; }
    else if (key == "robust.outer_steps") { c.robust.outer_steps = parse_int(key, value); c.robust_keys_present = true; }
    else if (key == "policy.hidden_layers") c.policy_hidden_layers = parse_int(key, value);
    else if (key == "policy.width") c.policy_width = parse_int(key, value);
    else if (key == "policy.bound") c.policy_bound = parse_double(key, value);
    else if (key == "adversary.width") c.adversary_width = parse_int(key, value);
    else if (key == "eval.n_paths") c.eval_n_paths = parse_int(key, value);
    else if (key == "eval.seed") c.eval_seed = parse_u64(key, value);
    else if (key == "output.dir") c.out_dir = value;
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig config;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                        " is not 'key = value': " + line);
        }
        apply_config_key(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return config;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str());
}

std::string echo_config(const ExperimentConfig& c) {
    std::ostringstream os;
    char buf[128];
    auto put = [&](const char* key, double v) {
        std::snprintf(buf, sizeof(buf), "%s = %.17g\n", key, v);
        os << buf;
    };
    auto put_i = [&](const char* key, long long v) { os << key << " = " << v << "\n"; };
    put("market.s0", c.market.s0);
    put("market.v0", c.market.v0);
    put("market.mu", c.market.mu);
    put("market.kappa", c.market.kappa);
    put("market.theta", c.market.theta);
    put("market.xi", c.market.xi);
    put("market.rho", c.market.rho);
    put_i("grid.n_steps", c.grid.n_steps);
    put("grid.maturity", c.grid.maturity);
    put_i("grid.trade_every", c.grid.trade_every);
    os << "option.kind = " << to_string(c.option.kind) << "\n";
    put("option.strike", c.option.strike);
    put("option.barrier", c.option.barrier);
    put("risk.alpha", c.risk_alpha);
    put("risk.beta", c.risk_beta);
    put("risk.p_weight", c.risk_p_weight);
    put("cost.c", c.cost.c);
    put_i("train.batch_size", c.train.batch_size);
    put_i("train.iterations", c.train.iterations);
    put("train.lr_policy", c.train.lr_policy);
    put("train.lr_adversary", c.train.lr_adversary);
    os << "train.seed = " << c.train.seed << "\n";
    os << "train.resimulate_per_batch = " << (c.train.resimulate_per_batch ? "true" : "false") << "\n";
    if (c.robust_keys_present) {
        put("robust.epsilon", c.robust.epsilon);
        put("robust.order", c.robust.order);
        put("robust.lambda", c.robust.lambda);
        put("robust.mu", c.robust.mu);
        put("robust.mu_growth", c.robust.mu_growth);
        put_i("robust.inner_steps", c.robust.inner_steps);
        put_i("robust.outer_steps", c.robust.outer_steps);
    }
    put_i("policy.hidden_layers", c.policy_hidden_layers);
    put_i("policy.width", c.policy_width);
    put("policy.bound", c.policy_bound);
    put_i("adversary.width", c.adversary_width);
    put_i("eval.n_paths", c.eval_n_paths);
    os << "eval.seed = " << c.eval_seed << "\n";
    os << "output.dir = " << c.out_dir << "\n";
    return os.str();
}

}  // namespace rrh
