// Command-line driver: wires configs to simulation, training, evaluation,
// pricing and the phase sweep. Every run echoes its effective configuration
// and writes a provenance manifest into the output directory.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rrh/config.hpp"

namespace fs = std::filesystem;
using namespace rrh;

namespace {

constexpr const char* kToolVersion = "rrhedge 0.1.0";

struct Overrides {
    std::vector<std::pair<std::string, std::string>> kv;

    void add(const std::string& key, const std::string& value) { kv.emplace_back(key, value); }
    void apply(ExperimentConfig& config) const {
        for (const auto& [k, v] : kv) apply_config_key(config, k, v);
    }
    bool empty() const { return kv.empty(); }
};

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string seed;
    std::vector<std::string> sets;
    Overrides overrides;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "configuration file (section.key = value)");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "training seed (train.seed)");
    cmd->add_option("--set", args.sets, "extra key=value assignment (repeatable)");
}

// Named per-parameter override flags; stored as config-key assignments.
void add_override_flags(CLI::App* cmd, CommonArgs& args) {
    static const std::vector<std::pair<std::string, std::string>> flags = {
        {"--s0", "market.s0"},         {"--v0", "market.v0"},
        {"--drift", "market.mu"},      {"--kappa", "market.kappa"},
        {"--theta", "market.theta"},   {"--xi", "market.xi"},
        {"--rho", "market.rho"},       {"--strike", "option.strike"},
        {"--barrier", "option.barrier"}, {"--option-kind", "option.kind"},
        {"--alpha", "risk.alpha"},     {"--beta", "risk.beta"},
        {"--p-weight", "risk.p_weight"}, {"--cost", "cost.c"},
        {"--epsilon", "robust.epsilon"}, {"--batch-size", "train.batch_size"},
        {"--iterations", "train.iterations"}, {"--lr", "train.lr_policy"},
        {"--n-paths", "eval.n_paths"}, {"--eval-seed", "eval.seed"},
    };
    for (const auto& [flag, key] : flags) {
        const std::string key_copy = key;
        cmd->add_option_function<std::string>(
            flag, [&args, key_copy](const std::string& v) { args.overrides.add(key_copy, v); },
            "override " + key_copy);
    }
}

ExperimentConfig base_config(const CommonArgs& args) {
    ExperimentConfig config =
        args.config_path.empty() ? ExperimentConfig{} : parse_config_file(args.config_path);
    for (const std::string& kv : args.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("--set expects key=value, got: " + kv);
        }
        apply_config_key(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!args.seed.empty()) apply_config_key(config, "train.seed", args.seed);
    if (!args.out_dir.empty()) config.out_dir = args.out_dir;
    return config;
}

class RunDir {
public:
    RunDir(const ExperimentConfig& config, const std::string& command)
        : dir_(config.out_dir), command_(command), start_(std::chrono::steady_clock::now()) {
        fs::create_directories(dir_);
        const std::string echo = echo_config(config);
        std::ofstream os(path("config_effective.cfg"), std::ios::binary);
        if (!os) throw std::runtime_error("cannot write config echo in " + dir_);
        os << echo;
        outputs_.push_back("config_effective.cfg");
        seed_ = config.train.seed;
        eval_seed_ = config.eval_seed;
    }

    std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }
    void note_output(const std::string& name) { outputs_.push_back(name); }

    void write_manifest() const {
        nlohmann::json m;
        m["tool"] = kToolVersion;
        m["command"] = command_;
        m["train_seed"] = seed_;
        m["eval_seed"] = eval_seed_;
        m["outputs"] = outputs_;
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        m["wall_time_seconds"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count() / 1000.0;
        std::ofstream os(path("manifest.json"), std::ios::binary);
        os << m.dump(2) << "\n";
    }

private:
    std::string dir_;
    std::string command_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::string> outputs_;
    std::uint64_t seed_ = 0;
    std::uint64_t eval_seed_ = 0;
};

std::map<std::string, std::string> checkpoint_meta(const ExperimentConfig& config,
                                                   const std::string& mode) {
    std::map<std::string, std::string> meta;
    char buf[64];
    auto put = [&](const char* key, double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        meta[key] = buf;
    };
    meta["mode"] = mode;
    meta["option.kind"] = to_string(config.option.kind);
    put("option.strike", config.option.strike);
    put("option.barrier", config.option.barrier);
    put("cost.c", config.cost.c);
    put("risk.alpha", config.risk_alpha);
    put("risk.beta", config.risk_beta);
    put("risk.p_weight", config.risk_p_weight);
    meta["features"] = config.cost.active() ? "t/T,S/S0,M/S0,hit,prev_delta" : "t/T,S/S0,M/S0,hit";
    return meta;
}

MLPParams load_policy(const std::string& path, const ExperimentConfig& config) {
    MLPParams policy = load_checkpoint(path);
    if (policy.spec.input_dim != feature_dim(config.cost)) {
        throw ContractError(
            "checkpoint feature dimension does not match the evaluation cost setting (" +
            std::to_string(policy.spec.input_dim) + " vs " +
            std::to_string(feature_dim(config.cost)) + ")");
    }
    return policy;
}

int cmd_simulate(const CommonArgs& args) {
    ExperimentConfig config = base_config(args);
    args.overrides.apply(config);
    config.validate();
    RunDir run(config, "simulate");

    const PathBatch batch = simulate_heston(config.market, config.grid, config.eval_n_paths,
                                            config.eval_seed);
    write_paths_csv(run.path("paths.csv"), batch);
    run.note_output("paths.csv");
    write_paths_cache(run.path("paths.bin"), batch);
    run.note_output("paths.bin");
    run.write_manifest();
    return 0;
}

int cmd_train(const CommonArgs& args, const std::string& mode) {
    ExperimentConfig config = base_config(args);
    args.overrides.apply(config);
    if (mode == "nonrobust" && config.robust_keys_present) {
        throw std::invalid_argument("config: robust.* keys require --mode robust");
    }
    if (mode == "robust") config.robust_keys_present = true;  // echoed with its section
    config.validate();
    RunDir run(config, "train");

    const UtilitySpec utility = UtilitySpec::identity();
    TrainResult result;
    if (mode == "robust") {
        result = train_robust(config.train, config.robust, config.problem(), config.distortion(),
                              utility, config.policy_spec(), config.adversary_spec());
    } else {
        result = train_nonrobust(config.train, config.problem(), config.distortion(), utility,
                                 config.policy_spec());
    }

    save_checkpoint(run.path("policy.ckpt"), result.policy, checkpoint_meta(config, mode));
    run.note_output("policy.ckpt");
    if (result.adversary) {
        save_checkpoint(run.path("adversary.ckpt"), *result.adversary,
                        checkpoint_meta(config, mode));
        run.note_output("adversary.ckpt");
    }
    write_history_csv(run.path("history.csv"), result.history);
    run.note_output("history.csv");
    run.write_manifest();
    if (result.diverged) {
        std::cerr << "error: training diverged: " << result.message << "\n";
        return 2;
    }
    return 0;
}

void write_report_csv(const std::string& path, const std::vector<EvaluationReport>& reports) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "strategy,option,premium,risk,cvar_reported,se,lte,ute,n_paths,seed\n";
    char buf[320];
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%llu\n",
                      r.strategy_id.c_str(), to_string(r.option.kind), r.premium, r.risk,
                      r.reported, r.reported_se, r.lte, r.ute, r.n_paths,
                      static_cast<unsigned long long>(r.seed));
        os << buf;
    }
}

int cmd_evaluate(const CommonArgs& args, const std::string& checkpoint, double premium,
                 bool episode_csv) {
    ExperimentConfig config = base_config(args);
    args.overrides.apply(config);
    config.validate();
    RunDir run(config, "evaluate");

    const MLPParams policy = load_policy(checkpoint, config);
    const EvaluationReport rep = evaluate_policy(
        policy, config.problem(), config.distortion(), UtilitySpec::identity(), config.risk_alpha,
        config.risk_beta, config.eval_n_paths, config.eval_seed, premium);

    write_pnl_csv(run.path("pnl.csv"), rep.wealth);
    run.note_output("pnl.csv");
    write_tv_csv(run.path("tv.csv"), rep.total_variation);
    run.note_output("tv.csv");
    write_report_csv(run.path("report.csv"), {rep});
    run.note_output("report.csv");
    if (episode_csv) {
        write_episode_csv(run.path("episode.csv"), rep.episode, config.grid);
        run.note_output("episode.csv");
    }
    run.write_manifest();
    return 0;
}

int cmd_price(const CommonArgs& args, const std::string& checkpoint, double target) {
    // The agent prices under its own (possibly misspecified) model: the base
    // config, with the traded contract and cost taken from the checkpoint
    // metadata. Override flags describe the actual market used only for the
    // reported-CVaR column.
    ExperimentConfig agent_config = base_config(args);
    {
        std::map<std::string, std::string> meta;
        load_checkpoint(checkpoint, nullptr, &meta);
        for (const char* key : {"cost.c", "option.kind", "option.strike", "option.barrier"}) {
            const auto it = meta.find(key);
            if (it != meta.end()) apply_config_key(agent_config, key, it->second);
        }
    }
    ExperimentConfig actual_config = agent_config;
    args.overrides.apply(actual_config);
    agent_config.validate();
    actual_config.validate();
    RunDir run(actual_config, "price");

    const UtilitySpec utility = UtilitySpec::identity();
    const DistortionSpec gamma = DistortionSpec::cvar(agent_config.risk_alpha);
    const double alpha = agent_config.risk_alpha;
    const double beta = agent_config.risk_beta;
    const MLPParams policy = load_policy(checkpoint, agent_config);

    const std::uint64_t sigma_seed = mix_seed(agent_config.eval_seed, 0x51);
    const double sigma = matched_sigma_for(agent_config.market, agent_config.grid,
                                           agent_config.eval_n_paths, sigma_seed);

    // Prices from the agent's model.
    const EvaluationReport policy_rep =
        evaluate_policy(policy, agent_config.problem(), gamma, utility, alpha, beta,
                        agent_config.eval_n_paths, agent_config.eval_seed, 0.0);
    const double policy_price = price_to_target(policy_rep, gamma, utility, target);

    const EvaluationReport bs_rep =
        evaluate_bs_benchmark(agent_config.problem(), sigma, gamma, utility, alpha, beta,
                              agent_config.eval_n_paths, agent_config.eval_seed, 0.0);
    const double bs_price = price_to_target(bs_rep, gamma, utility, target);

    const double closed_form = bs_barrier_price(agent_config.problem().option,
                                                agent_config.market.s0, sigma,
                                                agent_config.grid.maturity, false);

    // Reported CVaR of charging each price under the actual model.
    const EvaluationReport policy_actual =
        evaluate_policy(policy, actual_config.problem(), gamma, utility, alpha, beta,
                        actual_config.eval_n_paths, actual_config.eval_seed, policy_price);
    const EvaluationReport bs_actual =
        evaluate_bs_benchmark(actual_config.problem(), sigma, gamma, utility, alpha, beta,
                              actual_config.eval_n_paths, actual_config.eval_seed, bs_price);

    const std::string option_name = to_string(agent_config.option.kind);
    std::vector<PricingRow> rows;
    rows.push_back({"policy", option_name, policy_price, true, policy_actual.reported});
    rows.push_back({"bs_delta", option_name, bs_price, true, bs_actual.reported});
    rows.push_back({"bs_closed_form", option_name, closed_form, false, 0.0});
    write_pricing_csv(run.path("pricing.csv"), rows);
    run.note_output("pricing.csv");
    run.write_manifest();
    return 0;
}

int cmd_sweep(const CommonArgs& args, double p_from, double p_to, double p_step,
              const std::vector<double>& p_list) {
    ExperimentConfig config = base_config(args);
    args.overrides.apply(config);
    config.validate();
    RunDir run(config, "sweep");

    std::vector<double> grid = p_list;
    if (grid.empty()) {
        if (!(p_step > 0.0) || p_to < p_from) {
            throw std::invalid_argument("sweep: invalid p grid bounds");
        }
        for (double p = p_from; p <= p_to + 1e-12; p += p_step) grid.push_back(p);
    }
    for (double p : grid) {
        if (!(p > 0.0) || p > 1.0) throw std::invalid_argument("sweep: p values must be in (0,1]");
    }

    const auto rows = phase_sweep(config.problem(), config.risk_alpha, config.risk_beta, grid,
                                  config.train, config.policy_spec(), config.eval_n_paths,
                                  config.eval_seed);
    write_sweep_csv(run.path("sweep.csv"), rows);
    run.note_output("sweep.csv");
    run.write_manifest();
    std::cout << "phase jump detected near p = " << detect_phase_jump(rows) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(kToolVersion) +
                 " - robust risk-aware hedging of barrier options"};
    app.require_subcommand(1);

    CommonArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "simulate Heston paths to CSV and binary cache");
    add_common_flags(sim, sim_args);
    add_override_flags(sim, sim_args);

    CommonArgs train_args;
    std::string mode = "nonrobust";
    auto* train = app.add_subcommand("train", "train a hedging policy");
    add_common_flags(train, train_args);
    add_override_flags(train, train_args);
    train->add_option("--mode", mode, "nonrobust|robust")
        ->check(CLI::IsMember({"nonrobust", "robust"}));

    CommonArgs eval_args;
    std::string eval_ckpt;
    double eval_premium = 0.0;
    bool episode_csv = false;
    auto* eval = app.add_subcommand("evaluate", "evaluate a trained policy checkpoint");
    add_common_flags(eval, eval_args);
    add_override_flags(eval, eval_args);
    eval->add_option("--checkpoint", eval_ckpt, "policy checkpoint")->required();
    eval->add_option("--premium", eval_premium, "initial premium added to wealth");
    eval->add_flag("--episode-csv", episode_csv, "also write per-step holdings CSV");

    CommonArgs price_args;
    std::string price_ckpt;
    double price_target = -0.5;
    auto* price = app.add_subcommand("price", "translation-price to a CVaR target");
    add_common_flags(price, price_args);
    add_override_flags(price, price_args);
    price->add_option("--checkpoint", price_ckpt, "policy checkpoint")->required();
    price->add_option("--target", price_target, "target reported CVaR");

    CommonArgs sweep_args;
    double p_from = 0.70, p_to = 1.00, p_step = 0.01;
    std::vector<double> p_list;
    auto* sweep = app.add_subcommand("sweep", "train across loss weights p and tabulate LTE/UTE");
    add_common_flags(sweep, sweep_args);
    add_override_flags(sweep, sweep_args);
    sweep->add_option("--p-from", p_from, "grid start");
    sweep->add_option("--p-to", p_to, "grid end");
    sweep->add_option("--p-step", p_step, "grid step");
    sweep->add_option("--p-grid", p_list, "explicit p values (overrides from/to/step)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(sim_args);
        if (train->parsed()) return cmd_train(train_args, mode);
        if (eval->parsed()) return cmd_evaluate(eval_args, eval_ckpt, eval_premium, episode_csv);
        if (price->parsed()) return cmd_price(price_args, price_ckpt, price_target);
        if (sweep->parsed()) return cmd_sweep(sweep_args, p_from, p_to, p_step, p_list);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
