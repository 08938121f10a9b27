#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rrh/config.hpp"

using namespace rrh;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("defaults carry the benchmark parameters") {
    const ExperimentConfig config;
    CHECK(config.market.s0 == 10.0);
    CHECK(config.market.v0 == 0.09);
    CHECK(config.market.mu == 0.08);
    CHECK(config.market.kappa == 3.0);
    CHECK(config.market.theta == 0.09);
    CHECK(config.market.xi == 2.0);
    CHECK(config.market.rho == -0.5);
    CHECK(config.grid.n_steps == 200);
    CHECK(config.grid.maturity == 1.0);
    CHECK(config.grid.trade_every == 4);
    CHECK(config.option.kind == BarrierKind::knock_in);
    CHECK(config.option.strike == 10.0);
    CHECK(config.option.barrier == 8.5);
    CHECK(config.risk_alpha == 0.2);
    CHECK(config.risk_p_weight == 1.0);
    CHECK(config.cost.c == 0.0);
    CHECK(config.robust.epsilon == 0.02);
    CHECK(config.robust.order == 1.0);
    CHECK(config.policy_hidden_layers == 5);
    CHECK(config.policy_width == 35);
    CHECK(config.policy_bound == 2.0);
    CHECK(config.adversary_width == 10);
    config.validate();
}

TEST_CASE("parsing applies keys and flags errors with the offending key") {
    const ExperimentConfig config = parse_config_text(
        "# comment line\n"
        "market.kappa = 1.0\n"
        "option.kind = knock_out\n"
        "cost.c = 0.01   # inline comment\n"
        "train.seed = 99\n");
    CHECK(config.market.kappa == 1.0);
    CHECK(config.option.kind == BarrierKind::knock_out);
    CHECK(config.cost.c == 0.01);
    CHECK(config.train.seed == 99);
    CHECK_FALSE(config.robust_keys_present);

    CHECK_THROWS_WITH_AS(parse_config_text("market.banana = 1\n"),
                         doctest::Contains("market.banana"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config_text("market.kappa = abc\n"),
                         doctest::Contains("market.kappa"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("not a key value line\n"), std::invalid_argument);
}

TEST_CASE("robust keys mark the robust section as present") {
    const ExperimentConfig config = parse_config_text("robust.epsilon = 0.05\n");
    CHECK(config.robust_keys_present);
    CHECK(config.robust.epsilon == 0.05);
}

TEST_CASE("echo round-trips the effective configuration") {
    ExperimentConfig config = parse_config_text(
        "market.rho = -0.1\n"
        "risk.p_weight = 0.7\n"
        "robust.mu = 20\n"
        "train.iterations = 123\n"
        "output.dir = some/dir\n");
    const std::string echo = echo_config(config);
    const ExperimentConfig round = parse_config_text(echo);
    CHECK(echo_config(round) == echo);
    CHECK(round.market.rho == -0.1);
    CHECK(round.risk_p_weight == 0.7);
    CHECK(round.robust.mu == 20.0);
    CHECK(round.train.iterations == 123);
    CHECK(round.out_dir == "some/dir");
}

TEST_CASE("derived specs follow the configuration") {
    ExperimentConfig config;
    CHECK(config.policy_spec().input_dim == 4);
    CHECK(config.policy_spec().hidden == std::vector<int>(5, 35));
    CHECK(config.policy_spec().output_activation == OutputActivation::tanh_scaled);
    CHECK(config.policy_spec().bound == 2.0);

    config.cost.c = 0.01;
    CHECK(config.policy_spec().input_dim == 5);

    const MLPSpec adv = config.adversary_spec();
    CHECK(adv.input_dim == 1);
    CHECK(adv.hidden == std::vector<int>{10});
    CHECK(adv.output_activation == OutputActivation::residual_linear);

    const HedgingProblem problem = config.problem();
    CHECK(problem.option.maturity == config.grid.maturity);
    CHECK(problem.option.kind == config.option.kind);
}

TEST_CASE("distortion spec comes from the risk section") {
    ExperimentConfig config;
    config.risk_alpha = 0.1;
    config.risk_beta = 0.9;
    config.risk_p_weight = 0.7;
    const DistortionSpec gamma = config.distortion();
    CHECK(gamma_weight(0.05, gamma) == doctest::Approx(7.0));
    CHECK(gamma_weight(0.95, gamma) == doctest::Approx(3.0));
}

#ifdef RRHEDGE_BIN
TEST_CASE("cli simulate is byte-identical across runs with the same seed") {
    const fs::path dir1 = fs::temp_directory_path() / "rrh_cli_test_a";
    const fs::path dir2 = fs::temp_directory_path() / "rrh_cli_test_b";
    fs::remove_all(dir1);
    fs::remove_all(dir2);

    const std::string base = std::string(RRHEDGE_BIN) +
                             " simulate --set eval.n_paths=64 --set grid.n_steps=20"
                             " --set eval.seed=31415 --out ";
    REQUIRE(std::system((base + dir1.string()).c_str()) == 0);
    REQUIRE(std::system((base + dir2.string()).c_str()) == 0);

    CHECK(slurp(dir1 / "paths.csv") == slurp(dir2 / "paths.csv"));

    // The echoed config reproduces the run byte-for-byte.
    const fs::path dir3 = fs::temp_directory_path() / "rrh_cli_test_c";
    fs::remove_all(dir3);
    const std::string from_echo = std::string(RRHEDGE_BIN) + " simulate --config " +
                                  (dir1 / "config_effective.cfg").string() + " --out " +
                                  dir3.string();
    REQUIRE(std::system(from_echo.c_str()) == 0);
    CHECK(slurp(dir3 / "paths.csv") == slurp(dir1 / "paths.csv"));

    fs::remove_all(dir1);
    fs::remove_all(dir2);
    fs::remove_all(dir3);
}

TEST_CASE("cli rejects a malformed config with a nonzero exit") {
    const fs::path bad = fs::temp_directory_path() / "rrh_bad_config.cfg";
    std::ofstream(bad) << "market.unknown_key = 2\n";
    const std::string cmd = std::string(RRHEDGE_BIN) + " simulate --config " + bad.string() +
                            " --out " + (fs::temp_directory_path() / "rrh_bad_out").string() +
                            " 2> /dev/null";
    CHECK(std::system(cmd.c_str()) != 0);
    fs::remove(bad);
}

TEST_CASE("cli train, evaluate with overrides, and price run end to end") {
    const fs::path dir = fs::temp_directory_path() / "rrh_cli_e2e";
    fs::remove_all(dir);
    const std::string small =
        " --set grid.n_steps=20 --set grid.trade_every=4 --set train.batch_size=64"
        " --set train.iterations=3 --set policy.hidden_layers=1 --set policy.width=6"
        " --set eval.n_paths=200 --seed 5";

    const std::string train_cmd = std::string(RRHEDGE_BIN) + " train --mode nonrobust" + small +
                                  " --cost 0.01 --out " + (dir / "train").string();
    REQUIRE(std::system(train_cmd.c_str()) == 0);
    REQUIRE(fs::exists(dir / "train" / "policy.ckpt"));
    REQUIRE(fs::exists(dir / "train" / "history.csv"));
    REQUIRE(fs::exists(dir / "train" / "manifest.json"));

    // Misspecified evaluation applies the overrides.
    const std::string eval_cmd = std::string(RRHEDGE_BIN) + " evaluate --checkpoint " +
                                 (dir / "train" / "policy.ckpt").string() + small +
                                 " --cost 0.01 --kappa 1 --rho -0.1 --episode-csv --out " +
                                 (dir / "eval").string();
    REQUIRE(std::system(eval_cmd.c_str()) == 0);
    REQUIRE(fs::exists(dir / "eval" / "pnl.csv"));
    REQUIRE(fs::exists(dir / "eval" / "tv.csv"));
    REQUIRE(fs::exists(dir / "eval" / "report.csv"));
    REQUIRE(fs::exists(dir / "eval" / "episode.csv"));
    const std::string echo = slurp(dir / "eval" / "config_effective.cfg");
    CHECK(echo.find("market.kappa = 1\n") != std::string::npos);
    CHECK(echo.find("market.rho = -0.1") != std::string::npos);

    // Evaluating a cost-trained checkpoint without costs is a contract error.
    const std::string bad_eval = std::string(RRHEDGE_BIN) + " evaluate --checkpoint " +
                                 (dir / "train" / "policy.ckpt").string() + small + " --out " +
                                 (dir / "bad").string() + " 2> /dev/null";
    CHECK(std::system(bad_eval.c_str()) != 0);

    const std::string price_cmd = std::string(RRHEDGE_BIN) + " price --checkpoint " +
                                  (dir / "train" / "policy.ckpt").string() + small +
                                  " --cost 0.01 --target -0.5 --out " + (dir / "price").string();
    REQUIRE(std::system(price_cmd.c_str()) == 0);
    const std::string pricing = slurp(dir / "price" / "pricing.csv");
    CHECK(pricing.rfind("scheme,option,price,cvar_reported\n", 0) == 0);
    CHECK(pricing.find("policy,knock_in,") != std::string::npos);
    CHECK(pricing.find("bs_delta,knock_in,") != std::string::npos);
    CHECK(pricing.find("bs_closed_form,knock_in,") != std::string::npos);

    fs::remove_all(dir);
}

TEST_CASE("cli refuses robust keys in nonrobust mode") {
    const fs::path cfg = fs::temp_directory_path() / "rrh_mode_config.cfg";
    std::ofstream(cfg) << "robust.epsilon = 0.02\ntrain.iterations = 1\n";
    const std::string cmd = std::string(RRHEDGE_BIN) + " train --mode nonrobust --config " +
                            cfg.string() + " --out " +
                            (fs::temp_directory_path() / "rrh_mode_out").string() +
                            " 2> /dev/null";
    CHECK(std::system(cmd.c_str()) != 0);
    fs::remove(cfg);
}
#endif
