#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <sys/wait.h>

#include "sqrt_trust/config.hpp"
#include "sqrt_trust/runner.hpp"

using namespace sqrt_trust;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("sqrt_trust_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int cli(const std::string& args) {
    const std::string cmd = std::string(SQRT_TRUST_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

config::ExperimentConfig tiny(const fs::path& root) {
    config::ExperimentConfig c;
    c.env = "cartpole";
    c.seeds = {0, 1};
    c.total_steps = 512;
    c.train.rollout_len = 256;
    c.train.update.epochs = 2;
    c.train.eval_episodes = 2;
    c.output_root = root;
    return c;
}

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("seed lists") {
    CHECK(config::parse_seeds("0..3") == std::vector<std::uint64_t>{0, 1, 2, 3});
    CHECK(config::parse_seeds("5") == std::vector<std::uint64_t>{5});
    CHECK(config::parse_seeds("0..1,7") == std::vector<std::uint64_t>{0, 1, 7});
    CHECK_THROWS_AS(config::parse_seeds("3..1"), std::invalid_argument);
    CHECK_THROWS_AS(config::parse_seeds("a"), std::invalid_argument);
    CHECK_THROWS_AS(config::parse_seeds("-1"), std::invalid_argument);
}

TEST_CASE("config text round trip") {
    config::ExperimentConfig c;
    config::set_value(c, "algorithm", "ppo_reg");
    config::set_value(c, "regularizer", "jeffreys");
    config::set_value(c, "lr", "0.0001");
    config::set_value(c, "gamma", "0.999");
    config::set_value(c, "seeds", "0..2,9");
    config::set_value(c, "saturation_c", "3.5");
    config::set_value(c, "hidden", "32,16");
    config::set_value(c, "per_minibatch_normalization", "true");
    config::set_value(c, "entropy_coef", "0.1");
    const auto text = config::serialize(c);
    const auto back = config::parse(text);
    CHECK(back == c);
    CHECK(config::serialize(back) == text);
    CHECK(back.train.learning_rate == 0.0001);
    CHECK(back.train.update.surrogate.entropy_coef == 0.1);
    CHECK(back.train.update.surrogate.saturation_c == 3.5);
    CHECK(back.train.hidden == std::vector<std::size_t>{32, 16});
}

TEST_CASE("config file parsing and errors") {
    const auto dir = scratch("config");
    std::ofstream(dir / "exp.cfg") << "# comment\n\nenv = mountaincar_continuous\nalgorithm=btrpo\n  beta = 1.5 \n";
    config::ExperimentConfig c;
    config::apply_file(c, dir / "exp.cfg");
    CHECK(c.env == "mountaincar_continuous");
    CHECK(c.algorithm == learners::Algorithm::btrpo);
    CHECK(c.train.update.surrogate.beta == 1.5);

    CHECK_THROWS_AS(config::set_value(c, "colour", "red"), std::invalid_argument);
    CHECK_THROWS_AS(config::set_value(c, "lr", "fast"), std::invalid_argument);
    CHECK_THROWS_AS(config::set_value(c, "algorithm", "sac"), std::invalid_argument);
    CHECK_THROWS_AS(config::set_value(c, "env", "atari"), std::invalid_argument);
    CHECK_THROWS_AS(config::set_value(c, "scale_observations", "maybe"), std::invalid_argument);
    std::istringstream bad("no equals sign\n");
    CHECK_THROWS_AS(config::parse_key_values(bad), std::invalid_argument);
    CHECK_THROWS_AS(config::apply_file(c, dir / "missing.cfg"), std::invalid_argument);

    config::ExperimentConfig v;
    v.seeds = {1, 1};
    CHECK_THROWS_AS(v.validate(), std::invalid_argument);
    v.seeds = {};
    CHECK_THROWS_AS(v.validate(), std::invalid_argument);
    v.seeds = {0};
    v.total_steps = 100;
    CHECK_THROWS_AS(v.validate(), std::invalid_argument);
}

TEST_CASE("grid expansion") {
    using runner::GridAxis;
    const auto clip_grid = runner::expand_grid({runner::parse_grid_axis("epsilon=0.1,0.2,0.5"),
                                                runner::parse_grid_axis("batch_size=8192,16384,32768"),
                                                runner::parse_grid_axis("lr=1e-4,3e-4,1e-3")});
    CHECK(clip_grid.size() == 27);
    CHECK(clip_grid[0][0] == std::pair<std::string, std::string>{"epsilon", "0.1"});
    CHECK(clip_grid[26][2] == std::pair<std::string, std::string>{"lr", "1e-3"});
    const auto beta_grid = runner::expand_grid({runner::parse_grid_axis("beta=0,0.1,1,2,5"),
                                                runner::parse_grid_axis("batch_size=8192,16384,32768"),
                                                runner::parse_grid_axis("lr=1e-4,3e-4,1e-3")});
    CHECK(beta_grid.size() == 45);
    CHECK_THROWS_AS(runner::expand_grid({}), std::invalid_argument);
    CHECK_THROWS_AS(runner::parse_grid_axis("epsilon="), std::invalid_argument);
    CHECK_THROWS_AS(runner::parse_grid_axis("epsilon"), std::invalid_argument);
    CHECK_THROWS_AS(runner::parse_grid_axis("warp=1,2"), std::invalid_argument);
    CHECK_THROWS_AS(runner::parse_grid_axis("seeds=1,2"), std::invalid_argument);
}

TEST_CASE("grid axes map onto config fields") {
    config::ExperimentConfig c;
    runner::apply_axis_value(c, "batch_size", "8192");
    CHECK(c.train.rollout_len == 8192);
    config::set_value(c, "algorithm", "btrpo");
    runner::apply_axis_value(c, "beta", "5");
    CHECK(c.train.update.surrogate.beta == 5.0);
    config::set_value(c, "algorithm", "trpo_kl");
    runner::apply_axis_value(c, "beta", "0.5");
    CHECK(c.train.update.surrogate.lambda_pen == 0.5);
    CHECK(runner::beta_or_eps(c.train.update) == 0.5);
}

TEST_CASE("run directories, manifest and isolation") {
    const auto root = scratch("runs");
    auto c = tiny(root / "seq");
    const auto seq = runner::run_experiment(c, 1);
    REQUIRE(seq.size() == 2);
    for (const auto& o : seq) {
        CHECK(o.completed);
        for (const char* f : {"manifest.json", "metrics.csv", "config.txt", "policy.ckpt", "value.ckpt"})
            CHECK(fs::exists(o.dir / f));
    }
    CHECK(seq[1].dir == root / "seq" / "cartpole" / "bppo" / "seed1");

    c.output_root = root / "par";
    const auto par = runner::run_experiment(c, 2);
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(slurp(seq[i].dir / "metrics.csv") == slurp(par[i].dir / "metrics.csv"));

    // Re-launching from the stored config snapshot reproduces the metrics.
    auto again = config::parse(slurp(seq[1].dir / "config.txt"));
    again.output_root = root / "again";
    const auto rerun = runner::run_experiment(again, 1);
    REQUIRE(rerun.size() == 1);
    CHECK(slurp(rerun[0].dir / "metrics.csv") == slurp(seq[1].dir / "metrics.csv"));

    const auto agg = runner::aggregate_directory(root / "seq", root / "seq");
    CHECK(agg.rows.size() == 1);
    CHECK(fs::exists(root / "seq" / "iqm_report.csv"));
    CHECK(fs::exists(root / "seq" / "curves.csv"));
}

TEST_CASE("failed seeds are recorded and others continue") {
    const auto root = scratch("failing");
    auto c = tiny(root);
    c.seeds = {0};
    fs::create_directories(root / "cartpole" / "bppo");
    std::ofstream(root / "cartpole" / "bppo" / "seed0") << "a file where a directory should be";
    c.seeds = {0, 1};
    const auto outcomes = runner::run_experiment(c, 1);
    CHECK_FALSE(outcomes[0].completed);
    CHECK_FALSE(outcomes[0].error.empty());
    CHECK(outcomes[1].completed);
}

TEST_CASE("sweep writes one summary row per cell") {
    const auto root = scratch("sweep");
    auto c = tiny(root);
    c.seeds = {0};
    const auto cells = runner::run_sweep(c, {learners::Algorithm::bppo, learners::Algorithm::ppo},
                                         {runner::parse_grid_axis("epsilon=0.1,0.3")}, 1);
    CHECK(cells.size() == 2);
    std::ifstream in(root / "sweep_summary.csv");
    std::string header, line;
    std::getline(in, header);
    CHECK(header == "cell,epsilon,final_bppo,final_ppo");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 2);
    CHECK(fs::exists(root / "cell_1" / "cartpole" / "ppo" / "seed0" / "metrics.csv"));
}

TEST_CASE("command line contract") {
    const auto root = scratch("cli");
    CHECK(cli("train --algo nonsense --out " + root.string()) == 2);
    CHECK(cli("train --steps lots --out " + root.string()) == 2);
    CHECK(cli("train --no-such-flag") == 2);
    CHECK(cli("verify --list") == 0);
    CHECK(cli("verify --only bc_kl_equivalence --perturb-bc 0.01") == 1);
    CHECK(cli("verify --only bc_kl_equivalence,bc_closed_form") == 2);
    CHECK(cli("sweep --out " + root.string()) == 2);
    CHECK(cli("aggregate --out " + (root / "nothing").string()) == 1);

    const std::string common = " --env cartpole --algo bppo --seeds 0 --steps 512 --rollout-len 256 --epochs 1 "
                               "--eval-episodes 2";
    CHECK(cli("train" + common + " --out " + (root / "t").string()) == 0);
    CHECK(cli("sweep" + common + " --grid lr=0.0003 --out " + (root / "s").string()) == 0);
    CHECK(slurp(root / "t" / "cartpole" / "bppo" / "seed0" / "metrics.csv") ==
          slurp(root / "s" / "cell_0" / "cartpole" / "bppo" / "seed0" / "metrics.csv"));
    CHECK(cli("aggregate --out " + (root / "t").string()) == 0);
    CHECK(fs::exists(root / "t" / "iqm_report.csv"));

    // Config file values are overridden by flags; the output root falls back to the environment.
    std::ofstream(root / "exp.cfg") << "env = frozenlake\nrollout_len = 128\ntotal_steps = 256\nepochs = 1\n"
                                       "eval_episodes = 1\nseeds = 3\n";
    const std::string env_root = (root / "from_env").string();
    const std::string cmd = "SQRT_TRUST_OUT=" + env_root + " " + SQRT_TRUST_CLI + " train --config " +
                            (root / "exp.cfg").string() + " --algo btrpo > /dev/null 2>&1";
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(root / "from_env" / "frozenlake" / "btrpo" / "seed3" / "manifest.json"));
}

}
