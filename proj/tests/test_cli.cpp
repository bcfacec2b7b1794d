#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "navlab/bench.hpp"
#include "navlab/config.hpp"
#include "navlab/errors.hpp"
#include "navlab/replay.hpp"
#include "navlab/train.hpp"

using namespace navlab;
namespace fs = std::filesystem;

#ifndef NAVLAB_CLI_PATH
#define NAVLAB_CLI_PATH "navlab"
#endif

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(NAVLAB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Tiny everything: fast to train, still exercises the full pipeline.
const char* kTinyConfig =
    "world.extent_x = 10\n"
    "world.extent_y = 10\n"
    "world.extent_z = 4\n"
    "world.n_static = 0\n"
    "ray.n_h = 8\n"
    "ray.n_v = 3\n"
    "encoder.n_d = 3\n"
    "net.conv_extractors = false\n"
    "net.static_embed = 16\n"
    "net.dynamic_embed = 8\n"
    "net.trunk_width = 16\n"
    "ppo.batch = 4\n"
    "ppo.horizon = 8\n"
    "ppo.minibatch = 16\n"
    "curriculum.schedule = [2]\n"
    "train.total_steps = 96\n"
    "train.checkpoint_every = 1\n"
    "workers = 1\n";

fs::path write_tiny_config(const fs::path& dir) {
    const fs::path p = dir / "tiny.cfg";
    std::ofstream f(p);
    f << kTinyConfig;
    return p;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("config round trip is the identity") {
    ExperimentConfig cfg;
    cfg.set("world.extent_x", "17.25");
    cfg.set("ppo.lr", "0.00025");
    cfg.set("curriculum.schedule", "[4, 8, 15]");
    cfg.set("net.conv_extractors", "false");
    cfg.set("out_dir", "runs/exp1");
    cfg.finalize();

    const std::string text = cfg.serialize();
    const ExperimentConfig again = ExperimentConfig::from_string(text);
    CHECK(again.serialize() == text);
    CHECK(again.env.world.extent.x == 17.25);
    CHECK(again.ppo.lr == 0.00025);
    CHECK(again.curriculum.schedule == std::vector<int>{4, 8, 15});
    CHECK_FALSE(again.net.conv_extractors);
}

TEST_CASE("unknown keys and bad values are rejected with line numbers") {
    CHECK_THROWS_WITH_AS(
        ExperimentConfig::from_string("ppo.lr = 0.001\nbogus.key = 1\n", "test.cfg"),
        "test.cfg:2: unknown key 'bogus.key'", ConfigError);
    CHECK_THROWS_AS(
        ExperimentConfig::from_string("ppo.epochs = banana\n", "test.cfg"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_string("just some words\n"), ConfigError);
}

TEST_CASE("environment overrides layer between file and flags") {
    setenv("NAVLAB_PPO__GAMMA", "0.97", 1);
    ExperimentConfig cfg = ExperimentConfig::from_string("ppo.gamma = 0.5\n");
    cfg.apply_env_overrides();
    CHECK(cfg.ppo.gamma == 0.97);
    unsetenv("NAVLAB_PPO__GAMMA");
}

TEST_CASE("train writes metrics, checkpoints, and resumes the update index") {
    const fs::path dir = fresh_dir("navlab_cli_train");
    const fs::path cfg_path = write_tiny_config(dir);
    const fs::path out = dir / "run";

    const int rc = run_cli("--config " + cfg_path.string() + " --seed 3 --out " +
                           out.string() + " train");
    REQUIRE(rc == 0);

    const std::string metrics = slurp(out / "metrics.csv");
    CHECK(metrics.find("update,steps,mean_return") == 0);
    // 96 steps at 4x8 per update = 3 rows.
    CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 4);
    REQUIRE(fs::exists(out / "checkpoint_latest.ckpt"));

    // Resume continues the update numbering.
    const fs::path out2 = dir / "resumed";
    const int rc2 = run_cli("--config " + cfg_path.string() + " --seed 3 --out " +
                            out2.string() + " --set train.total_steps=32 train --resume " +
                            (out / "checkpoint_latest.ckpt").string());
    REQUIRE(rc2 == 0);
    const std::string m2 = slurp(out2 / "metrics.csv");
    std::istringstream is(m2);
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    CHECK(row.substr(0, 2) == "4,");  // first logged update continues at 4
}

TEST_CASE("identical seeds produce byte-identical metrics") {
    const fs::path dir = fresh_dir("navlab_cli_det");
    const fs::path cfg_path = write_tiny_config(dir);
    const fs::path o1 = dir / "a", o2 = dir / "b";
    REQUIRE(run_cli("--config " + cfg_path.string() + " --seed 11 --out " + o1.string() +
                    " --deterministic train") == 0);
    REQUIRE(run_cli("--config " + cfg_path.string() + " --seed 11 --out " + o2.string() +
                    " --deterministic train") == 0);
    CHECK(slurp(o1 / "metrics.csv") == slurp(o2 / "metrics.csv"));
    CHECK(slurp(o1 / "metrics.csv") != "");
}

TEST_CASE("bench report accounting, pairing, and replay verification") {
    const fs::path dir = fresh_dir("navlab_cli_bench");
    const fs::path cfg_path = write_tiny_config(dir);
    const fs::path train_out = dir / "train";
    REQUIRE(run_cli("--config " + cfg_path.string() + " --seed 3 --out " +
                    train_out.string() + " train") == 0);
    const std::string ckpt = (train_out / "checkpoint_latest.ckpt").string();

    ExperimentConfig cfg = ExperimentConfig::from_file(cfg_path.string());
    cfg.env.timeout_steps = 60;
    cfg.seed = 5;
    cfg.finalize();

    BenchOptions opt;
    opt.cfg = cfg;
    opt.checkpoint = ckpt;
    opt.n_runs = 3;
    opt.shield_on = true;
    opt.replay_dir = (dir / "replays_on").string();
    const BenchReport on = run_bench(opt);

    // Episode accounting identity per class.
    for (const auto& c : on.classes) {
        CHECK(c.episodes == 3);
        CHECK(c.successes + c.collision_episodes + c.timeouts == c.episodes);
    }

    // Paired seeds: identical worlds -> identical obstacle trajectories. The
    // replay headers and obstacle streams must match between on and off.
    BenchOptions off = opt;
    off.shield_on = false;
    off.replay_dir = (dir / "replays_off").string();
    const BenchReport off_rep = run_bench(off);
    CHECK(off_rep.classes.size() == on.classes.size());

    // Replay logs verify through the CLI (exit 0) and fail loudly when
    // corrupted.
    int verified = 0;
    for (const auto& entry : fs::directory_iterator(dir / "replays_on")) {
        REQUIRE(run_cli("replay " + entry.path().string()) == 0);
        ++verified;
    }
    CHECK(verified == 9);  // 3 classes x 3 runs

    // Corrupt one record: schema error, exit 2.
    const fs::path victim = *fs::directory_iterator(dir / "replays_on");
    std::string content = slurp(victim);
    const size_t pos = content.find("\"tick\"");
    REQUIRE(pos != std::string::npos);
    content.replace(pos, 6, "\"tic");
    {
        std::ofstream f(victim);
        f << content;
    }
    CHECK(run_cli("replay " + victim.string()) == 2);
}

TEST_CASE("paired-seed bench worlds share obstacle trajectories") {
    const fs::path dir = fresh_dir("navlab_cli_paired");
    // Compare the logged obstacle streams tick by tick between shield on/off
    // replays of the same episode seed (created in the bench test flow).
    ExperimentConfig cfg = ExperimentConfig::from_string(kTinyConfig);
    cfg.env.timeout_steps = 40;
    cfg.env.world.n_dynamic = 2;
    cfg.finalize();

    Env e1(cfg.env, 777);
    Env e2(cfg.env, 777);
    e1.terminate_on_collision = false;
    e2.terminate_on_collision = false;
    Rng r(4);
    for (int t = 0; t < 40; ++t) {
        // Different robot controls, same worlds.
        e1.step({r.uniform(-1, 1), r.uniform(-1, 1), 0});
        e2.step({0.5, -0.25, 0.1});
        REQUIRE(e1.obstacles().size() == e2.obstacles().size());
        for (size_t i = 0; i < e1.obstacles().size(); ++i) {
            CHECK((e1.obstacles()[i].pos - e2.obstacles()[i].pos).norm() == 0.0);
            CHECK((e1.obstacles()[i].vel - e2.obstacles()[i].vel).norm() == 0.0);
        }
    }
}

TEST_CASE("cli exit codes") {
    const fs::path dir = fresh_dir("navlab_cli_exit");
    SUBCASE("bad config file is a config error") {
        const fs::path bad = dir / "bad.cfg";
        std::ofstream(bad) << "nonsense.key = 1\n";
        CHECK(run_cli("--config " + bad.string() + " train") == 2);
    }
    SUBCASE("missing required flag is a usage error") {
        CHECK(run_cli("bench") == 2);
    }
    SUBCASE("missing replay file is a config error") {
        CHECK(run_cli("replay /nonexistent/file.jsonl") == 2);
    }
    SUBCASE("inspect-checkpoint on garbage fails gracefully") {
        const fs::path junk = dir / "junk.ckpt";
        std::ofstream(junk) << "not a checkpoint";
        CHECK(run_cli("inspect-checkpoint " + junk.string()) != 0);
    }
}

TEST_SUITE_END();
