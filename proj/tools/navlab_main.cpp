#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "navlab/bench.hpp"
#include "navlab/config.hpp"
#include "navlab/errors.hpp"
#include "navlab/replay.hpp"
#include "navlab/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitDeterminism = 4;

struct GlobalArgs {
    std::string config_path;
    std::vector<std::string> sets;
    int64_t seed = -1;
    int workers = -1;
    std::string out_dir;
    bool deterministic = false;
};

navlab::ExperimentConfig build_config(const GlobalArgs& g) {
    navlab::ExperimentConfig cfg;
    if (!g.config_path.empty()) cfg = navlab::ExperimentConfig::from_file(g.config_path);
    cfg.apply_env_overrides();
    for (const std::string& kv : g.sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw navlab::ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (g.seed >= 0) cfg.seed = static_cast<uint64_t>(g.seed);
    if (g.workers >= 0) cfg.workers = g.workers;
    if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
    if (g.deterministic) cfg.workers = 1;
    cfg.finalize();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"navlab: velocity-obstacle-shielded RL navigation lab"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "experiment config file");
    app.add_option("--set", g.sets, "override config entry, key=value")->take_all();
    app.add_option("--seed", g.seed, "master seed");
    app.add_option("--workers", g.workers, "worker threads (0 = hardware)");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_flag("--deterministic", g.deterministic, "single worker, fixed streams");

    auto* cmd_train = app.add_subcommand("train", "train a policy");
    std::string resume;
    cmd_train->add_option("--resume", resume, "resume from checkpoint");

    auto* cmd_bench = app.add_subcommand("bench", "benchmark a trained policy");
    std::string checkpoint;
    int n_runs = 20;
    std::string shield_mode = "on";
    bool no_replays = false;
    cmd_bench->add_option("--checkpoint", checkpoint, "policy checkpoint")->required();
    cmd_bench->add_option("--runs", n_runs, "episodes per scenario class");
    cmd_bench->add_option("--shield", shield_mode, "on|off")
        ->check(CLI::IsMember({"on", "off"}));
    cmd_bench->add_flag("--no-replays", no_replays, "skip writing replay logs");

    auto* cmd_replay = app.add_subcommand("replay", "verify an episode replay log");
    std::string log_path, csv_path;
    cmd_replay->add_option("log", log_path, "replay JSON-lines file")->required();
    cmd_replay->add_option("--csv", csv_path, "write trajectory CSV");

    auto* cmd_inspect = app.add_subcommand("inspect-checkpoint", "print checkpoint info");
    std::string ckpt_path;
    cmd_inspect->add_option("checkpoint", ckpt_path, "checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (cmd_train->parsed()) {
            navlab::TrainOptions opt;
            opt.cfg = build_config(g);
            opt.resume_checkpoint = resume;
            const navlab::TrainResult r = navlab::run_training(opt);
            if (r.aborted_numeric) {
                std::fprintf(stderr,
                             "non-finite loss; diagnostics checkpoint written to %s\n",
                             (opt.cfg.out_dir + "/diagnostics.ckpt").c_str());
                return kExitNumeric;
            }
            std::printf("done: %lld updates, %lld steps, best success %.3f, level %d\n",
                        static_cast<long long>(r.updates),
                        static_cast<long long>(r.steps), r.best_success_rate,
                        r.max_level);
            return kExitOk;
        }

        if (cmd_bench->parsed()) {
            navlab::BenchOptions opt;
            opt.cfg = build_config(g);
            opt.checkpoint = checkpoint;
            opt.n_runs = n_runs;
            opt.shield_on = shield_mode == "on";
            opt.seed = opt.cfg.seed;
            opt.quiet = false;
            std::filesystem::create_directories(opt.cfg.out_dir);
            if (!no_replays)
                opt.replay_dir =
                    opt.cfg.out_dir + "/replays_" + (opt.shield_on ? "on" : "off");
            const navlab::BenchReport report = navlab::run_bench(opt);
            const std::string json_path = opt.cfg.out_dir + "/bench_" +
                                          (opt.shield_on ? "on" : "off") + ".json";
            std::ofstream jf(json_path);
            jf << report.to_json() << "\n";
            std::printf("%s", report.to_table().c_str());
            std::printf("report: %s\n", json_path.c_str());
            return kExitOk;
        }

        if (cmd_replay->parsed()) {
            const navlab::ReplayResult r = navlab::verify_replay(log_path, csv_path);
            if (!r.hash_match) {
                std::fprintf(stderr,
                             "nondeterminism detected: hash %s, log claims %s\n",
                             r.actual_hash.c_str(), r.expected_hash.c_str());
                return kExitDeterminism;
            }
            std::printf("ok: %d ticks, outcome %s, %d contact events, hash %s\n",
                        r.ticks, navlab::outcome_name(r.outcome), r.collisions,
                        r.actual_hash.c_str());
            return kExitOk;
        }

        if (cmd_inspect->parsed()) {
            const navlab::nn::CheckpointInfo info =
                navlab::nn::read_checkpoint_info(ckpt_path);
            std::printf("version: %u\n", info.version);
            std::printf("arch_hash: %016llx\n",
                        static_cast<unsigned long long>(info.arch_hash));
            std::printf("updates: %llu\n", static_cast<unsigned long long>(info.counter));
            std::printf("parameters: %llu\n",
                        static_cast<unsigned long long>(info.param_count));
            std::printf("extractors: %s\n",
                        info.config.conv_extractors ? "conv" : "dense");
            std::printf("embeds: static %d dynamic %d trunk %d\n",
                        info.config.static_embed, info.config.dynamic_embed,
                        info.config.trunk_width);
            std::printf("state dims: n_h %d n_v %d n_d %d\n", info.config.n_h,
                        info.config.n_v, info.config.n_d);
            std::printf("optimizer: %s (step %lld)\n",
                        info.has_optimizer ? "adam" : "none",
                        static_cast<long long>(info.adam_step));
            return kExitOk;
        }
    } catch (const navlab::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const navlab::DeterminismError& e) {
        std::fprintf(stderr, "determinism error: %s\n", e.what());
        return kExitDeterminism;
    } catch (const navlab::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    }
    return kExitOk;
}
