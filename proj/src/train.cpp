#include "navlab/train.hpp"

#include <chrono>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <thread>

#include "navlab/errors.hpp"
#include "navlab/thread_pool.hpp"

namespace navlab {

namespace {

// Trailing-window episode statistics used for the metrics stream.
struct EpisodeWindow {
    explicit EpisodeWindow(int size) : size_(size) {}

    void push(Outcome outcome, double ret) {
        entries_.push_back({outcome, ret});
        while (static_cast<int>(entries_.size()) > size_) entries_.pop_front();
    }

    double success_rate() const { return rate(Outcome::success); }
    double collision_rate() const { return rate(Outcome::collision); }
    double mean_return() const {
        if (entries_.empty()) return 0.0;
        double acc = 0.0;
        for (const auto& e : entries_) acc += e.ret;
        return acc / static_cast<double>(entries_.size());
    }
    int count() const { return static_cast<int>(entries_.size()); }

private:
    double rate(Outcome o) const {
        if (entries_.empty()) return 0.0;
        int n = 0;
        for (const auto& e : entries_)
            if (e.outcome == o) ++n;
        return static_cast<double>(n) / static_cast<double>(entries_.size());
    }

    struct Entry {
        Outcome outcome;
        double ret;
    };
    int size_;
    std::deque<Entry> entries_;
};

void write_row(std::ofstream& f, const TrainStats& s) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%lld,%lld,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(s.update), static_cast<long long>(s.steps),
                  s.mean_return, s.success_rate, s.collision_rate, s.level,
                  s.policy_loss, s.value_loss, s.kl, s.clip_fraction);
    f << buf;
    f.flush();
}

}  // namespace

TrainResult run_training(const TrainOptions& opt) {
    ExperimentConfig cfg = opt.cfg;
    cfg.finalize();

    const int workers = cfg.workers > 0
                            ? cfg.workers
                            : static_cast<int>(std::thread::hardware_concurrency());
    if (ThreadPool::global().workers() != workers) ThreadPool::global().resize(workers);

    std::filesystem::create_directories(cfg.out_dir);
    TrainResult result;
    result.metrics_path = cfg.out_dir + "/metrics.csv";
    result.best_checkpoint = cfg.out_dir + "/checkpoint_best.ckpt";
    result.last_checkpoint = cfg.out_dir + "/checkpoint_latest.ckpt";

    Rng master(cfg.seed);
    const uint64_t env_seed = Rng::mix_seed(cfg.seed, 100);
    const uint64_t net_seed = Rng::mix_seed(cfg.seed, 200);
    Rng sample_rng(Rng::mix_seed(cfg.seed, 300));
    Rng update_rng(Rng::mix_seed(cfg.seed, 400));
    (void)master;

    EnvBatch envs(cfg.env, cfg.ppo.batch, env_seed, cfg.curriculum);

    int64_t update_idx = 0;
    nn::PolicyNet net = [&]() {
        if (opt.resume_checkpoint.empty()) return nn::PolicyNet(cfg.net, net_seed);
        uint64_t counter = 0;
        nn::PolicyNet loaded =
            nn::PolicyNet::load_checkpoint(opt.resume_checkpoint, nullptr, &counter);
        if (loaded.config().arch_hash() != cfg.net.arch_hash())
            throw ConfigError("checkpoint architecture does not match configuration");
        update_idx = static_cast<int64_t>(counter);
        return loaded;
    }();
    nn::Adam adam(net.parameters(), nn::AdamConfig{cfg.ppo.lr, 0.9, 0.999, 1e-8});
    if (!opt.resume_checkpoint.empty()) {
        // Reload to restore the optimizer moments now that Adam exists.
        nn::PolicyNet::load_checkpoint(opt.resume_checkpoint, &adam, nullptr);
    }

    std::ofstream metrics(result.metrics_path);
    if (!metrics) throw std::runtime_error("cannot write " + result.metrics_path);
    metrics << "update,steps,mean_return,success_rate,collision_rate,level,"
               "policy_loss,value_loss,kl,clip_frac\n";

    EpisodeWindow window(cfg.curriculum.window_size);
    const auto t_start = std::chrono::steady_clock::now();
    int64_t steps = 0;
    double best_success = -1.0;

    while (steps < cfg.train.total_steps) {
        if (cfg.train.wall_clock_s > 0.0) {
            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                    .count();
            if (elapsed >= cfg.train.wall_clock_s) break;
        }

        const auto t_collect = std::chrono::steady_clock::now();
        RolloutBuffer buf = collect(envs, net, cfg.ppo.horizon, sample_rng);
        steps += buf.rows();
        for (const auto& ep : buf.episodes) {
            window.push(ep.outcome, ep.episode_return);
            if (ep.leveled_up) result.leveled_up = true;
        }

        const auto t_update = std::chrono::steady_clock::now();
        const UpdateReport report = update(net, adam, buf, cfg.ppo, update_rng);
        const auto t_done = std::chrono::steady_clock::now();
        const double collect_s =
            std::chrono::duration<double>(t_update - t_collect).count();
        const double update_s = std::chrono::duration<double>(t_done - t_update).count();
        ++update_idx;

        TrainStats stats;
        stats.update = update_idx;
        stats.steps = steps;
        stats.mean_return = window.mean_return();
        stats.success_rate = window.success_rate();
        stats.collision_rate = window.collision_rate();
        stats.level = envs.curriculum().level;
        stats.policy_loss = report.policy_loss;
        stats.value_loss = report.value_loss;
        stats.kl = report.kl;
        stats.clip_fraction = report.clip_fraction;
        stats.episodes_in_window = window.count();
        write_row(metrics, stats);

        if (report.aborted) {
            net.save_checkpoint(cfg.out_dir + "/diagnostics.ckpt", &adam,
                                static_cast<uint64_t>(update_idx));
            result.aborted_numeric = true;
            break;
        }

        result.updates = update_idx;
        result.steps = steps;
        result.final_mean_return = stats.mean_return;
        result.max_level = std::max(result.max_level, stats.level);
        // Rates over a partially filled window are not meaningful records.
        if (window.count() >= cfg.curriculum.window_size) {
            result.best_success_rate =
                std::max(result.best_success_rate, stats.success_rate);
            if (stats.success_rate >= best_success) {
                best_success = stats.success_rate;
                net.save_checkpoint(result.best_checkpoint, &adam,
                                    static_cast<uint64_t>(update_idx));
            }
        }
        if (cfg.train.checkpoint_every > 0 &&
            update_idx % cfg.train.checkpoint_every == 0) {
            net.save_checkpoint(result.last_checkpoint, &adam,
                                static_cast<uint64_t>(update_idx));
        }

        if (!opt.quiet) {
            std::printf(
                "update %lld steps %lld return %.2f success %.2f collide %.2f level %d "
                "kl %.4f [collect %.2fs update %.2fs]\n",
                static_cast<long long>(update_idx), static_cast<long long>(steps),
                stats.mean_return, stats.success_rate, stats.collision_rate, stats.level,
                stats.kl, collect_s, update_s);
            std::fflush(stdout);
        }

        if (opt.stop_early && opt.stop_early(stats)) break;
    }

    net.save_checkpoint(result.last_checkpoint, &adam,
                        static_cast<uint64_t>(update_idx));
    return result;
}

}  // namespace navlab
