#include "navlab/bench.hpp"

#include <cstdio>
#include <filesystem>

#include <json.hpp>

#include "navlab/errors.hpp"
#include "navlab/replay.hpp"
#include "navlab/shield.hpp"
#include "navlab/thread_pool.hpp"

namespace navlab {

namespace {

struct ClassSpec {
    const char* name;
    bool statics;
    bool dynamics;
};
constexpr ClassSpec kClasses[3] = {
    {"static", true, false}, {"dynamic", false, true}, {"hybrid", true, true}};

}  // namespace

std::string BenchReport::to_json() const {
    nlohmann::json j;
    j["shield"] = shield_on;
    j["seed"] = std::to_string(seed);
    for (const auto& c : classes) {
        nlohmann::json jc = {{"episodes", c.episodes},
                             {"successes", c.successes},
                             {"collision_episodes", c.collision_episodes},
                             {"timeouts", c.timeouts},
                             {"total_contacts", c.total_contacts},
                             {"mean_collisions", c.mean_collisions},
                             {"success_rate", c.success_rate},
                             {"mean_episode_length", c.mean_episode_length},
                             {"shield_intervention_rate", c.shield_intervention_rate}};
        j["classes"][c.name] = jc;
    }
    return j.dump(2);
}

std::string BenchReport::to_table() const {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-8s %8s %9s %9s %9s %10s %12s\n", "class",
                  "episodes", "success", "collide", "timeout", "mean_coll", "shield_rate");
    out += buf;
    for (const auto& c : classes) {
        std::snprintf(buf, sizeof(buf), "%-8s %8d %9d %9d %9d %10.2f %12.3f\n",
                      c.name.c_str(), c.episodes, c.successes, c.collision_episodes,
                      c.timeouts, c.mean_collisions, c.shield_intervention_rate);
        out += buf;
    }
    return out;
}

int BenchReport::total_contacts() const {
    int n = 0;
    for (const auto& c : classes) n += c.total_contacts;
    return n;
}

BenchReport run_bench(const BenchOptions& opt) {
    ExperimentConfig cfg = opt.cfg;
    cfg.finalize();

    const uint64_t bench_seed = opt.seed != 0 ? opt.seed : cfg.seed;
    nn::PolicyNet net = nn::PolicyNet::load_checkpoint(opt.checkpoint);
    if (net.config().arch_hash() != cfg.net.arch_hash())
        throw ConfigError("checkpoint architecture does not match configuration");

    if (!opt.replay_dir.empty()) std::filesystem::create_directories(opt.replay_dir);

    BenchReport report;
    report.shield_on = opt.shield_on;
    report.seed = bench_seed;

    const double v_lim = cfg.env.v_lim;
    const Vec3 v_min{-v_lim, -v_lim, -v_lim}, v_max{v_lim, v_lim, v_lim};
    const int debounce_ticks = static_cast<int>(std::lround(1.0 / cfg.env.dt));

    nn::BatchedBundle one;

    for (int ci = 0; ci < 3; ++ci) {
        const ClassSpec& cls = kClasses[ci];
        ExperimentConfig class_cfg = cfg;
        if (!cls.statics) class_cfg.env.world.n_static = 0;
        if (!cls.dynamics) class_cfg.env.world.n_dynamic = 0;
        class_cfg.finalize();
        const std::string class_config_text = class_cfg.serialize();

        BenchClassResult cr;
        cr.name = cls.name;
        int64_t total_steps = 0, total_interventions = 0, total_ticks = 0;

        for (int run = 0; run < opt.n_runs; ++run) {
            const uint64_t ep_seed =
                Rng::mix_seed(bench_seed, static_cast<uint64_t>(ci) * 1000003 + run);
            Env env(class_cfg.env, ep_seed);
            env.terminate_on_collision = false;

            std::unique_ptr<ReplayWriter> replay;
            if (!opt.replay_dir.empty()) {
                char name[128];
                std::snprintf(name, sizeof(name), "%s/%s_%03d_%s.jsonl",
                              opt.replay_dir.c_str(), cls.name, run,
                              opt.shield_on ? "on" : "off");
                replay = std::make_unique<ReplayWriter>(
                    name, ep_seed, class_cfg.env.world.n_dynamic, opt.shield_on,
                    class_config_text);
            }

            CollisionCounter contacts(debounce_ticks);
            int interventions = 0;
            int t = 0;
            while (env.status().outcome == Outcome::running) {
                one.resize(1, net.config().n_d, net.config().n_h, net.config().n_v);
                one.set_row(0, env.state());
                nn::PolicyNet::Output out;
                {
                    nn::NoGradGuard ng;
                    out = net.forward(one);
                }
                const std::array<double, 3> x_hat = {
                    nn::beta_mean(out.alpha.value()[0], out.beta.value()[0]),
                    nn::beta_mean(out.alpha.value()[1], out.beta.value()[1]),
                    nn::beta_mean(out.alpha.value()[2], out.beta.value()[2])};
                Vec3 v_goal = nn::scale_action(x_hat, v_lim);

                std::optional<ShieldLogEntry> shield_log;
                if (opt.shield_on) {
                    std::vector<ObstacleSphere> spheres = static_spheres(
                        Vec3{}, env.state().s_stat, class_cfg.env.encoder.ray,
                        class_cfg.env.world.resolution, class_cfg.env.robot_radius,
                        class_cfg.shield.margin, class_cfg.shield.max_static);
                    for (const ObstacleTrack& trk : env.tracks()) {
                        const Vec3 rel =
                            env.frame().to_frame_vector(trk.position() - env.robot_pos());
                        const Vec3 vel = env.frame().to_frame_vector(trk.velocity());
                        auto enclosing = enclose_cylinder(
                            rel, vel, std::max(trk.width, 0.05),
                            std::max(trk.height, 0.05), class_cfg.env.robot_radius,
                            class_cfg.shield.margin);
                        spheres.insert(spheres.end(), enclosing.begin(),
                                       enclosing.end());
                    }
                    ShieldReport srep;
                    const Vec3 v_safe =
                        safe_action(v_goal, spheres, v_min, v_max,
                                    class_cfg.shield.horizon, class_cfg.env.dt, &srep);
                    if (srep.modified) ++interventions;
                    ShieldLogEntry log;
                    log.input = v_goal;
                    log.output = v_safe;
                    log.modified = srep.modified;
                    log.infeasible = srep.infeasible_relaxed;
                    log.active = srep.active;
                    shield_log = log;
                    v_goal = v_safe;
                }

                const Vec3 action_world = env.frame().to_world_vector(v_goal);
                const StepInfo info = env.step(action_world);
                contacts.observe(t, info.collided_now);
                if (replay)
                    replay->tick(t, env, action_world, info.terms, info.reward,
                                 info.outcome, shield_log);
                ++t;
            }

            const Outcome outcome = env.status().outcome;
            const int events = contacts.events();
            if (replay) replay->finish(outcome, env.status().steps, events);

            ++cr.episodes;
            cr.total_contacts += events;
            if (events > 0) {
                ++cr.collision_episodes;
            } else if (outcome == Outcome::success) {
                ++cr.successes;
            } else {
                ++cr.timeouts;
            }
            total_steps += env.status().steps;
            total_interventions += interventions;
            total_ticks += t;
        }

        cr.mean_collisions =
            cr.episodes ? static_cast<double>(cr.total_contacts) / cr.episodes : 0.0;
        cr.success_rate =
            cr.episodes ? static_cast<double>(cr.successes) / cr.episodes : 0.0;
        cr.mean_episode_length =
            cr.episodes ? static_cast<double>(total_steps) / cr.episodes : 0.0;
        cr.shield_intervention_rate =
            total_ticks ? static_cast<double>(total_interventions) / total_ticks : 0.0;
        report.classes.push_back(cr);

        if (!opt.quiet) {
            std::printf("%s\n", report.to_table().c_str());
            std::fflush(stdout);
        }
    }
    return report;
}

}  // namespace navlab
