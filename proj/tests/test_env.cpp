#include <doctest.h>

#include <cmath>

#include "navlab/env.hpp"
#include "navlab/thread_pool.hpp"

using namespace navlab;

namespace {

EnvConfig base_config() {
    EnvConfig cfg;
    cfg.world.extent = {12, 12, 4};
    cfg.world.n_static = 0;
    cfg.world.n_dynamic = 0;
    cfg.det_noise_std = 0.0;
    return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("env");

TEST_CASE("spawn scenario basics") {
    EnvConfig cfg = base_config();
    SUBCASE("empty world spawns an empty grid and no obstacles") {
        OccupancyGrid grid(0.25, 48, 48, 16, Vec3{0, 0, 0});
        Rng rng(1);
        const Scenario s = spawn_scenario(cfg, 0, grid, rng);
        CHECK(s.obstacles.empty());
        for (double v : grid.log_odds()) CHECK(v == 0.0);
        CHECK((s.goal - s.start).norm() >= 0.6 * 12.0);
    }

    SUBCASE("fixed seed reproduces the world") {
        cfg.world.n_static = 8;
        OccupancyGrid g1(0.25, 48, 48, 16, Vec3{0, 0, 0});
        OccupancyGrid g2(0.25, 48, 48, 16, Vec3{0, 0, 0});
        Rng r1(77), r2(77);
        const Scenario s1 = spawn_scenario(cfg, 3, g1, r1);
        const Scenario s2 = spawn_scenario(cfg, 3, g2, r2);
        CHECK(g1.log_odds() == g2.log_odds());
        CHECK((s1.start - s2.start).norm() == 0.0);
        CHECK((s1.goal - s2.goal).norm() == 0.0);
        REQUIRE(s1.obstacles.size() == s2.obstacles.size());
        for (size_t i = 0; i < s1.obstacles.size(); ++i)
            CHECK((s1.obstacles[i].pos - s2.obstacles[i].pos).norm() == 0.0);
    }

    SUBCASE("area-proportional static scaling default") {
        // 350 obstacles over 50x50 scales to 56 over 20x20.
        const WorldSpec w;
        CHECK(w.n_static == 56);
        CHECK(static_cast<int>(std::round(350.0 * (20.0 * 20.0) / (50.0 * 50.0))) == 56);
    }

    SUBCASE("over-dense world errors out") {
        cfg.world.extent = {3, 3, 3};
        cfg.world.n_static = 400;
        cfg.world.static_radius_min = 0.4;
        cfg.world.static_radius_max = 0.5;
        cfg.spawn_tries = 50;
        OccupancyGrid grid(0.25, 12, 12, 12, Vec3{0, 0, 0});
        Rng rng(5);
        CHECK_THROWS_WITH_AS(spawn_scenario(cfg, 0, grid, rng), "world too dense",
                             std::runtime_error);
    }
}

TEST_CASE("step kinematics and outcomes") {
    EnvConfig cfg = base_config();

    SUBCASE("zero action in an empty world keeps the robot still") {
        Env env(cfg, 3);
        const Vec3 p0 = env.robot_pos();
        const StepInfo info = env.step({0, 0, 0});
        CHECK((env.robot_pos() - p0).norm() == 0.0);
        CHECK(info.outcome == Outcome::running);
    }

    SUBCASE("driving into a pillar collides within a step or two") {
        Env env(cfg, 3);
        // Place a pillar directly ahead of the robot, 0.4 m away.
        const Vec3 p = env.robot_pos();
        const Vec3 dir = (env.goal() - p).normalized();
        // Respawn-free injection: rasterize into the grid via a fresh env
        // with a custom scenario is heavyweight; instead drive toward a
        // synthetic occupied voxel column.
        OccupancyGrid& grid = const_cast<OccupancyGrid&>(env.grid());
        const Vec3 block = p + dir * 0.7;
        grid.rasterize_cylinder(block.x, block.y, 0.2, 0.0, 4.0);
        StepInfo info;
        int steps = 0;
        while (steps++ < 5 && env.status().outcome == Outcome::running)
            info = env.step(dir * 2.0);
        CHECK(info.outcome == Outcome::collision);
        CHECK(env.status().steps <= 5);
    }

    SUBCASE("crossing the goal tolerance succeeds") {
        Env env(cfg, 3);
        const Vec3 dir = (env.goal() - env.robot_pos()).normalized();
        StepInfo info;
        int steps = 0;
        while (steps++ < cfg.timeout_steps &&
               env.status().outcome == Outcome::running)
            info = env.step(dir * 2.0);
        CHECK(info.outcome == Outcome::success);
        CHECK((env.robot_pos() - env.goal()).norm() < cfg.goal_tol + 0.25);
    }

    SUBCASE("timeout after the step budget") {
        Env env(cfg, 3);
        StepInfo info;
        for (int i = 0; i < cfg.timeout_steps; ++i) info = env.step({0, 0, 0});
        CHECK(info.outcome == Outcome::timeout);
        CHECK(env.status().steps == cfg.timeout_steps);
    }

    SUBCASE("NaN action acts as zero velocity and flags") {
        Env env(cfg, 3);
        const StepInfo info =
            env.step({std::numeric_limits<double>::quiet_NaN(), 0, 0});
        CHECK(info.nan_action);
        CHECK(env.robot_vel().norm() == 0.0);
    }
}

TEST_CASE("speed and acceleration limits hold under random actions") {
    EnvConfig cfg = base_config();
    Env env(cfg, 9);
    Rng rng(13);
    Vec3 prev_vel = env.robot_vel();
    for (int i = 0; i < 200; ++i) {
        if (env.status().outcome != Outcome::running) env.respawn(0);
        const Vec3 a{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
        env.step(a);
        const Vec3 v = env.robot_vel();
        CHECK(v.norm() <= cfg.v_lim + 1e-9);
        CHECK((v - prev_vel).norm() <= cfg.a_max * cfg.dt + 1e-9);
        prev_vel = v;
    }
}

TEST_CASE("dynamic obstacles reflect inside the extent, speed preserved") {
    EnvConfig cfg = base_config();
    cfg.world.n_dynamic = 6;
    cfg.world.dyn_speed_min = 1.2;
    cfg.world.dyn_speed_max = 1.5;
    Env env(cfg, 21);
    std::vector<double> speeds;
    for (const auto& o : env.obstacles()) speeds.push_back(o.vel.norm());
    for (int i = 0; i < 600; ++i) {
        if (env.status().outcome != Outcome::running) break;
        env.step({0, 0, 0});
        const auto& obstacles = env.obstacles();
        for (size_t k = 0; k < obstacles.size(); ++k) {
            const auto& o = obstacles[k];
            CHECK(o.pos.x >= -1e-9);
            CHECK(o.pos.x <= cfg.world.extent.x + 1e-9);
            CHECK(o.pos.y >= -1e-9);
            CHECK(o.pos.y <= cfg.world.extent.y + 1e-9);
            CHECK(o.vel.norm() == doctest::Approx(speeds[k]).epsilon(1e-9));
        }
    }
}

TEST_CASE("curriculum gate exactness") {
    CurriculumState cur;
    cur.schedule = {10, 13, 16, 19};
    cur.threshold = 0.8;
    cur.window_size = 100;

    SUBCASE("81 of 100 levels up") {
        for (int i = 0; i < 81; ++i) curriculum_update(cur, Outcome::success);
        for (int i = 0; i < 18; ++i) curriculum_update(cur, Outcome::collision);
        CHECK(cur.level == 0);
        const bool up = curriculum_update(cur, Outcome::success);  // 81/100
        CHECK(up);
        CHECK(cur.level == 1);
        CHECK(cur.window.empty());
        CHECK(cur.n_dynamic() == 13);
    }

    SUBCASE("exactly 80 of 100 does not level up (strict >)") {
        for (int i = 0; i < 80; ++i) curriculum_update(cur, Outcome::success);
        for (int i = 0; i < 19; ++i) curriculum_update(cur, Outcome::timeout);
        const bool up = curriculum_update(cur, Outcome::collision);  // 80/100
        CHECK_FALSE(up);
        CHECK(cur.level == 0);
    }

    SUBCASE("window slides: old outcomes age out") {
        for (int i = 0; i < 100; ++i) curriculum_update(cur, Outcome::collision);
        CHECK(cur.level == 0);
        // 81 successes displace old failures -> 81/100 in the window.
        for (int i = 0; i < 80; ++i) CHECK_FALSE(curriculum_update(cur, Outcome::success));
        CHECK(curriculum_update(cur, Outcome::success));
        CHECK(cur.level == 1);
    }

    SUBCASE("the top level is absorbing") {
        cur.level = 3;
        for (int round = 0; round < 3; ++round) {
            for (int i = 0; i < 100; ++i) curriculum_update(cur, Outcome::success);
            CHECK(cur.level == 3);
            CHECK(cur.n_dynamic() == 19);
        }
    }
}

TEST_CASE("batched stepping equals independent single-env stepping") {
    EnvConfig cfg = base_config();
    cfg.world.n_static = 6;
    cfg.world.n_dynamic = 3;
    const uint64_t master = 4242;
    CurriculumState cur;
    cur.schedule = {3};

    EnvBatch batch(cfg, 4, master, cur);
    std::vector<Env> singles;
    for (int i = 0; i < 4; ++i) {
        EnvConfig c = cfg;
        c.world.n_dynamic = 3;
        singles.emplace_back(c, Rng::mix_seed(master, i));
    }

    Rng action_rng(5);
    std::vector<StepInfo> infos;
    for (int t = 0; t < 50; ++t) {
        std::vector<Vec3> actions;
        for (int i = 0; i < 4; ++i)
            actions.push_back({action_rng.uniform(-2, 2), action_rng.uniform(-2, 2),
                               action_rng.uniform(-1, 1)});
        batch.step(actions, infos);
        for (int i = 0; i < 4; ++i) {
            if (singles[i].status().outcome == Outcome::running)
                singles[i].step(actions[i]);
            CHECK((batch.env(i).robot_pos() - singles[i].robot_pos()).norm() == 0.0);
            CHECK((batch.env(i).robot_vel() - singles[i].robot_vel()).norm() == 0.0);
        }
    }
}

TEST_CASE("reset_done respawns exactly the terminal envs at the current level") {
    EnvConfig cfg = base_config();
    CurriculumState cur;
    cur.schedule = {0, 2};
    cur.threshold = 0.5;
    cur.window_size = 2;
    EnvBatch batch(cfg, 3, 99, cur);

    // Drive env 0 to success, leave the others running.
    std::vector<StepInfo> infos;
    int guard = 400;
    while (batch.env(0).status().outcome == Outcome::running && guard-- > 0) {
        const Vec3 dir = (batch.env(0).goal() - batch.env(0).robot_pos()).normalized();
        batch.step(std::vector<Vec3>{dir * 2.0, {0, 0, 0}, {0, 0, 0}}, infos);
    }
    REQUIRE(batch.env(0).status().outcome == Outcome::success);
    const Vec3 p1 = batch.env(1).robot_pos();
    const int steps1 = batch.env(1).status().steps;

    // Success pushed one outcome into the curriculum window; force a level-up
    // so the respawned env uses the new dynamic count.
    curriculum_update(batch.curriculum(), Outcome::success);
    REQUIRE(batch.curriculum().level == 1);

    batch.reset_done();
    CHECK(batch.env(0).status().steps == 0);
    CHECK(batch.env(0).obstacles().size() == 2);  // new level's n_dynamic
    CHECK((batch.env(1).robot_pos() - p1).norm() == 0.0);
    CHECK(batch.env(1).status().steps == steps1);
}

TEST_SUITE_END();
