#include "navlab/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "navlab/thread_pool.hpp"

namespace navlab {

namespace {

OccupancyGrid make_grid(const WorldSpec& w) {
    const int nx = std::max(1, static_cast<int>(std::ceil(w.extent.x / w.resolution)));
    const int ny = std::max(1, static_cast<int>(std::ceil(w.extent.y / w.resolution)));
    const int nz = std::max(1, static_cast<int>(std::ceil(w.extent.z / w.resolution)));
    return OccupancyGrid(w.resolution, nx, ny, nz, Vec3{0, 0, 0});
}

bool sphere_hits_grid(const OccupancyGrid& grid, const Vec3& c, double r) {
    const auto lo = grid.voxel_of({c.x - r, c.y - r, c.z - r});
    const auto hi = grid.voxel_of({c.x + r, c.y + r, c.z + r});
    const double res = grid.resolution();
    const Vec3 o = grid.origin();
    for (int iz = std::max(lo[2], 0); iz <= std::min(hi[2], grid.nz() - 1); ++iz)
        for (int iy = std::max(lo[1], 0); iy <= std::min(hi[1], grid.ny() - 1); ++iy)
            for (int ix = std::max(lo[0], 0); ix <= std::min(hi[0], grid.nx() - 1); ++ix) {
                if (!grid.is_occupied_voxel(ix, iy, iz)) continue;
                // Closest point of the voxel cube to the sphere center.
                const double vx0 = o.x + ix * res, vy0 = o.y + iy * res,
                             vz0 = o.z + iz * res;
                const double px = std::clamp(c.x, vx0, vx0 + res);
                const double py = std::clamp(c.y, vy0, vy0 + res);
                const double pz = std::clamp(c.z, vz0, vz0 + res);
                const double dx = c.x - px, dy = c.y - py, dz = c.z - pz;
                if (dx * dx + dy * dy + dz * dz <= r * r) return true;
            }
    return false;
}

bool sphere_hits_cylinder(const Vec3& c, double r, const DynamicObstacle& o) {
    const double dx = c.x - o.pos.x, dy = c.y - o.pos.y;
    const double rr = 0.5 * o.width + r;
    if (dx * dx + dy * dy > rr * rr) return false;
    return std::abs(c.z - o.pos.z) <= 0.5 * o.height + r;
}

}  // namespace

const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::running: return "running";
        case Outcome::success: return "success";
        case Outcome::collision: return "collision";
        case Outcome::timeout: return "timeout";
    }
    return "?";
}

Scenario spawn_scenario(const EnvConfig& cfg, int n_dynamic, OccupancyGrid& grid,
                        Rng& rng) {
    const WorldSpec& w = cfg.world;
    grid.clear();

    for (int i = 0; i < w.n_static; ++i) {
        const double r = rng.uniform(w.static_radius_min, w.static_radius_max);
        const double h = rng.uniform(w.static_height_min,
                                     std::min(w.static_height_max, w.extent.z));
        const double cx = rng.uniform(r, w.extent.x - r);
        const double cy = rng.uniform(r, w.extent.y - r);
        grid.rasterize_cylinder(cx, cy, r, 0.0, h);
    }

    Scenario s;
    s.obstacles.reserve(n_dynamic);
    for (int i = 0; i < n_dynamic; ++i) {
        DynamicObstacle o;
        o.width = rng.uniform(w.dyn_width_min, w.dyn_width_max);
        o.height = rng.uniform(w.dyn_height_min, w.dyn_height_max);
        o.pos = {rng.uniform(0.5 * o.width, w.extent.x - 0.5 * o.width),
                 rng.uniform(0.5 * o.width, w.extent.y - 0.5 * o.width),
                 0.5 * o.height};
        const double heading = rng.uniform(0.0, 2.0 * M_PI);
        const double speed = rng.uniform(w.dyn_speed_min, w.dyn_speed_max);
        o.vel = {speed * std::cos(heading), speed * std::sin(heading), 0.0};
        s.obstacles.push_back(o);
    }

    const double clearance = cfg.robot_radius + 0.1;
    const double min_dist =
        cfg.min_start_goal_frac * std::min(w.extent.x, w.extent.y);
    auto free_pos = [&](const Vec3& p) {
        if (sphere_hits_grid(grid, p, clearance)) return false;
        for (const DynamicObstacle& o : s.obstacles)
            if (sphere_hits_cylinder(p, clearance, o)) return false;
        return true;
    };
    auto sample_pos = [&]() -> Vec3 {
        const double margin = clearance;
        return {rng.uniform(margin, w.extent.x - margin),
                rng.uniform(margin, w.extent.y - margin),
                rng.uniform(cfg.spawn_z_min,
                            std::min(cfg.spawn_z_max, w.extent.z - margin))};
    };

    bool placed = false;
    for (int attempt = 0; attempt < cfg.spawn_tries; ++attempt) {
        const Vec3 start = sample_pos();
        if (!free_pos(start)) continue;
        const Vec3 goal = sample_pos();
        if (!free_pos(goal)) continue;
        if ((goal - start).norm() < min_dist) continue;
        s.start = start;
        s.goal = goal;
        placed = true;
        break;
    }
    if (!placed) throw std::runtime_error("world too dense");
    return s;
}

Env::Env(const EnvConfig& cfg, uint64_t seed)
    : cfg_(cfg),
      world_rng_(Rng::mix_seed(seed, 1)),
      sensor_rng_(Rng::mix_seed(seed, 2)),
      grid_(make_grid(cfg.world)),
      tracker_(cfg.tracker) {
    respawn(cfg.world.n_dynamic);
}

void Env::respawn(int n_dynamic) {
    Scenario s = spawn_scenario(cfg_, n_dynamic, grid_, world_rng_);
    obstacles_ = std::move(s.obstacles);
    start_ = s.start;
    goal_ = s.goal;
    robot_pos_ = start_;
    robot_vel_ = {};
    prev_vel_ = {};
    frame_ = make_goal_frame(start_, goal_);
    tracker_.reset();
    status_ = {};
    sense_and_encode();
}

bool Env::collides(const Vec3& pos, double radius) const {
    if (sphere_hits_grid(grid_, pos, radius)) return true;
    for (const DynamicObstacle& o : obstacles_)
        if (sphere_hits_cylinder(pos, radius, o)) return true;
    return false;
}

void Env::sense_and_encode() {
    std::vector<Detection> dets;
    dets.reserve(obstacles_.size());
    for (const DynamicObstacle& o : obstacles_) {
        if ((o.pos - robot_pos_).norm() > cfg_.det_range) continue;
        Vec3 c = o.pos;
        if (cfg_.det_noise_std > 0.0) {
            c.x += sensor_rng_.normal(0.0, cfg_.det_noise_std);
            c.y += sensor_rng_.normal(0.0, cfg_.det_noise_std);
            c.z += sensor_rng_.normal(0.0, cfg_.det_noise_std);
        }
        dets.push_back(Detection::make(c, o.width, o.height));
    }
    tracker_.step(dets, cfg_.dt);
    state_ = encode(robot_pos_, robot_vel_, goal_, frame_, grid_, tracker_.tracks(),
                    cfg_.encoder);
}

StepInfo Env::step(const Vec3& action_world) {
    StepInfo info;
    if (status_.outcome != Outcome::running) {
        info.outcome = status_.outcome;
        return info;
    }

    Vec3 cmd = action_world;
    if (!cmd.is_finite()) {
        cmd = {};
        info.nan_action = true;
    }
    cmd = {std::clamp(cmd.x, -cfg_.v_lim, cfg_.v_lim),
           std::clamp(cmd.y, -cfg_.v_lim, cfg_.v_lim),
           std::clamp(cmd.z, -cfg_.v_lim, cfg_.v_lim)};
    // Physical speed limit is on the norm; the action box is per-axis.
    const double cmd_speed = cmd.norm();
    if (cmd_speed > cfg_.v_lim) cmd *= cfg_.v_lim / cmd_speed;

    prev_vel_ = robot_vel_;
    const Vec3 dv = cmd - robot_vel_;
    const double dv_norm = dv.norm();
    const double dv_max = cfg_.a_max * cfg_.dt;
    robot_vel_ = dv_norm <= dv_max ? cmd : robot_vel_ + dv * (dv_max / dv_norm);
    robot_pos_ += robot_vel_ * cfg_.dt;
    // Ground plane and ceiling; horizontal motion stays unbounded.
    robot_pos_.z = std::clamp(robot_pos_.z, cfg_.robot_radius,
                              cfg_.world.extent.z - cfg_.robot_radius);

    for (DynamicObstacle& o : obstacles_) {
        o.pos += o.vel * cfg_.dt;
        const double rx = 0.5 * o.width;
        if (o.pos.x < rx) {
            o.pos.x = rx + (rx - o.pos.x);
            o.vel.x = -o.vel.x;
        } else if (o.pos.x > cfg_.world.extent.x - rx) {
            o.pos.x = 2.0 * (cfg_.world.extent.x - rx) - o.pos.x;
            o.vel.x = -o.vel.x;
        }
        if (o.pos.y < rx) {
            o.pos.y = rx + (rx - o.pos.y);
            o.vel.y = -o.vel.y;
        } else if (o.pos.y > cfg_.world.extent.y - rx) {
            o.pos.y = 2.0 * (cfg_.world.extent.y - rx) - o.pos.y;
            o.vel.y = -o.vel.y;
        }
    }

    ++status_.steps;
    info.collided_now = collides(robot_pos_, cfg_.robot_radius);
    if (info.collided_now && terminate_on_collision) {
        status_.outcome = Outcome::collision;
    } else if ((robot_pos_ - goal_).norm() < cfg_.goal_tol) {
        status_.outcome = Outcome::success;
    } else if (status_.steps >= cfg_.timeout_steps) {
        status_.outcome = Outcome::timeout;
    }

    sense_and_encode();

    info.terms = reward_terms(robot_pos_, robot_vel_, prev_vel_, goal_, start_,
                              state_.s_stat, tracker_.tracks(), cfg_.height_tol);
    info.reward = total_reward(info.terms, cfg_.rewards);
    info.outcome = status_.outcome;
    return info;
}

bool curriculum_update(CurriculumState& cur, Outcome outcome) {
    cur.window.push_back(outcome == Outcome::success ? 1 : 0);
    while (static_cast<int>(cur.window.size()) > cur.window_size) cur.window.pop_front();
    if (static_cast<int>(cur.window.size()) < cur.window_size) return false;
    int successes = 0;
    for (char c : cur.window) successes += c;
    const double rate = static_cast<double>(successes) / cur.window_size;
    if (rate > cur.threshold && cur.level < cur.max_level()) {
        ++cur.level;
        cur.window.clear();
        return true;
    }
    return false;
}

EnvBatch::EnvBatch(const EnvConfig& cfg, int batch, uint64_t master_seed,
                   CurriculumState curriculum)
    : curriculum_(std::move(curriculum)), ep_return_(batch, 0.0) {
    EnvConfig c = cfg;
    c.world.n_dynamic = curriculum_.n_dynamic();
    envs_.reserve(batch);
    for (int i = 0; i < batch; ++i)
        envs_.push_back(std::make_unique<Env>(c, Rng::mix_seed(master_seed, i)));
}

void EnvBatch::step(std::span<const Vec3> actions_world, std::vector<StepInfo>& infos) {
    const int n = size();
    infos.resize(n);
    ThreadPool::global().parallel_for(
        n, [&](int i) { infos[i] = envs_[i]->step(actions_world[i]); });

    // Sequential bookkeeping keeps episode/curriculum order deterministic.
    for (int i = 0; i < n; ++i) {
        ep_return_[i] += infos[i].reward;
        if (infos[i].outcome != Outcome::running) {
            const bool up = curriculum_update(curriculum_, infos[i].outcome);
            completed_.push_back(
                {infos[i].outcome, ep_return_[i], envs_[i]->status().steps, i, up});
            ep_return_[i] = 0.0;
        }
    }
}

void EnvBatch::reset_done() {
    for (auto& e : envs_)
        if (e->status().outcome != Outcome::running)
            e->respawn(curriculum_.n_dynamic());
}

std::vector<EnvBatch::EpisodeRecord> EnvBatch::drain_episodes() {
    std::vector<EpisodeRecord> out;
    out.swap(completed_);
    return out;
}

}  // namespace navlab
