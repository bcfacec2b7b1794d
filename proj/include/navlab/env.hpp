#pragma once

#include <deque>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "navlab/geometry.hpp"
#include "navlab/reward.hpp"
#include "navlab/rng.hpp"
#include "navlab/state.hpp"
#include "navlab/tracker.hpp"
#include "navlab/voxelmap.hpp"

namespace navlab {

struct WorldSpec {
    Vec3 extent{20.0, 20.0, 5.0};
    double resolution = 0.25;
    int n_static = 56;
    double static_radius_min = 0.2, static_radius_max = 0.5;
    double static_height_min = 2.0, static_height_max = 5.0;
    int n_dynamic = 10;
    double dyn_speed_min = 0.5, dyn_speed_max = 1.5;
    double dyn_width_min = 0.4, dyn_width_max = 0.8;
    double dyn_height_min = 1.6, dyn_height_max = 1.9;
    uint64_t seed = 0;
};

struct EnvConfig {
    WorldSpec world;
    EncoderConfig encoder;
    RewardWeights rewards;
    TrackerConfig tracker;
    double dt = 0.1;
    double a_max = 4.0;
    double v_lim = 2.0;
    double robot_radius = 0.3;
    double goal_tol = 0.5;
    int timeout_steps = 300;
    double height_tol = 0.1;
    double det_noise_std = 0.02;
    double det_range = 10.0;
    double min_start_goal_frac = 0.6;  // of min horizontal extent
    int spawn_tries = 1000;
    double spawn_z_min = 0.8, spawn_z_max = 2.0;
};

enum class Outcome { running, success, collision, timeout };
const char* outcome_name(Outcome o);

struct EpisodeStatus {
    Outcome outcome = Outcome::running;
    int steps = 0;
};

struct DynamicObstacle {
    Vec3 pos;  // cylinder center
    Vec3 vel;
    double width = 0.0;   // diameter
    double height = 0.0;
};

// Procedural scenario: static cylinders rasterized into the grid, walkers
// with random headings, start/goal rejection-sampled collision-free with
// distance >= min_start_goal_frac * min horizontal extent. Throws
// "world too dense" when sampling is exhausted.
struct Scenario {
    std::vector<DynamicObstacle> obstacles;
    Vec3 start, goal;
};
Scenario spawn_scenario(const EnvConfig& cfg, int n_dynamic, OccupancyGrid& grid, Rng& rng);

struct StepInfo {
    RewardTerms terms;
    double reward = 0.0;
    Outcome outcome = Outcome::running;
    bool nan_action = false;
    bool collided_now = false;  // contact this tick, regardless of termination
};

// Velocity-controlled point-mass robot in one procedurally generated world.
class Env {
public:
    Env(const EnvConfig& cfg, uint64_t seed);

    // New world + episode at the given dynamic-obstacle count.
    void respawn(int n_dynamic);

    // One tick: rate-limited velocity tracking, obstacle advance with wall
    // reflection, collision/success/timeout, tracker + encoder refresh,
    // rewards. NaN actions act as zero velocity and set the flag.
    StepInfo step(const Vec3& action_world);

    const StateBundle& state() const { return state_; }
    const EpisodeStatus& status() const { return status_; }
    const GoalFrame& frame() const { return frame_; }
    const OccupancyGrid& grid() const { return grid_; }
    const std::vector<ObstacleTrack>& tracks() const { return tracker_.tracks(); }
    const std::vector<DynamicObstacle>& obstacles() const { return obstacles_; }
    const EnvConfig& config() const { return cfg_; }

    Vec3 robot_pos() const { return robot_pos_; }
    Vec3 robot_vel() const { return robot_vel_; }
    Vec3 start() const { return start_; }
    Vec3 goal() const { return goal_; }

    // Bench mode: terminal collisions do not end the episode, so several
    // contact events can occur per run.
    bool terminate_on_collision = true;

private:
    void sense_and_encode();
    bool collides(const Vec3& pos, double radius) const;

    EnvConfig cfg_;
    Rng world_rng_;
    Rng sensor_rng_;
    OccupancyGrid grid_;
    std::vector<DynamicObstacle> obstacles_;
    Vec3 start_, goal_, robot_pos_, robot_vel_, prev_vel_;
    GoalFrame frame_;
    MultiObjectTracker tracker_;
    StateBundle state_;
    EpisodeStatus status_;
};

// Dynamic-obstacle curriculum: ring window of terminal outcomes; when the
// window is full and the success fraction strictly exceeds the threshold the
// level advances and the window clears.
struct CurriculumState {
    int level = 0;
    std::vector<int> schedule{10, 13, 16, 19};
    double threshold = 0.8;
    int window_size = 100;
    std::deque<char> window;

    int n_dynamic() const {
        const int idx = std::min<int>(level, static_cast<int>(schedule.size()) - 1);
        return schedule.empty() ? 0 : schedule[idx];
    }
    int max_level() const { return static_cast<int>(schedule.size()) - 1; }
};

// Returns true when the level advanced.
bool curriculum_update(CurriculumState& cur, Outcome outcome);

// Batch of independent environments, partitioned across the worker pool per
// step. Per-env RNG streams make batched stepping equal B single-env runs.
class EnvBatch {
public:
    struct EpisodeRecord {
        Outcome outcome;
        double episode_return;
        int length;
        int env_idx;
        bool leveled_up;
    };

    EnvBatch(const EnvConfig& cfg, int batch, uint64_t master_seed,
             CurriculumState curriculum = {});

    int size() const { return static_cast<int>(envs_.size()); }
    Env& env(int i) { return *envs_[i]; }
    const Env& env(int i) const { return *envs_[i]; }

    void step(std::span<const Vec3> actions_world, std::vector<StepInfo>& infos);
    void reset_done();

    CurriculumState& curriculum() { return curriculum_; }
    std::vector<EpisodeRecord> drain_episodes();

private:
    std::vector<std::unique_ptr<Env>> envs_;
    CurriculumState curriculum_;
    std::vector<double> ep_return_;
    std::vector<EpisodeRecord> completed_;
};

}  // namespace navlab
