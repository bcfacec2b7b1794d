#pragma once

#include <string>
#include <vector>

#include "navlab/config.hpp"

namespace navlab {

struct BenchClassResult {
    std::string name;
    int episodes = 0;
    int successes = 0;
    int collision_episodes = 0;  // episodes with at least one contact event
    int timeouts = 0;
    int total_contacts = 0;  // debounced contact events across all episodes
    double mean_collisions = 0.0;
    double success_rate = 0.0;
    double mean_episode_length = 0.0;
    double shield_intervention_rate = 0.0;  // ticks with a modified action
};

struct BenchReport {
    std::vector<BenchClassResult> classes;
    bool shield_on = false;
    uint64_t seed = 0;

    std::string to_json() const;
    std::string to_table() const;
    int total_contacts() const;
};

struct BenchOptions {
    ExperimentConfig cfg;
    std::string checkpoint;
    int n_runs = 20;
    bool shield_on = true;
    uint64_t seed = 0;          // 0 -> cfg.seed
    std::string replay_dir;     // empty = no replay logs
    bool quiet = true;
};

// Runs n_runs deterministic-policy episodes per scenario class (static,
// dynamic, hybrid) with per-run seeds derived from the bench seed, so
// shield-on and shield-off runs see identical worlds and obstacle paths.
// Episodes do not terminate on contact; debounced contact events are counted.
BenchReport run_bench(const BenchOptions& opt);

}  // namespace navlab
