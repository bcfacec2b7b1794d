#pragma once

#include <functional>
#include <string>

#include "navlab/config.hpp"

namespace navlab {

// One metrics row, written per update.
struct TrainStats {
    int64_t update = 0;
    int64_t steps = 0;
    double mean_return = 0.0;
    double success_rate = 0.0;
    double collision_rate = 0.0;
    int level = 0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double kl = 0.0;
    double clip_fraction = 0.0;
    int episodes_in_window = 0;  // not part of the CSV
};

struct TrainOptions {
    ExperimentConfig cfg;
    std::string resume_checkpoint;  // empty = fresh start
    bool quiet = false;
    // Optional early stop, checked after each update.
    std::function<bool(const TrainStats&)> stop_early;
};

struct TrainResult {
    int64_t updates = 0;
    int64_t steps = 0;
    double best_success_rate = 0.0;
    double final_mean_return = 0.0;
    int max_level = 0;
    bool leveled_up = false;
    bool aborted_numeric = false;
    std::string metrics_path;
    std::string best_checkpoint;
    std::string last_checkpoint;
};

// Collect/update cycles until the step budget, wall-clock budget, or early
// stop. Writes the metrics CSV, periodic checkpoints, and the
// best-by-success-rate checkpoint into cfg.out_dir. A non-finite loss aborts
// after dumping a diagnostics checkpoint (callers map this to exit code 3).
TrainResult run_training(const TrainOptions& opt);

}  // namespace navlab
