#pragma once

#include <cstdint>
#include <string>

#include "navlab/env.hpp"
#include "navlab/nn/policy.hpp"
#include "navlab/ppo.hpp"
#include "navlab/shield.hpp"

namespace navlab {

struct TrainConfig {
    int64_t total_steps = 2000000;
    double wall_clock_s = 0.0;  // 0 = no wall-clock budget
    int checkpoint_every = 50;  // updates
};

struct BenchConfig {
    int n_runs = 20;
};

// Everything one experiment needs, declaratively. Layered sources:
// file < environment overrides (NAVLAB_ prefix, "__" for dots) < CLI --set.
struct ExperimentConfig {
    EnvConfig env;
    PpoConfig ppo;
    ShieldConfig shield;
    nn::NetConfig net;
    CurriculumState curriculum;
    TrainConfig train;
    BenchConfig bench;
    uint64_t seed = 1;
    std::string out_dir = "out";
    int workers = 0;  // 0 = hardware concurrency

    // Re-derives dependent fields (net dims from the encoder, stat scale from
    // the ray config). Call after mutating.
    void finalize();

    // `key = value` lines, '#' comments. Unknown keys and malformed values
    // throw ConfigError with the line number.
    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_string(const std::string& text,
                                        const std::string& source = "<string>");

    void apply_env_overrides();
    void set(const std::string& key, const std::string& value);  // throws ConfigError
    std::string serialize() const;
};

}  // namespace navlab
