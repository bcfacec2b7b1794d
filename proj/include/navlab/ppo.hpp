#pragma once

#include <cstdint>
#include <vector>

#include "navlab/env.hpp"
#include "navlab/nn/policy.hpp"
#include "navlab/rng.hpp"

namespace navlab {

// clip, gamma, and lr follow the source method; the rest are tuning defaults
// calibrated on the desk-scale worlds (the per-update KL stays in the
// 0.005-0.01 band at these settings).
struct PpoConfig {
    double clip = 0.1;
    double gamma = 0.99;
    double gae_lambda = 0.92;
    double lr = 5e-4;
    int epochs = 6;
    int minibatch = 0;  // 0 -> batch*horizon/16
    double value_coef = 0.5;
    double entropy_coef = 0.001;
    double max_grad_norm = 0.5;  // 0 disables clipping
    int horizon = 64;
    int batch = 256;
};

// Time-major rollout storage: row index t*B + b.
struct RolloutBuffer {
    int B = 0, T = 0;
    nn::BatchedBundle states;
    std::vector<double> actions;   // rows x 3, raw x-hat in (0,1)
    std::vector<double> logprobs;  // rows
    std::vector<double> rewards;   // rows
    std::vector<double> values;    // rows
    std::vector<uint8_t> dones;    // rows, 1 if this transition was terminal
    std::vector<double> bootstrap;            // B, value of the post-horizon state
    std::vector<EnvBatch::EpisodeRecord> episodes;  // completed during collection

    int rows() const { return B * T; }
};

// Runs the policy for T ticks over the batch: sample x-hat from the Beta
// heads (or take the mean when deterministic), scale to the velocity box,
// rotate to world, step, auto-reset finished envs. Values and log-probs are
// recorded at collection time.
RolloutBuffer collect(EnvBatch& envs, const nn::PolicyNet& net, int T, Rng& rng,
                      bool deterministic = false);

// Raw (unnormalized) GAE advantages and returns = advantages + values.
void gae(const RolloutBuffer& buf, double gamma, double lambda,
         std::vector<double>& advantages, std::vector<double>& returns);

// In-place mean-0 std-1 normalization, applied once per update.
void normalize_advantages(std::vector<double>& advantages);

struct UpdateReport {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double kl = 0.0;
    double clip_fraction = 0.0;
    int minibatches = 0;
    bool aborted = false;  // non-finite loss; no step applied for that batch
};

UpdateReport update(nn::PolicyNet& net, nn::Adam& adam, const RolloutBuffer& buf,
                    const PpoConfig& cfg, Rng& rng);

}  // namespace navlab
