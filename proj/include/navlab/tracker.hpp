#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "navlab/geometry.hpp"
#include "navlab/matrix.hpp"

namespace navlab {

// One detection frame entry. The feature vector packs position (3), bounding
// box dims (2), point-cloud size (1) and point-cloud standard deviation (1);
// the simulator synthesizes the last two as noise-free constants.
struct Detection {
    Vec3 center;
    double width = 0.0;
    double height = 0.0;
    std::array<double, 7> feature{};

    static Detection make(const Vec3& center, double width, double height,
                          double point_count = 100.0, double point_std = 0.1) {
        Detection d;
        d.center = center;
        d.width = width;
        d.height = height;
        d.feature = {center.x, center.y, center.z, width, height, point_count, point_std};
        return d;
    }
};

// Constant-acceleration track. State layout: [p v a] per axis,
// (px,py,pz,vx,vy,vz,ax,ay,az).
struct ObstacleTrack {
    int id = -1;
    std::array<double, 9> state{};
    Matrix covariance;  // 9x9
    double width = 0.0;
    double height = 0.0;
    int age = 0;
    int missed_frames = 0;
    std::array<double, 7> feature{};

    Vec3 position() const { return {state[0], state[1], state[2]}; }
    Vec3 velocity() const { return {state[3], state[4], state[5]}; }
    Vec3 acceleration() const { return {state[6], state[7], state[8]}; }
};

struct TrackerConfig {
    // White-jerk spectral density. Kept small: walkers move near-constant
    // velocity between wall bounces, and a tighter acceleration band is what
    // keeps the 30-frame velocity estimate inside its accuracy budget.
    double jerk_psd = 0.005;        // m^2/s^5
    double meas_noise_std = 0.1;    // position measurement sigma, m
    double spawn_pos_std = 0.2;
    double spawn_vel_std = 2.0;
    double spawn_acc_std = 2.0;
    int prune_after = 5;            // missed frames before removal
    double gate_pos_dist = 1.5;     // m-equivalent similarity gate
    // Feature-similarity weights/scales: position, dims, point count, point std.
    double w_pos = 1.0, w_dims = 0.5, w_count = 0.1, w_std = 0.1;
    double scale_pos = 1.0, scale_dims = 1.0, scale_count = 100.0, scale_std = 0.1;
    double dims_ema = 0.3;          // blend factor toward the new detection dims
};

// exp(-sum_k w_k * normalized_dist_k) over the feature groups; 1 at a perfect
// match, decaying with distance.
double similarity(const ObstacleTrack& track, const Detection& det,
                  const TrackerConfig& cfg);

// Greedy best-score-first one-to-one matching. Pairs scoring below the gate
// stay unmatched. Returns (track_id, detection_index) pairs.
std::vector<std::pair<int, int>> associate(std::span<const ObstacleTrack> tracks,
                                           std::span<const Detection> dets,
                                           const TrackerConfig& cfg);

void kf_predict(ObstacleTrack& track, double dt, const TrackerConfig& cfg);

// Position-measurement correction, Joseph-form covariance, EMA on dims.
// Returns false (and bumps missed_frames) if the innovation covariance is
// singular.
bool kf_update(ObstacleTrack& track, const Detection& det, const TrackerConfig& cfg);

// Full per-frame pipeline: predict -> associate -> update -> spawn -> prune.
class MultiObjectTracker {
public:
    explicit MultiObjectTracker(TrackerConfig cfg = {}) : cfg_(cfg) {}

    const std::vector<ObstacleTrack>& step(std::span<const Detection> dets, double dt);

    const std::vector<ObstacleTrack>& tracks() const { return tracks_; }
    const TrackerConfig& config() const { return cfg_; }
    void reset() {
        tracks_.clear();
        next_id_ = 0;
    }

private:
    ObstacleTrack spawn(const Detection& det);

    TrackerConfig cfg_;
    std::vector<ObstacleTrack> tracks_;
    int next_id_ = 0;
};

}  // namespace navlab
