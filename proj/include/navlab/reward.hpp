#pragma once

#include <span>

#include "navlab/geometry.hpp"
#include "navlab/matrix.hpp"
#include "navlab/tracker.hpp"

namespace navlab {

struct RewardWeights {
    double velocity = 1.0;
    double static_safety = 0.2;
    double dynamic_safety = 0.2;
    double smoothness = 0.1;
    double height = 0.5;
};

struct RewardTerms {
    double velocity = 0.0;
    double static_safety = 0.0;
    double dynamic_safety = 0.0;
    double smoothness = 0.0;
    double height = 0.0;
};

// The five shaped terms:
//   velocity        goal-direction dot robot velocity
//   static_safety   mean log ray distance (s_stat entries must be > 0)
//   dynamic_safety  mean log distance over present tracks, 0 when none;
//                   distances clamped at 1e-3 before the log
//   smoothness      -|V_t - V_{t-1}|
//   height          -(min(|z-z_start|, |z-z_goal|))^2 outside the start/goal
//                   height band (tolerance height_tol), else 0
RewardTerms reward_terms(const Vec3& robot_pos, const Vec3& robot_vel,
                         const Vec3& prev_vel, const Vec3& goal, const Vec3& start,
                         const Matrix& s_stat, std::span<const ObstacleTrack> tracks,
                         double height_tol = 0.1);

double total_reward(const RewardTerms& terms, const RewardWeights& w);

}  // namespace navlab
