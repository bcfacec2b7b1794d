#pragma once

#include <array>
#include <span>

#include "navlab/geometry.hpp"
#include "navlab/matrix.hpp"
#include "navlab/tracker.hpp"
#include "navlab/voxelmap.hpp"

namespace navlab {

struct EncoderConfig {
    int n_d = 5;  // max dynamic obstacles in the state
    RayConfig ray;
};

// Policy input triple, everything expressed in the goal frame:
//   s_int  [7]        unit goal direction, distance, robot velocity
//   s_dyn  [n_d x 9]  per obstacle: unit rel-pos, distance, velocity, w, h
//   s_stat [n_h x n_v] ray lengths against the static map
struct StateBundle {
    std::array<double, 7> s_int{};
    Matrix s_dyn;
    Matrix s_stat;
};

// At the goal (distance < 1e-6) the direction part is zero.
std::array<double, 7> internal_state(const Vec3& robot_pos, const Vec3& robot_vel,
                                     const Vec3& goal, const GoalFrame& frame);

// Tracks sorted by distance ascending (ties by id); rows beyond the track
// count stay exactly zero.
Matrix dynamic_state(const Vec3& robot_pos, std::span<const ObstacleTrack> tracks,
                     const EncoderConfig& cfg, const GoalFrame& frame);

StateBundle encode(const Vec3& robot_pos, const Vec3& robot_vel, const Vec3& goal,
                   const GoalFrame& frame, const OccupancyGrid& grid,
                   std::span<const ObstacleTrack> tracks, const EncoderConfig& cfg);

}  // namespace navlab
