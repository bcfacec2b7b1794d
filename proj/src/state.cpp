#include "navlab/state.hpp"

#include <algorithm>
#include <numeric>

namespace navlab {

std::array<double, 7> internal_state(const Vec3& robot_pos, const Vec3& robot_vel,
                                     const Vec3& goal, const GoalFrame& frame) {
    const Vec3 rel = frame.to_frame_point(goal) - frame.to_frame_point(robot_pos);
    const double dist = rel.norm();
    const Vec3 dir = dist < 1e-6 ? Vec3{} : rel / dist;
    const Vec3 vel = frame.to_frame_vector(robot_vel);
    return {dir.x, dir.y, dir.z, dist < 1e-6 ? 0.0 : dist, vel.x, vel.y, vel.z};
}

Matrix dynamic_state(const Vec3& robot_pos, std::span<const ObstacleTrack> tracks,
                     const EncoderConfig& cfg, const GoalFrame& frame) {
    Matrix out(cfg.n_d, 9);

    std::vector<int> order(tracks.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double da = (tracks[a].position() - robot_pos).norm_sq();
        const double db = (tracks[b].position() - robot_pos).norm_sq();
        if (da != db) return da < db;
        return tracks[a].id < tracks[b].id;
    });

    const int n = std::min<int>(cfg.n_d, static_cast<int>(tracks.size()));
    for (int row = 0; row < n; ++row) {
        const ObstacleTrack& t = tracks[order[row]];
        const Vec3 rel = frame.to_frame_vector(t.position() - robot_pos);
        const double dist = rel.norm();
        const Vec3 dir = dist < 1e-9 ? Vec3{} : rel / dist;
        const Vec3 vel = frame.to_frame_vector(t.velocity());
        out(row, 0) = dir.x;
        out(row, 1) = dir.y;
        out(row, 2) = dir.z;
        out(row, 3) = dist;
        out(row, 4) = vel.x;
        out(row, 5) = vel.y;
        out(row, 6) = vel.z;
        out(row, 7) = t.width;
        out(row, 8) = t.height;
    }
    return out;
}

StateBundle encode(const Vec3& robot_pos, const Vec3& robot_vel, const Vec3& goal,
                   const GoalFrame& frame, const OccupancyGrid& grid,
                   std::span<const ObstacleTrack> tracks, const EncoderConfig& cfg) {
    StateBundle b;
    b.s_int = internal_state(robot_pos, robot_vel, goal, frame);
    b.s_dyn = dynamic_state(robot_pos, tracks, cfg, frame);
    b.s_stat = grid.static_state(robot_pos, cfg.ray, frame);
    return b;
}

}  // namespace navlab
