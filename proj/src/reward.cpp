#include "navlab/reward.hpp"

#include <algorithm>
#include <cmath>

namespace navlab {

RewardTerms reward_terms(const Vec3& robot_pos, const Vec3& robot_vel,
                         const Vec3& prev_vel, const Vec3& goal, const Vec3& start,
                         const Matrix& s_stat, std::span<const ObstacleTrack> tracks,
                         double height_tol) {
    RewardTerms r;

    const Vec3 to_goal = goal - robot_pos;
    const double dist = to_goal.norm();
    r.velocity = dist < 1e-9 ? 0.0 : (to_goal / dist).dot(robot_vel);

    if (!s_stat.data().empty()) {
        // Distances clamp at 1e-3 so a ray degenerating to zero (robot inside
        // an occupied voxel on its terminal step) cannot emit -inf.
        double acc = 0.0;
        for (double v : s_stat.data()) acc += std::log(std::max(v, 1e-3));
        r.static_safety = acc / static_cast<double>(s_stat.size());
    }

    if (!tracks.empty()) {
        double acc = 0.0;
        for (const ObstacleTrack& t : tracks) {
            const double d = std::max((robot_pos - t.position()).norm(), 1e-3);
            acc += std::log(d);
        }
        r.dynamic_safety = acc / static_cast<double>(tracks.size());
    }

    r.smoothness = -(robot_vel - prev_vel).norm();

    const double z_lo = std::min(start.z, goal.z) - height_tol;
    const double z_hi = std::max(start.z, goal.z) + height_tol;
    if (robot_pos.z < z_lo || robot_pos.z > z_hi) {
        const double d = std::min(std::abs(robot_pos.z - start.z),
                                  std::abs(robot_pos.z - goal.z));
        r.height = -d * d;
    }
    return r;
}

double total_reward(const RewardTerms& t, const RewardWeights& w) {
    return w.velocity * t.velocity + w.static_safety * t.static_safety +
           w.dynamic_safety * t.dynamic_safety + w.smoothness * t.smoothness +
           w.height * t.height;
}

}  // namespace navlab
