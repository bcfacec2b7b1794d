#pragma once

#include <span>
#include <vector>

#include "navlab/geometry.hpp"
#include "navlab/matrix.hpp"
#include "navlab/voxelmap.hpp"

namespace navlab {

// All shield geometry lives in a robot-centered, goal-aligned frame: sphere
// centers are positions relative to the robot, velocities are absolute, and
// the box limits of safe_action are axis-aligned in that frame.
struct ObstacleSphere {
    Vec3 center;    // relative to the robot
    double radius;  // obstacle + robot + safety margin
    Vec3 velocity;
};

// Truncated velocity-obstacle region for one sphere: the cone from the origin
// with half-angle asin(R/|p|), cut near the apex by the sphere of radius R/tau
// centered at p/tau. Defined only for non-penetrating relative positions.
struct VoRegion {
    Vec3 apex_disc_center;
    double disc_radius;
    Vec3 axis;          // unit, toward the obstacle
    double half_angle;  // in (0, pi/2)
    double tau;
};

VoRegion make_vo_region(const Vec3& p_rel, double radius, double tau);

// Linearized exit constraint: feasible velocities satisfy
// (v - point) . normal >= 0.
struct HalfspaceConstraint {
    Vec3 point;
    Vec3 normal;  // unnormalized exit vector for VO constraints
};

struct ShieldConfig {
    double horizon = 2.0;   // tau, s
    double margin = 0.1;    // extra clearance, m
    int max_static = 15;    // K nearest static spheres kept
    double dt = 0.1;        // env tick, used by the penetration constraint
};

// True iff the relative velocity collides with the sphere within (0, tau].
// Requires |p_rel| > radius.
bool in_vo(const Vec3& v_rel, const Vec3& p_rel, double radius, double tau);

// Minimum velocity change that moves v_rel out of the truncated VO. Requires
// in_vo(...). Symmetric cases break ties toward positive azimuth.
Vec3 exit_vector(const Vec3& v_rel, const Vec3& p_rel, double radius, double tau);

// Already-penetrating case: the returned change makes the separation grow
// fast enough to clear the overlap within dt. Zero when already separating
// fast enough. p_rel = 0 falls back to a +x normal.
Vec3 penetration_exit(const Vec3& v_rel, const Vec3& p_rel, double radius, double dt);

// One zero-velocity sphere per hit ray (length < miss value), centered at the
// ray endpoint, radius = resolution/2 + robot_radius + margin. Keeps the
// `keep` nearest.
std::vector<ObstacleSphere> static_spheres(const Vec3& robot_pos, const Matrix& s_stat,
                                           const RayConfig& cfg, double resolution,
                                           double robot_radius, double margin,
                                           int keep);

// Covers a vertical cylinder (width = diameter) with stacked spheres, one per
// height/width segment. `center` is relative to the robot.
std::vector<ObstacleSphere> enclose_cylinder(const Vec3& center, const Vec3& velocity,
                                             double width, double height,
                                             double robot_radius, double margin);

struct ShieldReport {
    bool modified = false;
    bool infeasible_relaxed = false;
    int n_constraints = 0;
    std::vector<int> active;  // indices of binding constraints
};

// Projects the policy action onto the safe set: if no VO is violated the
// action passes through unchanged; otherwise solves
//   min |v - v_rl|^2  s.t. (v - point_i).normal_i >= 0, v_min <= v <= v_max
// by exact active-set enumeration. An infeasible constraint set falls back to
// the least-infeasible velocity (minimize the largest violation over the box)
// and flags the report.
Vec3 safe_action(const Vec3& v_rl, std::span<const ObstacleSphere> obstacles,
                 const Vec3& v_min, const Vec3& v_max, double tau, double dt,
                 ShieldReport* report = nullptr);

// The constraint list safe_action would solve; exposed for tests and logs.
std::vector<HalfspaceConstraint> build_constraints(const Vec3& v_rl,
                                                   std::span<const ObstacleSphere> obstacles,
                                                   double tau, double dt);

}  // namespace navlab
