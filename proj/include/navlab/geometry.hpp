#pragma once

#include <cmath>
#include <stdexcept>

namespace navlab {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm_sq() const { return dot(*this); }
    double norm() const { return std::sqrt(norm_sq()); }

    // Unit vector; the zero vector maps to zero.
    Vec3 normalized(double eps = 1e-12) const {
        const double n = norm();
        return n > eps ? *this / n : Vec3{};
    }

    bool is_finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// 3x3 matrix, row-major.
struct Mat3 {
    double m[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return {}; }

    // Rows given as vectors.
    static Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
        Mat3 r;
        r.m[0] = r0.x; r.m[1] = r0.y; r.m[2] = r0.z;
        r.m[3] = r1.x; r.m[4] = r1.y; r.m[5] = r1.z;
        r.m[6] = r2.x; r.m[7] = r2.y; r.m[8] = r2.z;
        return r;
    }

    static Mat3 rotation_z(double angle) {
        const double c = std::cos(angle), s = std::sin(angle);
        return from_rows({c, -s, 0}, {s, c, 0}, {0, 0, 1});
    }

    Vec3 row(int i) const { return {m[3 * i], m[3 * i + 1], m[3 * i + 2]}; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += m[3 * i + k] * o.m[3 * k + j];
                r.m[3 * i + j] = s;
            }
        return r;
    }

    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[3 * i + j] = m[3 * j + i];
        return r;
    }
};

// Goal coordinate frame: origin at the episode start position, x-axis toward
// the goal, y-axis parallel to the ground plane. Right-handed. The rotation
// maps world vectors into frame coordinates (rows are the frame axes).
struct GoalFrame {
    Vec3 origin;
    Mat3 rotation;

    Vec3 to_frame_point(const Vec3& p) const { return rotation * (p - origin); }
    Vec3 to_frame_vector(const Vec3& v) const { return rotation * v; }
    Vec3 to_world_point(const Vec3& p) const { return rotation.transposed() * p + origin; }
    Vec3 to_world_vector(const Vec3& v) const { return rotation.transposed() * v; }

    Vec3 x_axis() const { return rotation.row(0); }
    Vec3 y_axis() const { return rotation.row(1); }
    Vec3 z_axis() const { return rotation.row(2); }
};

// Builds the goal frame from start/goal. The x-axis is the unit start->goal
// direction and y = normalize(z_world x x) so it stays ground-parallel. When
// the goal is within 1e-6 of straight up/down that cross product degenerates;
// the fallback fixes y to world-y instead.
inline GoalFrame make_goal_frame(const Vec3& start, const Vec3& goal) {
    const Vec3 d = goal - start;
    const double len = d.norm();
    if (len <= 1e-6) throw std::invalid_argument("zero-length goal vector");
    const Vec3 x = d / len;

    const Vec3 z_world{0, 0, 1};
    Vec3 y = z_world.cross(x);
    if (y.norm() < 1e-6) {
        y = Vec3{0, 1, 0};
    } else {
        y = y.normalized();
    }
    const Vec3 z = x.cross(y);
    return GoalFrame{start, Mat3::from_rows(x, y, z)};
}

// Positions translate then rotate; free vectors (velocities) rotate only.
inline Vec3 to_goal_frame(const GoalFrame& frame, const Vec3& v, bool is_position) {
    return is_position ? frame.to_frame_point(v) : frame.to_frame_vector(v);
}

}  // namespace navlab
