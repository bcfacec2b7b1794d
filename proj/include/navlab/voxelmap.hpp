#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "navlab/geometry.hpp"
#include "navlab/matrix.hpp"

namespace navlab {

struct LogOddsParams {
    double l_occ = 0.85;
    double l_free = -0.4;
    double l_min = -2.0;
    double l_max = 3.5;
};

struct AABB {
    Vec3 lo;
    Vec3 hi;
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
               p.z >= lo.z && p.z <= hi.z;
    }
};

// Ray-casting pattern for the static obstacle state: n_h azimuths over the
// full circle, n_v elevations spread linearly over the vertical FOV.
struct RayConfig {
    int n_h = 36;
    int n_v = 5;
    double v_fov_min = -0.5235987755982988;  // -30 deg
    double v_fov_max = 0.5235987755982988;   // +30 deg
    double max_range = 4.0;
    double miss_offset = 0.1;

    double miss_value() const { return max_range + miss_offset; }
    bool valid() const {
        return n_h >= 4 && n_v >= 1 && max_range > 0.0 && miss_offset > 0.0;
    }
    double azimuth(int i) const { return 2.0 * M_PI * i / n_h; }
    double elevation(int j) const {
        if (n_v == 1) return 0.5 * (v_fov_min + v_fov_max);
        return v_fov_min + (v_fov_max - v_fov_min) * j / (n_v - 1);
    }
};

// Fixed-memory 3D log-odds occupancy grid. The log-odds array is allocated
// once at construction and never reallocates; queries are O(1) index math.
class OccupancyGrid {
public:
    OccupancyGrid(double resolution, int nx, int ny, int nz, Vec3 origin,
                  LogOddsParams params = {});

    double resolution() const { return resolution_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    const Vec3& origin() const { return origin_; }
    const LogOddsParams& params() const { return params_; }

    const std::vector<double>& log_odds() const { return log_odds_; }

    bool in_bounds(int ix, int iy, int iz) const {
        return ix >= 0 && ix < nx_ && iy >= 0 && iy < ny_ && iz >= 0 && iz < nz_;
    }
    bool in_bounds(const Vec3& p) const;

    // Voxel index of a point; a point exactly on a face belongs to the voxel
    // on the +axis side (floor convention).
    std::array<int, 3> voxel_of(const Vec3& p) const;
    Vec3 voxel_center(int ix, int iy, int iz) const;

    double log_odds_at(int ix, int iy, int iz) const {
        return log_odds_[flat(ix, iy, iz)];
    }
    void set_log_odds(int ix, int iy, int iz, double value);

    bool is_occupied_voxel(int ix, int iy, int iz) const {
        return log_odds_[flat(ix, iy, iz)] > 0.0;
    }
    // Out-of-bounds points report unoccupied.
    bool is_occupied(const Vec3& p) const;

    // Integrates one sensor frame: each hit voxel gains l_occ, voxels the ray
    // traverses before the hit gain l_free, everything clamped to
    // [l_min, l_max]. Voxels inside any dynamic box are then reset to zero so
    // moving obstacles never persist in the static map. Hits outside the grid
    // are ignored.
    void update_occupancy(const Vec3& sensor_origin, std::span<const Vec3> hit_points,
                          std::span<const AABB> dynamic_boxes = {});

    // Distance from origin to the entry face of the first occupied voxel
    // (Amanatides-Woo traversal). Misses return max_range + miss_offset;
    // an origin inside an occupied voxel returns 0.
    double raycast(const Vec3& origin, const Vec3& dir, double max_range,
                   double miss_offset) const;

    // Ray-length matrix (n_h x n_v). Azimuths are measured in the goal frame
    // so the encoding rotates with the episode, matching the internal state.
    Matrix static_state(const Vec3& robot_pos, const RayConfig& cfg,
                        const GoalFrame& frame = {}) const;

    // Marks every voxel whose center lies inside the vertical cylinder as
    // fully occupied (l_max). Used by the scenario generator.
    void rasterize_cylinder(double cx, double cy, double radius, double z0, double z1);

    void clear();

    // Flat binary snapshot: header (magic, version, dims, resolution, origin)
    // followed by the raw log-odds array, little-endian.
    void save(const std::string& path) const;
    static OccupancyGrid load(const std::string& path);

private:
    size_t flat(int ix, int iy, int iz) const {
        return (static_cast<size_t>(iz) * ny_ + iy) * nx_ + ix;
    }

    double resolution_;
    int nx_, ny_, nz_;
    Vec3 origin_;
    LogOddsParams params_;
    std::vector<double> log_odds_;
};

}  // namespace navlab
