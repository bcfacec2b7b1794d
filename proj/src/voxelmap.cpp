#include "navlab/voxelmap.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace navlab {

namespace {

constexpr char kMagic[4] = {'N', 'V', 'X', 'G'};
constexpr uint32_t kVersion = 1;

inline int step_sign(double d) { return d > 0.0 ? 1 : (d < 0.0 ? -1 : 0); }

}  // namespace

OccupancyGrid::OccupancyGrid(double resolution, int nx, int ny, int nz, Vec3 origin,
                             LogOddsParams params)
    : resolution_(resolution),
      nx_(nx),
      ny_(ny),
      nz_(nz),
      origin_(origin),
      params_(params),
      log_odds_(static_cast<size_t>(nx) * ny * nz, 0.0) {
    if (resolution <= 0.0 || nx <= 0 || ny <= 0 || nz <= 0)
        throw std::invalid_argument("invalid grid dimensions");
}

bool OccupancyGrid::in_bounds(const Vec3& p) const {
    const auto v = voxel_of(p);
    return in_bounds(v[0], v[1], v[2]);
}

std::array<int, 3> OccupancyGrid::voxel_of(const Vec3& p) const {
    return {static_cast<int>(std::floor((p.x - origin_.x) / resolution_)),
            static_cast<int>(std::floor((p.y - origin_.y) / resolution_)),
            static_cast<int>(std::floor((p.z - origin_.z) / resolution_))};
}

Vec3 OccupancyGrid::voxel_center(int ix, int iy, int iz) const {
    return {origin_.x + (ix + 0.5) * resolution_,
            origin_.y + (iy + 0.5) * resolution_,
            origin_.z + (iz + 0.5) * resolution_};
}

void OccupancyGrid::set_log_odds(int ix, int iy, int iz, double value) {
    log_odds_[flat(ix, iy, iz)] =
        std::clamp(value, params_.l_min, params_.l_max);
}

bool OccupancyGrid::is_occupied(const Vec3& p) const {
    const auto v = voxel_of(p);
    if (!in_bounds(v[0], v[1], v[2])) return false;
    return is_occupied_voxel(v[0], v[1], v[2]);
}

void OccupancyGrid::update_occupancy(const Vec3& sensor_origin,
                                     std::span<const Vec3> hit_points,
                                     std::span<const AABB> dynamic_boxes) {
    for (const Vec3& hit : hit_points) {
        if (!hit.is_finite()) continue;
        const auto hv = voxel_of(hit);
        if (!in_bounds(hv[0], hv[1], hv[2])) continue;  // outside: ignored

        // March the ray from the sensor to the hit voxel, freeing traversed
        // voxels, then bump the hit voxel itself.
        const Vec3 d = hit - sensor_origin;
        auto cur = voxel_of(sensor_origin);
        const int sx = step_sign(d.x), sy = step_sign(d.y), sz = step_sign(d.z);

        // Parametric distances to the next voxel boundary on each axis.
        double t_max[3], t_delta[3];
        const double grid_o[3] = {origin_.x, origin_.y, origin_.z};
        const double ro[3] = {sensor_origin.x, sensor_origin.y, sensor_origin.z};
        const double rd[3] = {d.x, d.y, d.z};
        const int step[3] = {sx, sy, sz};
        int idx[3] = {cur[0], cur[1], cur[2]};
        const int hit_idx[3] = {hv[0], hv[1], hv[2]};
        for (int a = 0; a < 3; ++a) {
            if (step[a] == 0) {
                t_max[a] = std::numeric_limits<double>::infinity();
                t_delta[a] = std::numeric_limits<double>::infinity();
            } else {
                const double boundary =
                    grid_o[a] + (idx[a] + (step[a] > 0 ? 1 : 0)) * resolution_;
                t_max[a] = (boundary - ro[a]) / rd[a];
                t_delta[a] = resolution_ / std::abs(rd[a]);
            }
        }

        int guard = nx_ + ny_ + nz_ + 3;
        while (guard-- > 0) {
            if (idx[0] == hit_idx[0] && idx[1] == hit_idx[1] && idx[2] == hit_idx[2])
                break;
            if (in_bounds(idx[0], idx[1], idx[2])) {
                const size_t f = flat(idx[0], idx[1], idx[2]);
                log_odds_[f] = std::clamp(log_odds_[f] + params_.l_free,
                                          params_.l_min, params_.l_max);
            }
            int axis = 0;
            if (t_max[1] < t_max[axis]) axis = 1;
            if (t_max[2] < t_max[axis]) axis = 2;
            idx[axis] += step[axis];
            t_max[axis] += t_delta[axis];
        }

        const size_t f = flat(hv[0], hv[1], hv[2]);
        log_odds_[f] =
            std::clamp(log_odds_[f] + params_.l_occ, params_.l_min, params_.l_max);
    }

    for (const AABB& box : dynamic_boxes) {
        const auto lo = voxel_of(box.lo);
        const auto hi = voxel_of(box.hi);
        const int x0 = std::max(lo[0], 0), x1 = std::min(hi[0], nx_ - 1);
        const int y0 = std::max(lo[1], 0), y1 = std::min(hi[1], ny_ - 1);
        const int z0 = std::max(lo[2], 0), z1 = std::min(hi[2], nz_ - 1);
        for (int iz = z0; iz <= z1; ++iz)
            for (int iy = y0; iy <= y1; ++iy)
                for (int ix = x0; ix <= x1; ++ix) log_odds_[flat(ix, iy, iz)] = 0.0;
    }
}

double OccupancyGrid::raycast(const Vec3& origin, const Vec3& dir, double max_range,
                              double miss_offset) const {
    const double miss = max_range + miss_offset;
    auto cur = voxel_of(origin);
    if (in_bounds(cur[0], cur[1], cur[2]) && is_occupied_voxel(cur[0], cur[1], cur[2]))
        return 0.0;

    const double grid_o[3] = {origin_.x, origin_.y, origin_.z};
    const double ro[3] = {origin.x, origin.y, origin.z};
    const double rd[3] = {dir.x, dir.y, dir.z};
    int idx[3] = {cur[0], cur[1], cur[2]};
    int step[3];
    double t_max[3], t_delta[3];
    for (int a = 0; a < 3; ++a) {
        step[a] = step_sign(rd[a]);
        if (step[a] == 0) {
            t_max[a] = std::numeric_limits<double>::infinity();
            t_delta[a] = std::numeric_limits<double>::infinity();
        } else {
            const double boundary =
                grid_o[a] + (idx[a] + (step[a] > 0 ? 1 : 0)) * resolution_;
            t_max[a] = (boundary - ro[a]) / rd[a];
            t_delta[a] = resolution_ / std::abs(rd[a]);
        }
    }

    for (;;) {
        // Ties step the lowest axis first (+x before +y before +z).
        int axis = 0;
        if (t_max[1] < t_max[axis]) axis = 1;
        if (t_max[2] < t_max[axis]) axis = 2;
        const double t_enter = t_max[axis];
        if (t_enter > max_range) return miss;
        idx[axis] += step[axis];
        t_max[axis] += t_delta[axis];
        if (in_bounds(idx[0], idx[1], idx[2])) {
            if (is_occupied_voxel(idx[0], idx[1], idx[2])) return t_enter;
        }
    }
}

Matrix OccupancyGrid::static_state(const Vec3& robot_pos, const RayConfig& cfg,
                                   const GoalFrame& frame) const {
    Matrix out(cfg.n_h, cfg.n_v);
    for (int i = 0; i < cfg.n_h; ++i) {
        const double az = cfg.azimuth(i);
        for (int j = 0; j < cfg.n_v; ++j) {
            const double el = cfg.elevation(j);
            const Vec3 dir_goal{std::cos(el) * std::cos(az),
                                std::cos(el) * std::sin(az), std::sin(el)};
            const Vec3 dir = frame.to_world_vector(dir_goal);
            out(i, j) = raycast(robot_pos, dir, cfg.max_range, cfg.miss_offset);
        }
    }
    return out;
}

void OccupancyGrid::rasterize_cylinder(double cx, double cy, double radius,
                                       double z0, double z1) {
    const auto lo = voxel_of({cx - radius, cy - radius, z0});
    const auto hi = voxel_of({cx + radius, cy + radius, z1});
    const int x0 = std::max(lo[0], 0), x1 = std::min(hi[0], nx_ - 1);
    const int y0 = std::max(lo[1], 0), y1 = std::min(hi[1], ny_ - 1);
    const int zz0 = std::max(lo[2], 0), zz1 = std::min(hi[2], nz_ - 1);
    const double r2 = radius * radius;
    for (int iz = zz0; iz <= zz1; ++iz) {
        const double zc = origin_.z + (iz + 0.5) * resolution_;
        if (zc < z0 || zc > z1) continue;
        for (int iy = y0; iy <= y1; ++iy) {
            const double yc = origin_.y + (iy + 0.5) * resolution_;
            for (int ix = x0; ix <= x1; ++ix) {
                const double xc = origin_.x + (ix + 0.5) * resolution_;
                const double dx = xc - cx, dy = yc - cy;
                if (dx * dx + dy * dy <= r2)
                    log_odds_[flat(ix, iy, iz)] = params_.l_max;
            }
        }
    }
}

void OccupancyGrid::clear() {
    std::fill(log_odds_.begin(), log_odds_.end(), 0.0);
}

void OccupancyGrid::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f.write(kMagic, 4);
    auto w32 = [&](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    auto w64 = [&](double v) { f.write(reinterpret_cast<const char*>(&v), 8); };
    w32(kVersion);
    w32(static_cast<uint32_t>(nx_));
    w32(static_cast<uint32_t>(ny_));
    w32(static_cast<uint32_t>(nz_));
    w64(resolution_);
    w64(origin_.x);
    w64(origin_.y);
    w64(origin_.z);
    f.write(reinterpret_cast<const char*>(log_odds_.data()),
            static_cast<std::streamsize>(log_odds_.size() * sizeof(double)));
    if (!f) throw std::runtime_error("write failed: " + path);
}

OccupancyGrid OccupancyGrid::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for read: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("bad grid snapshot magic: " + path);
    auto r32 = [&]() {
        uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto r64 = [&]() {
        double v = 0;
        f.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    const uint32_t version = r32();
    if (version != kVersion)
        throw std::runtime_error("unsupported grid snapshot version");
    const int nx = static_cast<int>(r32());
    const int ny = static_cast<int>(r32());
    const int nz = static_cast<int>(r32());
    const double res = r64();
    Vec3 origin{r64(), r64(), r64()};
    OccupancyGrid grid(res, nx, ny, nz, origin);
    f.read(reinterpret_cast<char*>(grid.log_odds_.data()),
           static_cast<std::streamsize>(grid.log_odds_.size() * sizeof(double)));
    if (!f) throw std::runtime_error("truncated grid snapshot: " + path);
    return grid;
}

}  // namespace navlab
