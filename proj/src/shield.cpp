#include "navlab/shield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace navlab {

namespace {

constexpr double kFeasTol = 1e-9;
// Exit vectors are stretched by this much so the projected action lands
// strictly outside the VO instead of exactly on its boundary.
constexpr double kExitMargin = 1e-7;

// Deterministic lateral direction for symmetric ties: perpendicular to the
// axis, pointing toward positive azimuth.
Vec3 tie_break_lateral(const Vec3& axis) {
    Vec3 e = Vec3{0, 0, 1}.cross(axis);
    if (e.norm() < 1e-9) return {0, 1, 0};
    e = e.normalized();
    if (e.y < 0 || (e.y == 0 && e.x < 0)) e = -e;
    return e;
}

// Gaussian elimination with partial pivoting, n <= 4.
bool solve_small(int n, double a[/*n*n*/], double b[/*n*/], double x[/*n*/]) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (std::abs(a[piv * n + col]) < 1e-12) return false;
        if (piv != col) {
            for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
            std::swap(b[col], b[piv]);
        }
        const double inv = 1.0 / a[col * n + col];
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] * inv;
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[r];
        for (int c = r + 1; c < n; ++c) acc -= a[r * n + c] * x[c];
        x[r] = acc / a[r * n + r];
    }
    return true;
}

// Normalized constraint in <= 3 variables plus box handling: n.v >= d.
struct LinCon {
    Vec3 n;
    double d;
    double eval(const Vec3& v) const { return n.dot(v) - d; }
};

}  // namespace

VoRegion make_vo_region(const Vec3& p_rel, double radius, double tau) {
    VoRegion r;
    const double dist = p_rel.norm();
    r.apex_disc_center = p_rel / tau;
    r.disc_radius = radius / tau;
    r.axis = p_rel / dist;
    r.half_angle = std::asin(std::min(1.0, radius / dist));
    r.tau = tau;
    return r;
}

bool in_vo(const Vec3& v_rel, const Vec3& p_rel, double radius, double tau) {
    const double vv = v_rel.norm_sq();
    if (vv == 0.0) return false;
    const double pv = p_rel.dot(v_rel);
    if (pv <= 0.0) return false;  // moving away; |p_rel| > radius by premise
    const double pp = p_rel.norm_sq();
    const double disc = pv * pv - vv * (pp - radius * radius);
    if (disc < 0.0) return false;
    const double t_first = (pv - std::sqrt(disc)) / vv;
    return t_first <= tau;
}

Vec3 exit_vector(const Vec3& v_rel, const Vec3& p_rel, double radius, double tau) {
    const VoRegion vo = make_vo_region(p_rel, radius, tau);
    const Vec3 w = v_rel - vo.apex_disc_center;
    const double w_len = w.norm();

    // From the truncation-sphere center every cap direction is equidistant;
    // aim at the tangency circle (the most lateral point of the cap) on the
    // positive-azimuth side. A purely lateral push would stay inside the
    // cone.
    if (w_len < 1e-12) {
        const Vec3 lat = tie_break_lateral(vo.axis);
        const double sin_a = std::sin(vo.half_angle);
        const double cos_a = std::cos(vo.half_angle);
        return vo.disc_radius * (cos_a * lat - sin_a * vo.axis);
    }

    // Cut-off sphere region: w points into the cap facing the apex.
    const double dot_wp = w.dot(p_rel);
    if (dot_wp < 0.0 && dot_wp * dot_wp > radius * radius * w_len * w_len)
        return (vo.disc_radius - w_len) * (w / w_len);

    // Cone-surface region: project in the (axis, lateral) plane.
    const double v_par = v_rel.dot(vo.axis);
    const Vec3 perp_vec = v_rel - v_par * vo.axis;
    const double v_perp = perp_vec.norm();
    const Vec3 lateral = v_perp < 1e-12 ? tie_break_lateral(vo.axis)
                                        : perp_vec / v_perp;
    const double cos_a = std::cos(vo.half_angle);
    const double sin_a = std::sin(vo.half_angle);
    const double s = std::max(0.0, v_par * cos_a + v_perp * sin_a);
    const Vec3 foot = s * cos_a * vo.axis + s * sin_a * lateral;
    return foot - v_rel;
}

Vec3 penetration_exit(const Vec3& v_rel, const Vec3& p_rel, double radius, double dt) {
    const double dist = p_rel.norm();
    const Vec3 n = dist < 1e-12 ? Vec3{1, 0, 0} : -(p_rel / dist);
    const double needed = (radius - dist) / dt;
    const double current = v_rel.dot(n);
    return std::max(0.0, needed - current) * n;
}

std::vector<ObstacleSphere> static_spheres(const Vec3& robot_pos, const Matrix& s_stat,
                                           const RayConfig& cfg, double resolution,
                                           double robot_radius, double margin,
                                           int keep) {
    struct Hit {
        double len;
        Vec3 center;
    };
    std::vector<Hit> hits;
    const double miss = cfg.miss_value();
    for (int i = 0; i < s_stat.rows(); ++i)
        for (int j = 0; j < s_stat.cols(); ++j) {
            const double len = s_stat(i, j);
            if (len >= miss) continue;
            const double az = cfg.azimuth(i), el = cfg.elevation(j);
            const Vec3 dir{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                           std::sin(el)};
            hits.push_back({len, robot_pos + len * dir});
        }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const Hit& a, const Hit& b) { return a.len < b.len; });
    if (static_cast<int>(hits.size()) > keep) hits.resize(keep);

    std::vector<ObstacleSphere> out;
    out.reserve(hits.size());
    const double radius = 0.5 * resolution + robot_radius + margin;
    for (const Hit& h : hits) out.push_back({h.center, radius, Vec3{}});
    return out;
}

std::vector<ObstacleSphere> enclose_cylinder(const Vec3& center, const Vec3& velocity,
                                             double width, double height,
                                             double robot_radius, double margin) {
    const int n = std::max(1, static_cast<int>(std::ceil(height / width)));
    const double seg = height / n;
    const double r_obs = std::sqrt(0.25 * width * width + 0.25 * seg * seg);
    std::vector<ObstacleSphere> out;
    out.reserve(n);
    for (int k = 0; k < n; ++k) {
        const double z = center.z - 0.5 * height + (k + 0.5) * seg;
        out.push_back({{center.x, center.y, z}, r_obs + robot_radius + margin, velocity});
    }
    return out;
}

std::vector<HalfspaceConstraint> build_constraints(const Vec3& v_rl,
                                                   std::span<const ObstacleSphere> obstacles,
                                                   double tau, double dt) {
    std::vector<HalfspaceConstraint> cons;
    for (const ObstacleSphere& o : obstacles) {
        const Vec3 p_rel = o.center;
        const Vec3 v_rel = v_rl - o.velocity;
        if (p_rel.norm() <= o.radius) {
            const double dist = p_rel.norm();
            const Vec3 n = dist < 1e-12 ? Vec3{1, 0, 0} : -(p_rel / dist);
            const double needed = (o.radius - dist) / dt;
            // Plane in relative velocities shifted by the obstacle velocity
            // so it constrains the absolute action.
            cons.push_back({needed * n + o.velocity, n});
        } else if (in_vo(v_rel, p_rel, o.radius, tau)) {
            Vec3 dv = exit_vector(v_rel, p_rel, o.radius, tau);
            const double len = dv.norm();
            if (len < 1e-15) continue;
            dv += kExitMargin * (dv / len);
            cons.push_back({v_rl + dv, dv});
        }
    }
    return cons;
}

Vec3 safe_action(const Vec3& v_rl, std::span<const ObstacleSphere> obstacles,
                 const Vec3& v_min, const Vec3& v_max, double tau, double dt,
                 ShieldReport* report) {
    if (report) *report = ShieldReport{};

    const auto halfspaces = build_constraints(v_rl, obstacles, tau, dt);
    if (report) report->n_constraints = static_cast<int>(halfspaces.size());

    // Assemble normalized constraints: VO/penetration planes then box faces.
    std::vector<LinCon> cons;
    cons.reserve(halfspaces.size() + 6);
    for (const auto& h : halfspaces) {
        const Vec3 n = h.normal.normalized();
        cons.push_back({n, n.dot(h.point)});
    }
    cons.push_back({{1, 0, 0}, v_min.x});
    cons.push_back({{-1, 0, 0}, -v_max.x});
    cons.push_back({{0, 1, 0}, v_min.y});
    cons.push_back({{0, -1, 0}, -v_max.y});
    cons.push_back({{0, 0, 1}, v_min.z});
    cons.push_back({{0, 0, -1}, -v_max.z});
    const int m = static_cast<int>(cons.size());

    auto feasible = [&](const Vec3& v) {
        for (const LinCon& c : cons)
            if (c.eval(v) < -kFeasTol) return false;
        return true;
    };

    if (feasible(v_rl)) return v_rl;  // policy action already safe
    if (report) report->modified = true;

    // Exact projection: the optimum is the projection of v_rl onto some face
    // of the polyhedron, so enumerate active sets of size 1..3 as equalities
    // and keep the closest feasible candidate.
    double best_d2 = std::numeric_limits<double>::infinity();
    Vec3 best{};
    bool found = false;
    auto try_active = [&](const int* act, int k) {
        // v = v_rl + A^T lambda with A v = b  =>  (A A^T) lambda = b - A v_rl
        double aat[16], rhs[4], lam[4];
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j)
                aat[i * k + j] = cons[act[i]].n.dot(cons[act[j]].n);
            rhs[i] = cons[act[i]].d - cons[act[i]].n.dot(v_rl);
        }
        if (!solve_small(k, aat, rhs, lam)) return;
        Vec3 v = v_rl;
        for (int i = 0; i < k; ++i) v += lam[i] * cons[act[i]].n;
        if (!feasible(v)) return;
        const double d2 = (v - v_rl).norm_sq();
        if (d2 < best_d2 - 1e-15) {
            best_d2 = d2;
            best = v;
            found = true;
        }
    };

    for (int i = 0; i < m; ++i) {
        const int a1[1] = {i};
        try_active(a1, 1);
        for (int j = i + 1; j < m; ++j) {
            const int a2[2] = {i, j};
            try_active(a2, 2);
            for (int k = j + 1; k < m; ++k) {
                const int a3[3] = {i, j, k};
                try_active(a3, 3);
            }
        }
    }

    if (!found) {
        // Infeasible: minimize the worst violation over the box (an LP in
        // (v, t)), solved by vertex enumeration over 4-subsets.
        if (report) report->infeasible_relaxed = true;
        struct Con4 {
            double n[4];
            double d;
        };
        // Slack t relaxes the VO planes only; the box stays hard.
        std::vector<Con4> lp;
        for (size_t i = 0; i + 6 < cons.size(); ++i)
            lp.push_back({{cons[i].n.x, cons[i].n.y, cons[i].n.z, 1.0}, cons[i].d});
        for (size_t i = cons.size() - 6; i < cons.size(); ++i)
            lp.push_back({{cons[i].n.x, cons[i].n.y, cons[i].n.z, 0.0}, cons[i].d});
        lp.push_back({{0, 0, 0, 1.0}, 0.0});  // t >= 0
        const int lm = static_cast<int>(lp.size());

        double best_t = std::numeric_limits<double>::infinity();
        double best_dist = std::numeric_limits<double>::infinity();
        Vec3 best_v{};
        bool any = false;
        auto lp_feasible = [&](const double x[4]) {
            for (const Con4& c : lp) {
                double acc = -c.d;
                for (int i = 0; i < 4; ++i) acc += c.n[i] * x[i];
                if (acc < -1e-7) return false;
            }
            return true;
        };
        for (int i = 0; i < lm; ++i)
            for (int j = i + 1; j < lm; ++j)
                for (int k = j + 1; k < lm; ++k)
                    for (int l = k + 1; l < lm; ++l) {
                        double a[16] = {lp[i].n[0], lp[i].n[1], lp[i].n[2], lp[i].n[3],
                                        lp[j].n[0], lp[j].n[1], lp[j].n[2], lp[j].n[3],
                                        lp[k].n[0], lp[k].n[1], lp[k].n[2], lp[k].n[3],
                                        lp[l].n[0], lp[l].n[1], lp[l].n[2], lp[l].n[3]};
                        double b[4] = {lp[i].d, lp[j].d, lp[k].d, lp[l].d};
                        double x[4];
                        if (!solve_small(4, a, b, x)) continue;
                        if (!lp_feasible(x)) continue;
                        const Vec3 v{x[0], x[1], x[2]};
                        const double dist = (v - v_rl).norm_sq();
                        if (x[3] < best_t - 1e-12 ||
                            (std::abs(x[3] - best_t) <= 1e-12 && dist < best_dist - 1e-12)) {
                            best_t = x[3];
                            best_dist = dist;
                            best_v = v;
                            any = true;
                        }
                    }
        if (any) {
            if (report) {
                for (int i = 0; i < m; ++i)
                    if (std::abs(cons[i].eval(best_v)) <= 1e-7)
                        report->active.push_back(i);
            }
            return best_v;
        }
        // Last resort: clamp to the box.
        return {std::clamp(v_rl.x, v_min.x, v_max.x),
                std::clamp(v_rl.y, v_min.y, v_max.y),
                std::clamp(v_rl.z, v_min.z, v_max.z)};
    }

    if (report) {
        for (int i = 0; i < m; ++i)
            if (std::abs(cons[i].eval(best)) <= 1e-7) report->active.push_back(i);
    }
    return best;
}

}  // namespace navlab
