#include <doctest.h>

#include <cmath>

#include "navlab/rng.hpp"
#include "navlab/shield.hpp"

using namespace navlab;

namespace {

// Directional sampling oracle for exit vectors: scan directions on the unit
// sphere, bisect the smallest magnitude that leaves the VO along each, and
// return the best length found.
double exit_oracle(const Vec3& v_rel, const Vec3& p_rel, double radius, double tau,
                   int n_dirs = 20000) {
    Rng rng(12345);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_dirs; ++i) {
        Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
        if (dir.norm() < 1e-9) continue;
        dir = dir.normalized();
        double lo = 0.0, hi = 8.0;
        if (in_vo(v_rel + dir * hi, p_rel, radius, tau)) continue;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (in_vo(v_rel + dir * mid, p_rel, radius, tau))
                lo = mid;
            else
                hi = mid;
        }
        best = std::min(best, hi);
    }
    return best;
}

bool feasible_point(const Vec3& v, const std::vector<HalfspaceConstraint>& cons,
                    const Vec3& v_min, const Vec3& v_max, double tol = 1e-6) {
    if (v.x < v_min.x - tol || v.x > v_max.x + tol || v.y < v_min.y - tol ||
        v.y > v_max.y + tol || v.z < v_min.z - tol || v.z > v_max.z + tol)
        return false;
    for (const auto& c : cons)
        if ((v - c.point).dot(c.normal.normalized()) < -tol) return false;
    return true;
}

}  // namespace

TEST_SUITE_BEGIN("shield");

TEST_CASE("in_vo membership examples") {
    const Vec3 p{5, 0, 0};
    SUBCASE("reaching the center exactly at the horizon") {
        CHECK(in_vo(p / 2.0, p, 1.0, 2.0));
    }
    SUBCASE("zero relative velocity is safe outside the sphere") {
        CHECK_FALSE(in_vo({0, 0, 0}, p, 1.0, 2.0));
    }
    SUBCASE("contact exactly at t = tau") {
        CHECK(in_vo({2, 0, 0}, p, 1.0, 2.0));
        // Slightly slower: first contact after the horizon.
        CHECK_FALSE(in_vo({1.99, 0, 0}, p, 1.0, 2.0));
    }
    SUBCASE("moving away is safe") { CHECK_FALSE(in_vo({-1, 0, 0}, p, 1.0, 2.0)); }
}

TEST_CASE("vo region geometry") {
    const VoRegion vo = make_vo_region({5, 0, 0}, 1.0, 2.0);
    CHECK(vo.apex_disc_center.x == doctest::Approx(2.5));
    CHECK(vo.disc_radius == doctest::Approx(0.5));
    CHECK(vo.half_angle == doctest::Approx(std::asin(0.2)));
}

TEST_CASE("exit vector leaves the region with minimal magnitude") {
    const double tau = 2.0, radius = 1.0;
    const Vec3 p{5, 0, 0};

    SUBCASE("head-on at the truncation center") {
        const Vec3 v{2.5, 0, 0};  // exactly the disc center
        REQUIRE(in_vo(v, p, radius, tau));
        const Vec3 dv = exit_vector(v, p, radius, tau);
        CHECK(dv.norm() == doctest::Approx(0.5).epsilon(1e-6));
        CHECK_FALSE(in_vo(v + dv * (1.0 + 1e-6), p, radius, tau));
        // Tie broken laterally toward positive azimuth.
        CHECK(dv.y > 0.0);
        const double oracle = exit_oracle(v, p, radius, tau);
        CHECK(dv.norm() <= oracle + 1e-3);
    }

    SUBCASE("near the disc rim the push is radial") {
        const Vec3 c{2.5, 0, 0};
        const Vec3 w{-0.3, 0.1, 0.05};
        const Vec3 v = c + w * (0.4 / w.norm() * 0.9);  // inside, near the rim
        REQUIRE(in_vo(v, p, radius, tau));
        const Vec3 dv = exit_vector(v, p, radius, tau);
        const Vec3 expect = (0.5 - (v - c).norm()) * (v - c).normalized();
        CHECK((dv - expect).norm() < 1e-9);
    }

    SUBCASE("on-axis deep in the cone exits symmetrically, positive azimuth") {
        const Vec3 v{4.0, 0, 0};
        REQUIRE(in_vo(v, p, radius, tau));
        const Vec3 dv = exit_vector(v, p, radius, tau);
        CHECK(dv.y > 0.0);
        CHECK_FALSE(in_vo(v + dv * (1.0 + 1e-6), p, radius, tau));
        const double oracle = exit_oracle(v, p, radius, tau);
        CHECK(dv.norm() <= oracle + 1e-3);
    }

    SUBCASE("randomized optimality against the sampling oracle") {
        Rng rng(99);
        int tested = 0;
        while (tested < 25) {
            const Vec3 pr{rng.uniform(1.5, 6), rng.uniform(-3, 3), rng.uniform(-2, 2)};
            const double r = rng.uniform(0.3, 1.2);
            if (pr.norm() <= r + 0.05) continue;
            const Vec3 v{rng.uniform(-2, 3), rng.uniform(-2, 2), rng.uniform(-2, 2)};
            if (!in_vo(v, pr, r, tau)) continue;
            const Vec3 dv = exit_vector(v, pr, r, tau);
            CHECK_FALSE(in_vo(v + dv * (1.0 + 1e-6), pr, r, tau));
            const double oracle = exit_oracle(v, pr, r, tau, 4000);
            CHECK(dv.norm() <= oracle + 1e-3);
            ++tested;
        }
    }
}

TEST_CASE("penetration exit pushes the separation open") {
    SUBCASE("worked example") {
        const Vec3 dv = penetration_exit({0, 0, 0}, {0.5, 0, 0}, 1.0, 0.1);
        CHECK(dv.x == doctest::Approx(-5.0));
        CHECK(dv.y == 0.0);
        CHECK(dv.z == 0.0);
    }
    SUBCASE("already separating fast needs no change") {
        const Vec3 dv = penetration_exit({-10, 0, 0}, {0.5, 0, 0}, 1.0, 0.1);
        CHECK(dv.norm() == 0.0);
    }
    SUBCASE("coincident centers use the +x fallback") {
        const Vec3 dv = penetration_exit({0, 0, 0}, {0, 0, 0}, 1.0, 0.1);
        CHECK(dv.x == doctest::Approx(10.0));
        CHECK(dv.y == 0.0);
    }
}

TEST_CASE("static spheres from the ray matrix") {
    RayConfig cfg;
    const double resolution = 0.25, robot_r = 0.3, margin = 0.1;

    SUBCASE("no hits, no spheres") {
        Matrix s(cfg.n_h, cfg.n_v);
        for (double& v : s.data()) v = cfg.miss_value();
        CHECK(static_spheres({0, 0, 0}, s, cfg, resolution, robot_r, margin, 15).empty());
    }

    SUBCASE("one forward hit becomes one sphere 2 m ahead") {
        Matrix s(cfg.n_h, cfg.n_v);
        for (double& v : s.data()) v = cfg.miss_value();
        s(0, 2) = 2.0;  // azimuth 0, elevation 0
        const auto spheres =
            static_spheres({0, 0, 0}, s, cfg, resolution, robot_r, margin, 15);
        REQUIRE(spheres.size() == 1);
        CHECK(spheres[0].center.x == doctest::Approx(2.0));
        CHECK(spheres[0].center.y == doctest::Approx(0.0));
        CHECK(spheres[0].radius == doctest::Approx(0.125 + 0.3 + 0.1));
        CHECK(spheres[0].velocity.norm() == 0.0);
    }

    SUBCASE("keeps only the K nearest hits") {
        Matrix s(cfg.n_h, cfg.n_v);
        for (double& v : s.data()) v = cfg.miss_value();
        int filled = 0;
        for (int i = 0; i < cfg.n_h && filled < 40; ++i)
            for (int j = 0; j < cfg.n_v && filled < 40; ++j)
                s(i, j) = 1.0 + 0.05 * filled++;
        const auto spheres =
            static_spheres({0, 0, 0}, s, cfg, resolution, robot_r, margin, 15);
        CHECK(spheres.size() == 15);
        // Nearest kept: all lengths below the cut.
        for (const auto& sp : spheres)
            CHECK(sp.center.norm() <= doctest::Approx(1.0 + 0.05 * 14));
    }
}

TEST_CASE("cylinder enclosure stacks spheres along the axis") {
    const auto spheres = enclose_cylinder({2, 0, 0.9}, {0.5, 0, 0}, 0.6, 1.8, 0.3, 0.1);
    CHECK(spheres.size() == 3);  // ceil(1.8 / 0.6)
    CHECK(spheres[0].center.z == doctest::Approx(0.3));
    CHECK(spheres[1].center.z == doctest::Approx(0.9));
    CHECK(spheres[2].center.z == doctest::Approx(1.5));
    for (const auto& s : spheres) {
        CHECK(s.velocity.x == doctest::Approx(0.5));
        CHECK(s.radius == doctest::Approx(std::sqrt(0.09 + 0.09) + 0.4));
    }
}

TEST_CASE("safe action passthrough and projection") {
    const Vec3 v_min{-2, -2, -2}, v_max{2, 2, 2};
    const double tau = 2.0, dt = 0.1;

    SUBCASE("no obstacles: identity") {
        ShieldReport rep;
        const Vec3 v = safe_action({1.5, 0.5, -0.25}, {}, v_min, v_max, tau, dt, &rep);
        CHECK(v.x == 1.5);
        CHECK(v.y == 0.5);
        CHECK(v.z == -0.25);
        CHECK_FALSE(rep.modified);
    }

    SUBCASE("safe action w.r.t. all VOs passes through exactly") {
        const std::vector<ObstacleSphere> obs{{{0, 5, 0}, 1.0, {0, 0, 0}}};
        ShieldReport rep;
        const Vec3 v_rl{1.8, -0.4, 0.0};  // moving away from the obstacle
        const Vec3 v = safe_action(v_rl, obs, v_min, v_max, tau, dt, &rep);
        CHECK(v.x == v_rl.x);
        CHECK(v.y == v_rl.y);
        CHECK(v.z == v_rl.z);
        CHECK_FALSE(rep.modified);
    }

    SUBCASE("single violated halfspace projects onto the plane") {
        const std::vector<ObstacleSphere> obs{{{4, 0, 0}, 1.0, {0, 0, 0}}};
        const Vec3 v_rl{1.9, 0.0, 0.0};
        ShieldReport rep;
        const Vec3 v = safe_action(v_rl, obs, v_min, v_max, tau, dt, &rep);
        CHECK(rep.modified);
        const auto cons = build_constraints(v_rl, obs, tau, dt);
        REQUIRE(cons.size() == 1);
        const Vec3 n = cons[0].normal.normalized();
        // Euclidean projection: |v - v_rl| equals the point-plane distance.
        const double plane_dist = std::abs((v_rl - cons[0].point).dot(n));
        CHECK((v - v_rl).norm() == doctest::Approx(plane_dist).epsilon(1e-9));
        CHECK((v - cons[0].point).dot(n) >= -1e-9);
        // And the projected action clears the VO.
        CHECK_FALSE(in_vo(v, {4, 0, 0}, 1.0, tau));
    }
}

TEST_CASE("safe action soundness, minimality, idempotence (randomized)") {
    Rng rng(2024);
    const Vec3 v_min{-2, -2, -2}, v_max{2, 2, 2};
    const double tau = 2.0, dt = 0.1;
    int solved = 0;

    for (int trial = 0; trial < 300; ++trial) {
        const int n_obs = 1 + rng.uniform_int(8);
        std::vector<ObstacleSphere> obs;
        for (int i = 0; i < n_obs; ++i) {
            Vec3 c{rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(-3, 3)};
            const double r = rng.uniform(0.3, 1.2);
            if (c.norm() <= r + 0.05) c = c.normalized() * (r + 0.3);
            obs.push_back({c, r,
                           {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                            rng.uniform(-0.5, 0.5)}});
        }
        const Vec3 v_rl{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};

        ShieldReport rep;
        const Vec3 v_safe = safe_action(v_rl, obs, v_min, v_max, tau, dt, &rep);
        const auto cons = build_constraints(v_rl, obs, tau, dt);
        if (rep.infeasible_relaxed) continue;
        ++solved;

        // Soundness: every constraint and the box hold.
        CHECK(feasible_point(v_safe, cons, v_min, v_max));

        // VO membership cleared for every constrained obstacle.
        for (const auto& o : obs) {
            if (o.center.norm() > o.radius)
                if (in_vo(v_rl - o.velocity, o.center, o.radius, tau))
                    CHECK_FALSE(in_vo(v_safe - o.velocity, o.center, o.radius, tau));
        }

        // Minimality against a feasible sampling oracle.
        Rng sampler(trial * 7919 + 13);
        double best = std::numeric_limits<double>::infinity();
        for (int s = 0; s < 20000; ++s) {
            const Vec3 w{sampler.uniform(v_min.x, v_max.x),
                         sampler.uniform(v_min.y, v_max.y),
                         sampler.uniform(v_min.z, v_max.z)};
            if (!feasible_point(w, cons, v_min, v_max, 0.0)) continue;
            best = std::min(best, (w - v_rl).norm());
        }
        if (std::isfinite(best)) CHECK((v_safe - v_rl).norm() <= best + 1e-6);

        // Idempotence: re-filtering the safe action leaves it unchanged.
        ShieldReport rep2;
        const Vec3 v_again = safe_action(v_safe, obs, v_min, v_max, tau, dt, &rep2);
        CHECK((v_again - v_safe).norm() < 1e-6);
    }
    CHECK(solved > 200);
}

TEST_CASE("infeasible constraint sets fall back to least violation") {
    // Two penetrating obstacles demanding opposite escapes faster than the
    // box allows.
    std::vector<ObstacleSphere> obs{{{0.3, 0, 0}, 1.0, {0, 0, 0}},
                                    {{-0.3, 0, 0}, 1.0, {0, 0, 0}}};
    ShieldReport rep;
    const Vec3 v = safe_action({0, 0, 0}, obs, {-2, -2, -2}, {2, 2, 2}, 2.0, 0.1, &rep);
    CHECK(rep.modified);
    CHECK(rep.infeasible_relaxed);
    // Still inside the box.
    CHECK(std::abs(v.x) <= 2.0 + 1e-9);
    CHECK(std::abs(v.y) <= 2.0 + 1e-9);
    CHECK(std::abs(v.z) <= 2.0 + 1e-9);
}

TEST_SUITE_END();
