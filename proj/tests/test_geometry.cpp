#include <doctest.h>

#include <cmath>

#include "navlab/geometry.hpp"
#include "navlab/rng.hpp"

using namespace navlab;

namespace {
bool close(const Vec3& a, const Vec3& b, double tol = 1e-12) {
    return (a - b).norm() <= tol;
}
}  // namespace

TEST_SUITE_BEGIN("geometry");

TEST_CASE("goal frame along world x is the identity") {
    const GoalFrame f = make_goal_frame({0, 0, 0}, {10, 0, 0});
    CHECK(close(f.x_axis(), {1, 0, 0}));
    CHECK(close(f.y_axis(), {0, 1, 0}));
    CHECK(close(f.z_axis(), {0, 0, 1}));
}

TEST_CASE("goal frame for a +y goal") {
    const GoalFrame f = make_goal_frame({0, 0, 0}, {0, 5, 0});
    CHECK(close(f.x_axis(), {0, 1, 0}));
    CHECK(close(f.y_axis(), {-1, 0, 0}));
    CHECK(close(f.z_axis(), {0, 0, 1}));
}

TEST_CASE("vertical goal falls back to world y") {
    const GoalFrame f = make_goal_frame({0, 0, 0}, {0, 0, 3});
    CHECK(close(f.x_axis(), {0, 0, 1}));
    CHECK(close(f.y_axis(), {0, 1, 0}));
    // Right-handed: z = x cross y.
    CHECK(close(f.z_axis(), f.x_axis().cross(f.y_axis())));
}

TEST_CASE("coincident start and goal is an error") {
    CHECK_THROWS_WITH_AS(make_goal_frame({1, 2, 3}, {1, 2, 3}),
                         "zero-length goal vector", std::invalid_argument);
}

TEST_CASE("to_goal_frame examples") {
    const GoalFrame identity;
    CHECK(close(to_goal_frame(identity, {1, 2, 3}, true), {1, 2, 3}));

    const GoalFrame f = make_goal_frame({0, 0, 0}, {0, 5, 0});
    CHECK(close(to_goal_frame(f, {0, 5, 0}, true), {5, 0, 0}));
    CHECK(close(to_goal_frame(f, {0, 1, 0}, false), {1, 0, 0}));
}

TEST_CASE("rotation preserves norms and round-trips") {
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        const Vec3 start{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        const Vec3 goal{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        if ((goal - start).norm() < 1e-3) continue;
        const GoalFrame f = make_goal_frame(start, goal);

        const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
        const Vec3 rotated = f.to_frame_vector(v);
        CHECK(std::abs(rotated.norm() - v.norm()) < 1e-9);
        CHECK(close(f.to_world_vector(rotated), v, 1e-9));

        const Vec3 p{rng.normal(), rng.normal(), rng.normal()};
        CHECK(close(f.to_world_point(f.to_frame_point(p)), p, 1e-9));

        // Frame axes orthonormal, y ground-parallel.
        CHECK(std::abs(f.x_axis().dot(f.y_axis())) < 1e-9);
        CHECK(std::abs(f.x_axis().dot(f.z_axis())) < 1e-9);
        CHECK(std::abs(f.y_axis().dot(f.z_axis())) < 1e-9);
        CHECK(f.y_axis().z == 0.0);
        CHECK(close(f.x_axis().cross(f.y_axis()), f.z_axis(), 1e-9));
    }
}

TEST_SUITE_END();
