#include <doctest.h>

#include <cmath>

#include "navlab/reward.hpp"
#include "navlab/rng.hpp"

using namespace navlab;

namespace {

ObstacleTrack track_at(const Vec3& p) {
    ObstacleTrack t;
    t.id = 0;
    t.state = {p.x, p.y, p.z, 0, 0, 0, 0, 0, 0};
    t.covariance = Matrix::identity(9);
    return t;
}

Matrix stat_filled(double v) {
    Matrix m(36, 5);
    for (double& x : m.data()) x = v;
    return m;
}

}  // namespace

TEST_SUITE_BEGIN("reward");

TEST_CASE("velocity term examples") {
    const Matrix s = stat_filled(4.1);
    const Vec3 goal{10, 0, 0}, start{0, 0, 0};

    SUBCASE("full speed toward the goal") {
        const auto r = reward_terms({0, 0, 0}, {2, 0, 0}, {2, 0, 0}, goal, start, s, {});
        CHECK(r.velocity == doctest::Approx(2.0));
    }
    SUBCASE("perpendicular velocity scores zero") {
        const auto r = reward_terms({0, 0, 0}, {0, 2, 0}, {0, 2, 0}, goal, start, s, {});
        CHECK(r.velocity == doctest::Approx(0.0));
    }
}

TEST_CASE("static safety is the mean log ray distance") {
    const Matrix s = stat_filled(std::exp(1.0));
    const auto r =
        reward_terms({0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {10, 0, 0}, {0, 0, 0}, s, {});
    CHECK(r.static_safety == doctest::Approx(1.0));
}

TEST_CASE("dynamic safety averages present tracks and clamps") {
    const Matrix s = stat_filled(4.1);
    const Vec3 goal{10, 0, 0}, start{0, 0, 0};

    SUBCASE("no tracks -> zero") {
        const auto r = reward_terms({0, 0, 0}, {}, {}, goal, start, s, {});
        CHECK(r.dynamic_safety == 0.0);
    }
    SUBCASE("two tracks average") {
        const std::vector<ObstacleTrack> tracks{track_at({std::exp(1.0), 0, 0}),
                                                track_at({1.0, 0, 0})};
        const auto r = reward_terms({0, 0, 0}, {}, {}, goal, start, s, tracks);
        CHECK(r.dynamic_safety == doctest::Approx(0.5));
    }
    SUBCASE("track at the robot clamps to 1e-3") {
        const std::vector<ObstacleTrack> tracks{track_at({0, 0, 0})};
        const auto r = reward_terms({0, 0, 0}, {}, {}, goal, start, s, tracks);
        CHECK(r.dynamic_safety == doctest::Approx(std::log(1e-3)));
    }
}

TEST_CASE("smoothness and height terms") {
    const Matrix s = stat_filled(4.1);
    const Vec3 goal{10, 0, 1}, start{0, 0, 1};

    SUBCASE("steady velocity has zero smoothness penalty") {
        const auto r = reward_terms({0, 0, 1}, {1, 0, 0}, {1, 0, 0}, goal, start, s, {});
        CHECK(r.smoothness == 0.0);
    }
    SUBCASE("inside the height band is free") {
        const auto r = reward_terms({0, 0, 1}, {}, {}, goal, start, s, {});
        CHECK(r.height == 0.0);
    }
    SUBCASE("outside the band the penalty is quadratic") {
        const auto r = reward_terms({0, 0, 3}, {}, {}, goal, start, s, {});
        CHECK(r.height == doctest::Approx(-4.0));
    }
}

TEST_CASE("total reward weighting") {
    RewardWeights w;
    SUBCASE("all zero terms") { CHECK(total_reward({}, w) == 0.0); }
    SUBCASE("single unit term") {
        RewardTerms t;
        t.velocity = 1.0;
        w = {1.0, 0.0, 0.0, 0.0, 0.0};
        CHECK(total_reward(t, w) == doctest::Approx(1.0));
    }
    SUBCASE("worked arithmetic example") {
        RewardTerms t{2.0, 1.0, 1.0, -0.5, -0.25};
        w = {1.0, 0.2, 0.2, 0.1, 0.5};
        CHECK(total_reward(t, w) == doctest::Approx(2.225));
    }
}

TEST_CASE("properties: bounds, signs, monotonicity, linearity") {
    Rng rng(41);
    for (int i = 0; i < 200; ++i) {
        const Vec3 pos{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0, 4)};
        const Vec3 vel{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const Vec3 prev{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const Vec3 goal{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0, 4)};
        const Vec3 start{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0, 4)};
        Matrix s(8, 3);
        for (double& v : s.data()) v = rng.uniform(0.2, 4.1);
        std::vector<ObstacleTrack> tracks;
        for (int k = 0; k < 3; ++k)
            tracks.push_back(track_at(
                {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0, 4)}));

        const auto r = reward_terms(pos, vel, prev, goal, start, s, tracks);
        CHECK(std::abs(r.velocity) <= vel.norm() + 1e-12);
        CHECK(r.smoothness <= 0.0);
        CHECK(r.height <= 0.0);

        // Increasing every distance increases the safety terms.
        Matrix s_far = s;
        for (double& v : s_far.data()) v *= 1.5;
        std::vector<ObstacleTrack> tracks_far;
        for (const auto& t : tracks)
            tracks_far.push_back(track_at(pos + (t.position() - pos) * 1.5));
        const auto r_far = reward_terms(pos, vel, prev, goal, start, s_far, tracks_far);
        CHECK(r_far.static_safety > r.static_safety);
        CHECK(r_far.dynamic_safety >= r.dynamic_safety - 1e-12);

        // Linearity in the weights.
        RewardWeights w{rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2),
                        rng.uniform(0, 2), rng.uniform(0, 2)};
        RewardWeights w2{2 * w.velocity, 2 * w.static_safety, 2 * w.dynamic_safety,
                         2 * w.smoothness, 2 * w.height};
        CHECK(total_reward(r, w2) == doctest::Approx(2.0 * total_reward(r, w)));
    }
}

TEST_SUITE_END();
