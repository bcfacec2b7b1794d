"""Smoke tests for the navlab python module (plain asserts, no test deps)."""

import math

import navlab as nl


def test_geometry():
    f = nl.make_goal_frame(nl.Vec3(0, 0, 0), nl.Vec3(0, 5, 0))
    x = f.x_axis
    assert abs(x.x) < 1e-12 and abs(x.y - 1.0) < 1e-12
    v = nl.to_goal_frame(f, nl.Vec3(0, 5, 0), True)
    assert abs(v.x - 5.0) < 1e-12 and abs(v.y) < 1e-12


def test_voxelmap():
    g = nl.OccupancyGrid(0.25, 40, 40, 20, nl.Vec3(0, 0, 0))
    assert not g.is_occupied(nl.Vec3(1, 1, 1))
    g.update_occupancy(nl.Vec3(0.125, 0.125, 0.125), [nl.Vec3(2.125, 0.125, 0.125)])
    assert g.is_occupied(nl.Vec3(2.125, 0.125, 0.125))
    d = g.raycast(nl.Vec3(0.125, 0.125, 0.125), nl.Vec3(1, 0, 0), 4.0, 0.1)
    assert 1.75 <= d <= 2.125, d
    s = g.static_state(nl.Vec3(5, 5, 2.5), nl.RayConfig())
    assert s.shape == (36, 5)
    assert abs(s.max() - 4.1) < 1e-12


def test_tracker_and_state():
    tracker = nl.MultiObjectTracker()
    for frame in range(40):
        t = 0.1 * frame
        tracker.step([nl.Detection.make(nl.Vec3(t, 0, 1), 0.5, 1.8)], 0.1)
    tracks = tracker.tracks
    assert len(tracks) == 1
    assert abs(tracks[0].velocity().x - 1.0) < 0.2

    g = nl.OccupancyGrid(0.25, 40, 40, 20, nl.Vec3(0, 0, 0))
    f = nl.make_goal_frame(nl.Vec3(1, 1, 1), nl.Vec3(8, 1, 1))
    cfg = nl.EncoderConfig()
    bundle = nl.encode(nl.Vec3(1, 1, 1), nl.Vec3(0, 0, 0), nl.Vec3(8, 1, 1), f, g,
                       tracks, cfg)
    assert bundle.s_int.shape == (7,)
    assert bundle.s_dyn.shape == (cfg.n_d, 9)
    assert abs(bundle.s_int[3] - 7.0) < 1e-9


def test_shield():
    assert nl.in_vo(nl.Vec3(2.5, 0, 0), nl.Vec3(5, 0, 0), 1.0, 2.0)
    assert not nl.in_vo(nl.Vec3(-1, 0, 0), nl.Vec3(5, 0, 0), 1.0, 2.0)

    dv = nl.exit_vector(nl.Vec3(2.5, 0, 0), nl.Vec3(5, 0, 0), 1.0, 2.0)
    assert abs(dv.norm() - 0.5) < 1e-6

    obs = [nl.ObstacleSphere(nl.Vec3(4, 0, 0), 1.0)]
    v, rep = nl.safe_action(nl.Vec3(2, 0, 0), obs, nl.Vec3(-2, -2, -2),
                            nl.Vec3(2, 2, 2), 2.0, 0.1)
    assert rep.modified
    assert not nl.in_vo(v, nl.Vec3(4, 0, 0), 1.0, 2.0)

    # Safe input passes through untouched.
    v2, rep2 = nl.safe_action(nl.Vec3(-1, 0, 0), obs, nl.Vec3(-2, -2, -2),
                              nl.Vec3(2, 2, 2), 2.0, 0.1)
    assert not rep2.modified
    assert v2.x == -1.0


def test_beta_and_env():
    assert abs(nl.beta_mean(3.0, 1.0) - 0.75) < 1e-12
    assert abs(nl.beta_logprob(2.0, 2.0, 0.5) - math.log(1.5)) < 1e-9
    a = nl.scale_action([1.0, 0.5, 0.0], 2.0)
    assert (a.x, a.y, a.z) == (2.0, 0.0, -2.0)

    cfg = nl.ExperimentConfig()
    cfg.set("world.n_static", "5")
    cfg.set("world.n_dynamic", "2")
    cfg.finalize()
    env = nl.Env(cfg, 42)
    total = 0.0
    for _ in range(20):
        info = env.step(nl.Vec3(1.0, 0.0, 0.0))
        total += info.reward
        if info.outcome != nl.Outcome.running:
            break
    assert env.state.s_stat.shape == (36, 5)
    assert math.isfinite(total)


def main():
    tests = [test_geometry, test_voxelmap, test_tracker_and_state, test_shield,
             test_beta_and_env]
    for t in tests:
        t()
        print(f"ok: {t.__name__}")
    print(f"{len(tests)} smoke tests passed")


if __name__ == "__main__":
    main()
