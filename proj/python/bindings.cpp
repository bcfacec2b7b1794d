#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "navlab/bench.hpp"
#include "navlab/config.hpp"
#include "navlab/env.hpp"
#include "navlab/nn/policy.hpp"
#include "navlab/ppo.hpp"
#include "navlab/reward.hpp"
#include "navlab/shield.hpp"
#include "navlab/state.hpp"
#include "navlab/tracker.hpp"
#include "navlab/voxelmap.hpp"

namespace py = pybind11;
using namespace navlab;

namespace {

py::array_t<double> matrix_to_numpy(const Matrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

Vec3 vec_from_seq(const std::vector<double>& v) {
    if (v.size() != 3) throw std::invalid_argument("expected 3 components");
    return {v[0], v[1], v[2]};
}

}  // namespace

PYBIND11_MODULE(navlab, m) {
    m.doc() = "Velocity-obstacle-shielded RL navigation lab";

    py::class_<Vec3>(m, "Vec3")
        .def(py::init<>())
        .def(py::init<double, double, double>())
        .def(py::init([](const std::vector<double>& v) { return vec_from_seq(v); }))
        .def_readwrite("x", &Vec3::x)
        .def_readwrite("y", &Vec3::y)
        .def_readwrite("z", &Vec3::z)
        .def("norm", &Vec3::norm)
        .def("dot", &Vec3::dot)
        .def("cross", &Vec3::cross)
        .def("__repr__", [](const Vec3& v) {
            return "Vec3(" + std::to_string(v.x) + ", " + std::to_string(v.y) + ", " +
                   std::to_string(v.z) + ")";
        });

    py::class_<GoalFrame>(m, "GoalFrame")
        .def("to_frame_point", &GoalFrame::to_frame_point)
        .def("to_frame_vector", &GoalFrame::to_frame_vector)
        .def("to_world_point", &GoalFrame::to_world_point)
        .def("to_world_vector", &GoalFrame::to_world_vector)
        .def_property_readonly("x_axis", &GoalFrame::x_axis)
        .def_property_readonly("y_axis", &GoalFrame::y_axis)
        .def_property_readonly("z_axis", &GoalFrame::z_axis);

    m.def("make_goal_frame", &make_goal_frame, py::arg("start"), py::arg("goal"));
    m.def("to_goal_frame", &to_goal_frame, py::arg("frame"), py::arg("v"),
          py::arg("is_position"));

    py::class_<RayConfig>(m, "RayConfig")
        .def(py::init<>())
        .def_readwrite("n_h", &RayConfig::n_h)
        .def_readwrite("n_v", &RayConfig::n_v)
        .def_readwrite("v_fov_min", &RayConfig::v_fov_min)
        .def_readwrite("v_fov_max", &RayConfig::v_fov_max)
        .def_readwrite("max_range", &RayConfig::max_range)
        .def_readwrite("miss_offset", &RayConfig::miss_offset)
        .def("miss_value", &RayConfig::miss_value);

    py::class_<AABB>(m, "AABB")
        .def(py::init([](const std::vector<double>& lo, const std::vector<double>& hi) {
                 return AABB{vec_from_seq(lo), vec_from_seq(hi)};
             }),
             py::arg("lo"), py::arg("hi"))
        .def_readwrite("lo", &AABB::lo)
        .def_readwrite("hi", &AABB::hi);

    py::class_<LogOddsParams>(m, "LogOddsParams")
        .def(py::init<>())
        .def_readwrite("l_occ", &LogOddsParams::l_occ)
        .def_readwrite("l_free", &LogOddsParams::l_free)
        .def_readwrite("l_min", &LogOddsParams::l_min)
        .def_readwrite("l_max", &LogOddsParams::l_max);

    py::class_<OccupancyGrid>(m, "OccupancyGrid")
        .def(py::init<double, int, int, int, Vec3, LogOddsParams>(),
             py::arg("resolution"), py::arg("nx"), py::arg("ny"), py::arg("nz"),
             py::arg("origin"), py::arg("params") = LogOddsParams{})
        .def_property_readonly("resolution", &OccupancyGrid::resolution)
        .def_property_readonly("nx", &OccupancyGrid::nx)
        .def_property_readonly("ny", &OccupancyGrid::ny)
        .def_property_readonly("nz", &OccupancyGrid::nz)
        .def("is_occupied", &OccupancyGrid::is_occupied)
        .def("update_occupancy",
             [](OccupancyGrid& g, const Vec3& origin, const std::vector<Vec3>& hits,
                const std::vector<AABB>& boxes) {
                 g.update_occupancy(origin, hits, boxes);
             },
             py::arg("sensor_origin"), py::arg("hit_points"),
             py::arg("dynamic_boxes") = std::vector<AABB>{})
        .def("raycast", &OccupancyGrid::raycast, py::arg("origin"), py::arg("dir"),
             py::arg("max_range"), py::arg("miss_offset"))
        .def("static_state",
             [](const OccupancyGrid& g, const Vec3& pos, const RayConfig& cfg,
                const GoalFrame& frame) {
                 return matrix_to_numpy(g.static_state(pos, cfg, frame));
             },
             py::arg("robot_pos"), py::arg("cfg"), py::arg("frame") = GoalFrame{})
        .def("rasterize_cylinder", &OccupancyGrid::rasterize_cylinder)
        .def("save", &OccupancyGrid::save)
        .def_static("load", &OccupancyGrid::load);

    py::class_<Detection>(m, "Detection")
        .def_static("make", &Detection::make, py::arg("center"), py::arg("width"),
                    py::arg("height"), py::arg("point_count") = 100.0,
                    py::arg("point_std") = 0.1)
        .def_readonly("center", &Detection::center)
        .def_readonly("width", &Detection::width)
        .def_readonly("height", &Detection::height);

    py::class_<ObstacleTrack>(m, "ObstacleTrack")
        .def_readonly("id", &ObstacleTrack::id)
        .def_readonly("width", &ObstacleTrack::width)
        .def_readonly("height", &ObstacleTrack::height)
        .def_readonly("age", &ObstacleTrack::age)
        .def_readonly("missed_frames", &ObstacleTrack::missed_frames)
        .def("position", &ObstacleTrack::position)
        .def("velocity", &ObstacleTrack::velocity)
        .def("acceleration", &ObstacleTrack::acceleration);

    py::class_<TrackerConfig>(m, "TrackerConfig").def(py::init<>());

    py::class_<MultiObjectTracker>(m, "MultiObjectTracker")
        .def(py::init<TrackerConfig>(), py::arg("cfg") = TrackerConfig{})
        .def("step",
             [](MultiObjectTracker& t, const std::vector<Detection>& dets, double dt) {
                 return t.step(dets, dt);
             })
        .def_property_readonly("tracks", &MultiObjectTracker::tracks)
        .def("reset", &MultiObjectTracker::reset);

    py::class_<EncoderConfig>(m, "EncoderConfig")
        .def(py::init<>())
        .def_readwrite("n_d", &EncoderConfig::n_d)
        .def_readwrite("ray", &EncoderConfig::ray);

    py::class_<StateBundle>(m, "StateBundle")
        .def_property_readonly("s_int",
                               [](const StateBundle& b) {
                                   py::array_t<double> out(7);
                                   std::copy(b.s_int.begin(), b.s_int.end(),
                                             out.mutable_data());
                                   return out;
                               })
        .def_property_readonly(
            "s_dyn", [](const StateBundle& b) { return matrix_to_numpy(b.s_dyn); })
        .def_property_readonly(
            "s_stat", [](const StateBundle& b) { return matrix_to_numpy(b.s_stat); });

    m.def("encode",
          [](const Vec3& pos, const Vec3& vel, const Vec3& goal, const GoalFrame& f,
             const OccupancyGrid& g, const std::vector<ObstacleTrack>& tracks,
             const EncoderConfig& cfg) {
              return encode(pos, vel, goal, f, g, tracks, cfg);
          },
          py::arg("robot_pos"), py::arg("robot_vel"), py::arg("goal"), py::arg("frame"),
          py::arg("grid"), py::arg("tracks"), py::arg("cfg"));

    py::class_<RewardWeights>(m, "RewardWeights")
        .def(py::init<>())
        .def_readwrite("velocity", &RewardWeights::velocity)
        .def_readwrite("static_safety", &RewardWeights::static_safety)
        .def_readwrite("dynamic_safety", &RewardWeights::dynamic_safety)
        .def_readwrite("smoothness", &RewardWeights::smoothness)
        .def_readwrite("height", &RewardWeights::height);

    py::class_<RewardTerms>(m, "RewardTerms")
        .def_readonly("velocity", &RewardTerms::velocity)
        .def_readonly("static_safety", &RewardTerms::static_safety)
        .def_readonly("dynamic_safety", &RewardTerms::dynamic_safety)
        .def_readonly("smoothness", &RewardTerms::smoothness)
        .def_readonly("height", &RewardTerms::height);

    m.def("total_reward", &total_reward);

    py::class_<ObstacleSphere>(m, "ObstacleSphere")
        .def(py::init([](const Vec3& c, double r, const Vec3& v) {
                 return ObstacleSphere{c, r, v};
             }),
             py::arg("center"), py::arg("radius"), py::arg("velocity") = Vec3{})
        .def_readwrite("center", &ObstacleSphere::center)
        .def_readwrite("radius", &ObstacleSphere::radius)
        .def_readwrite("velocity", &ObstacleSphere::velocity);

    py::class_<ShieldReport>(m, "ShieldReport")
        .def_readonly("modified", &ShieldReport::modified)
        .def_readonly("infeasible_relaxed", &ShieldReport::infeasible_relaxed)
        .def_readonly("n_constraints", &ShieldReport::n_constraints)
        .def_readonly("active", &ShieldReport::active);

    m.def("in_vo", &in_vo, py::arg("v_rel"), py::arg("p_rel"), py::arg("radius"),
          py::arg("tau"));
    m.def("exit_vector", &exit_vector, py::arg("v_rel"), py::arg("p_rel"),
          py::arg("radius"), py::arg("tau"));
    m.def("penetration_exit", &penetration_exit, py::arg("v_rel"), py::arg("p_rel"),
          py::arg("radius"), py::arg("dt"));
    m.def("enclose_cylinder", &enclose_cylinder, py::arg("center"), py::arg("velocity"),
          py::arg("width"), py::arg("height"), py::arg("robot_radius"),
          py::arg("margin"));
    m.def("safe_action",
          [](const Vec3& v_rl, const std::vector<ObstacleSphere>& obstacles,
             const Vec3& v_min, const Vec3& v_max, double tau, double dt) {
              ShieldReport report;
              const Vec3 v = safe_action(v_rl, obstacles, v_min, v_max, tau, dt, &report);
              return py::make_tuple(v, report);
          },
          py::arg("v_rl"), py::arg("obstacles"), py::arg("v_min"), py::arg("v_max"),
          py::arg("tau"), py::arg("dt"));

    m.def("beta_mean", &nn::beta_mean);
    m.def("beta_logprob", &nn::beta_logprob_value, py::arg("alpha"), py::arg("beta"),
          py::arg("x"));
    m.def("scale_action",
          [](const std::vector<double>& x, double v_lim) {
              if (x.size() != 3) throw std::invalid_argument("expected 3 components");
              return nn::scale_action({x[0], x[1], x[2]}, v_lim);
          },
          py::arg("x_hat"), py::arg("v_lim"));

    py::class_<nn::PolicyNet>(m, "Policy")
        .def_static("load",
                    [](const std::string& path) {
                        return nn::PolicyNet::load_checkpoint(path);
                    },
                    py::arg("checkpoint"))
        .def("act",
             [](const nn::PolicyNet& net, const StateBundle& b) {
                 nn::BatchedBundle in;
                 in.resize(1, net.config().n_d, net.config().n_h, net.config().n_v);
                 in.set_row(0, b);
                 nn::NoGradGuard ng;
                 const auto out = net.forward(in);
                 return py::make_tuple(out.alpha.value(), out.beta.value(),
                                       out.value.value()[0]);
             },
             py::arg("state"),
             "Returns (alpha[3], beta[3], value) for one state bundle")
        .def_property_readonly("parameter_count", &nn::PolicyNet::parameter_count);

    m.def("gae",
          [](const std::vector<double>& rewards, const std::vector<double>& values,
             const std::vector<int>& dones, double bootstrap, double gamma,
             double lam) {
              if (rewards.size() != values.size() || rewards.size() != dones.size())
                  throw std::invalid_argument("gae: length mismatch");
              RolloutBuffer buf;
              buf.B = 1;
              buf.T = static_cast<int>(rewards.size());
              buf.rewards = rewards;
              buf.values = values;
              buf.dones.assign(dones.begin(), dones.end());
              buf.bootstrap = {bootstrap};
              std::vector<double> adv, ret;
              gae(buf, gamma, lam, adv, ret);
              return py::make_tuple(adv, ret);
          },
          py::arg("rewards"), py::arg("values"), py::arg("dones"), py::arg("bootstrap"),
          py::arg("gamma") = 0.99, py::arg("lam") = 0.95,
          "Single-trajectory advantages and returns");

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_static("from_string", &ExperimentConfig::from_string, py::arg("text"),
                    py::arg("source") = "<string>")
        .def_static("from_file", &ExperimentConfig::from_file)
        .def("set", &ExperimentConfig::set)
        .def("serialize", &ExperimentConfig::serialize)
        .def("finalize", &ExperimentConfig::finalize);

    py::enum_<Outcome>(m, "Outcome")
        .value("running", Outcome::running)
        .value("success", Outcome::success)
        .value("collision", Outcome::collision)
        .value("timeout", Outcome::timeout);

    py::class_<StepInfo>(m, "StepInfo")
        .def_readonly("terms", &StepInfo::terms)
        .def_readonly("reward", &StepInfo::reward)
        .def_readonly("outcome", &StepInfo::outcome)
        .def_readonly("nan_action", &StepInfo::nan_action)
        .def_readonly("collided_now", &StepInfo::collided_now);

    py::class_<Env>(m, "Env")
        .def(py::init([](const ExperimentConfig& cfg, uint64_t seed) {
                 ExperimentConfig c = cfg;
                 c.finalize();
                 return std::make_unique<Env>(c.env, seed);
             }),
             py::arg("cfg"), py::arg("seed"))
        .def("step", &Env::step, py::arg("action_world"))
        .def("respawn", &Env::respawn, py::arg("n_dynamic"))
        .def_property_readonly("state", &Env::state)
        .def_property_readonly("frame", &Env::frame)
        .def_property_readonly("tracks", &Env::tracks)
        .def("robot_pos", &Env::robot_pos)
        .def("robot_vel", &Env::robot_vel)
        .def("start", &Env::start)
        .def("goal", &Env::goal)
        .def_property_readonly(
            "outcome", [](const Env& e) { return e.status().outcome; })
        .def_readwrite("terminate_on_collision", &Env::terminate_on_collision);
}
