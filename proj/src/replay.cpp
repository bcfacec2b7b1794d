#include "navlab/replay.hpp"

#include <cstdio>
#include <cstring>

#include <json.hpp>

#include "navlab/config.hpp"
#include "navlab/errors.hpp"

namespace navlab {

using json = nlohmann::json;

namespace {

constexpr int kReplayVersion = 1;

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

Outcome outcome_from(const std::string& s) {
    if (s == "running") return Outcome::running;
    if (s == "success") return Outcome::success;
    if (s == "collision") return Outcome::collision;
    if (s == "timeout") return Outcome::timeout;
    throw std::invalid_argument("unknown outcome: " + s);
}

}  // namespace

void TrajectoryHash::fold(const Vec3& p, const Vec3& v) {
    const double vals[6] = {p.x, p.y, p.z, v.x, v.y, v.z};
    for (double d : vals) {
        uint64_t bits;
        std::memcpy(&bits, &d, 8);
        for (int i = 0; i < 8; ++i) {
            h_ ^= (bits >> (8 * i)) & 0xff;
            h_ *= 0x100000001b3ull;
        }
    }
}

std::string TrajectoryHash::hex() const {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h_));
    return buf;
}

ReplayWriter::ReplayWriter(const std::string& path, uint64_t seed, int n_dynamic,
                           bool shield, const std::string& config_text)
    : f_(path) {
    if (!f_) throw std::runtime_error("cannot open replay log for write: " + path);
    json h = {{"type", "header"},
              {"version", kReplayVersion},
              {"seed", std::to_string(seed)},
              {"n_dynamic", n_dynamic},
              {"shield", shield},
              {"config", config_text}};
    f_ << h.dump() << "\n";
}

void ReplayWriter::tick(int t, const Env& env, const Vec3& action_world,
                        const RewardTerms& terms, double reward, Outcome status,
                        const std::optional<ShieldLogEntry>& shield) {
    json obs = json::array();
    for (const auto& o : env.obstacles()) {
        obs.push_back(json::array(
            {o.pos.x, o.pos.y, o.pos.z, o.vel.x, o.vel.y, o.vel.z}));
    }
    json rec = {{"type", "tick"},
                {"t", t},
                {"p", vec_json(env.robot_pos())},
                {"v", vec_json(env.robot_vel())},
                {"a", vec_json(action_world)},
                {"obs", obs},
                {"r", json::array({terms.velocity, terms.static_safety,
                                   terms.dynamic_safety, terms.smoothness,
                                   terms.height})},
                {"reward", reward},
                {"status", outcome_name(status)}};
    if (shield) {
        json s = {{"in", vec_json(shield->input)},
                  {"out", vec_json(shield->output)},
                  {"modified", shield->modified},
                  {"infeasible", shield->infeasible},
                  {"active", shield->active}};
        rec["shield"] = s;
    }
    f_ << rec.dump() << "\n";
    hash_.fold(env.robot_pos(), env.robot_vel());
}

void ReplayWriter::finish(Outcome outcome, int steps, int collisions) {
    json rec = {{"type", "end"},
                {"outcome", outcome_name(outcome)},
                {"steps", steps},
                {"collisions", collisions},
                {"hash", hash_.hex()}};
    f_ << rec.dump() << "\n";
    f_.flush();
}

ReplayResult verify_replay(const std::string& log_path, const std::string& csv_out_path) {
    std::ifstream f(log_path);
    if (!f) throw ConfigError("cannot open replay log: " + log_path);

    std::string line;
    int lineno = 0;
    auto parse_line = [&](const std::string& text) -> json {
        try {
            json j = json::parse(text);
            if (!j.contains("type"))
                throw std::invalid_argument("missing 'type'");
            return j;
        } catch (const std::exception& e) {
            throw ConfigError(log_path + ":" + std::to_string(lineno) +
                              ": schema error: " + e.what());
        }
    };

    if (!std::getline(f, line)) throw ConfigError(log_path + ": empty log");
    ++lineno;
    json header = parse_line(line);
    uint64_t seed = 0;
    int n_dynamic = 0;
    std::string config_text;
    try {
        if (header.at("type").get<std::string>() != "header" ||
            header.at("version").get<int>() != kReplayVersion)
            throw std::invalid_argument("bad header");
        seed = std::stoull(header.at("seed").get<std::string>());
        n_dynamic = header.at("n_dynamic").get<int>();
        config_text = header.at("config").get<std::string>();
    } catch (const std::exception& e) {
        throw ConfigError(log_path + ":1: schema error: " + e.what());
    }

    ExperimentConfig cfg = ExperimentConfig::from_string(config_text, log_path + "#config");
    cfg.env.world.n_dynamic = n_dynamic;

    Env env(cfg.env, seed);
    env.terminate_on_collision = false;

    std::ofstream csv;
    if (!csv_out_path.empty()) {
        csv.open(csv_out_path);
        if (!csv) throw std::runtime_error("cannot open csv for write: " + csv_out_path);
        csv << "tick,px,py,pz,vx,vy,vz,ax,ay,az,reward,status\n";
    }

    TrajectoryHash hash;
    CollisionCounter contacts(static_cast<int>(std::lround(1.0 / cfg.env.dt)));
    ReplayResult result;
    std::string expected_hash;
    Outcome logged_outcome = Outcome::running;
    int logged_steps = 0;
    int logged_collisions = 0;
    bool saw_end = false;

    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec = parse_line(line);
        const std::string type = rec.at("type").get<std::string>();
        if (type == "tick") {
            Vec3 action;
            int t = 0;
            try {
                action = vec_from(rec.at("a"));
                t = rec.at("t").get<int>();
            } catch (const std::exception& e) {
                throw ConfigError(log_path + ":" + std::to_string(lineno) +
                                  ": schema error: " + e.what());
            }
            const StepInfo info = env.step(action);
            hash.fold(env.robot_pos(), env.robot_vel());
            contacts.observe(t, info.collided_now);
            ++result.ticks;
            if (csv) {
                const Vec3 p = env.robot_pos(), v = env.robot_vel();
                char buf[512];
                std::snprintf(buf, sizeof(buf),
                              "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                              "%.17g,%s\n",
                              t, p.x, p.y, p.z, v.x, v.y, v.z, action.x, action.y,
                              action.z, info.reward, outcome_name(info.outcome));
                csv << buf;
            }
        } else if (type == "end") {
            try {
                expected_hash = rec.at("hash").get<std::string>();
                logged_outcome = outcome_from(rec.at("outcome").get<std::string>());
                logged_steps = rec.at("steps").get<int>();
                logged_collisions = rec.at("collisions").get<int>();
            } catch (const std::exception& e) {
                throw ConfigError(log_path + ":" + std::to_string(lineno) +
                                  ": schema error: " + e.what());
            }
            saw_end = true;
        } else if (type != "header") {
            throw ConfigError(log_path + ":" + std::to_string(lineno) +
                              ": schema error: unknown record type '" + type + "'");
        }
    }
    if (!saw_end) throw ConfigError(log_path + ": missing end record");

    result.expected_hash = expected_hash;
    result.actual_hash = hash.hex();
    result.hash_match = expected_hash == result.actual_hash;
    result.outcome = logged_outcome;
    result.collisions = contacts.events();
    (void)logged_steps;
    (void)logged_collisions;
    return result;
}

}  // namespace navlab
