#include "navlab/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "navlab/errors.hpp"

namespace navlab {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
}

int64_t parse_int(const std::string& s) {
    size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "on") return true;
    if (s == "false" || s == "0" || s == "off") return false;
    throw std::invalid_argument("expected bool");
}

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

struct Entry {
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

using Registry = std::map<std::string, Entry>;

#define F64_ENTRY(key, field)                                                     \
    {key,                                                                         \
     {[](const ExperimentConfig& c) { return fmt_double(c.field); },              \
      [](ExperimentConfig& c, const std::string& v) { c.field = parse_double(v); }}}
#define INT_ENTRY(key, field)                                                     \
    {key,                                                                         \
     {[](const ExperimentConfig& c) { return std::to_string(c.field); },          \
      [](ExperimentConfig& c, const std::string& v) {                             \
          c.field = static_cast<decltype(c.field)>(parse_int(v));                 \
      }}}
#define BOOL_ENTRY(key, field)                                                    \
    {key,                                                                         \
     {[](const ExperimentConfig& c) { return c.field ? "true" : "false"; },       \
      [](ExperimentConfig& c, const std::string& v) { c.field = parse_bool(v); }}}

const Registry& registry() {
    static const Registry reg = {
        F64_ENTRY("world.extent_x", env.world.extent.x),
        F64_ENTRY("world.extent_y", env.world.extent.y),
        F64_ENTRY("world.extent_z", env.world.extent.z),
        F64_ENTRY("world.resolution", env.world.resolution),
        INT_ENTRY("world.n_static", env.world.n_static),
        F64_ENTRY("world.static_radius_min", env.world.static_radius_min),
        F64_ENTRY("world.static_radius_max", env.world.static_radius_max),
        F64_ENTRY("world.static_height_min", env.world.static_height_min),
        F64_ENTRY("world.static_height_max", env.world.static_height_max),
        INT_ENTRY("world.n_dynamic", env.world.n_dynamic),
        F64_ENTRY("world.dyn_speed_min", env.world.dyn_speed_min),
        F64_ENTRY("world.dyn_speed_max", env.world.dyn_speed_max),
        F64_ENTRY("world.dyn_width_min", env.world.dyn_width_min),
        F64_ENTRY("world.dyn_width_max", env.world.dyn_width_max),
        F64_ENTRY("world.dyn_height_min", env.world.dyn_height_min),
        F64_ENTRY("world.dyn_height_max", env.world.dyn_height_max),
        INT_ENTRY("encoder.n_d", env.encoder.n_d),
        INT_ENTRY("ray.n_h", env.encoder.ray.n_h),
        INT_ENTRY("ray.n_v", env.encoder.ray.n_v),
        F64_ENTRY("ray.v_fov_min", env.encoder.ray.v_fov_min),
        F64_ENTRY("ray.v_fov_max", env.encoder.ray.v_fov_max),
        F64_ENTRY("ray.max_range", env.encoder.ray.max_range),
        F64_ENTRY("ray.miss_offset", env.encoder.ray.miss_offset),
        F64_ENTRY("reward.velocity", env.rewards.velocity),
        F64_ENTRY("reward.static_safety", env.rewards.static_safety),
        F64_ENTRY("reward.dynamic_safety", env.rewards.dynamic_safety),
        F64_ENTRY("reward.smoothness", env.rewards.smoothness),
        F64_ENTRY("reward.height", env.rewards.height),
        F64_ENTRY("tracker.jerk_psd", env.tracker.jerk_psd),
        F64_ENTRY("tracker.meas_noise_std", env.tracker.meas_noise_std),
        INT_ENTRY("tracker.prune_after", env.tracker.prune_after),
        F64_ENTRY("tracker.gate_pos_dist", env.tracker.gate_pos_dist),
        F64_ENTRY("env.dt", env.dt),
        F64_ENTRY("env.a_max", env.a_max),
        F64_ENTRY("env.v_lim", env.v_lim),
        F64_ENTRY("env.robot_radius", env.robot_radius),
        F64_ENTRY("env.goal_tol", env.goal_tol),
        INT_ENTRY("env.timeout_steps", env.timeout_steps),
        F64_ENTRY("env.height_tol", env.height_tol),
        F64_ENTRY("env.det_noise_std", env.det_noise_std),
        F64_ENTRY("env.det_range", env.det_range),
        F64_ENTRY("env.min_start_goal_frac", env.min_start_goal_frac),
        F64_ENTRY("ppo.clip", ppo.clip),
        F64_ENTRY("ppo.gamma", ppo.gamma),
        F64_ENTRY("ppo.gae_lambda", ppo.gae_lambda),
        F64_ENTRY("ppo.lr", ppo.lr),
        INT_ENTRY("ppo.epochs", ppo.epochs),
        INT_ENTRY("ppo.minibatch", ppo.minibatch),
        F64_ENTRY("ppo.value_coef", ppo.value_coef),
        F64_ENTRY("ppo.entropy_coef", ppo.entropy_coef),
        F64_ENTRY("ppo.max_grad_norm", ppo.max_grad_norm),
        INT_ENTRY("ppo.horizon", ppo.horizon),
        INT_ENTRY("ppo.batch", ppo.batch),
        F64_ENTRY("shield.horizon", shield.horizon),
        F64_ENTRY("shield.margin", shield.margin),
        INT_ENTRY("shield.max_static", shield.max_static),
        BOOL_ENTRY("net.conv_extractors", net.conv_extractors),
        INT_ENTRY("net.static_embed", net.static_embed),
        INT_ENTRY("net.dynamic_embed", net.dynamic_embed),
        INT_ENTRY("net.trunk_width", net.trunk_width),
        F64_ENTRY("net.dist_scale", net.dist_scale),
        {"curriculum.schedule",
         {[](const ExperimentConfig& c) {
              std::string s = "[";
              for (size_t i = 0; i < c.curriculum.schedule.size(); ++i)
                  s += (i ? ", " : "") + std::to_string(c.curriculum.schedule[i]);
              return s + "]";
          },
          [](ExperimentConfig& c, const std::string& v) {
              std::string body = trim(v);
              if (body.size() < 2 || body.front() != '[' || body.back() != ']')
                  throw std::invalid_argument("expected [a, b, ...]");
              body = body.substr(1, body.size() - 2);
              std::vector<int> out;
              std::stringstream ss(body);
              std::string item;
              while (std::getline(ss, item, ',')) {
                  item = trim(item);
                  if (!item.empty()) out.push_back(static_cast<int>(parse_int(item)));
              }
              if (out.empty()) throw std::invalid_argument("empty schedule");
              c.curriculum.schedule = out;
          }}},
        F64_ENTRY("curriculum.threshold", curriculum.threshold),
        INT_ENTRY("curriculum.window", curriculum.window_size),
        INT_ENTRY("train.total_steps", train.total_steps),
        F64_ENTRY("train.wall_clock_s", train.wall_clock_s),
        INT_ENTRY("train.checkpoint_every", train.checkpoint_every),
        INT_ENTRY("bench.n_runs", bench.n_runs),
        INT_ENTRY("seed", seed),
        INT_ENTRY("workers", workers),
        {"out_dir",
         {[](const ExperimentConfig& c) { return c.out_dir; },
          [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; }}},
    };
    return reg;
}

#undef F64_ENTRY
#undef INT_ENTRY
#undef BOOL_ENTRY

}  // namespace

void ExperimentConfig::finalize() {
    net.n_h = env.encoder.ray.n_h;
    net.n_v = env.encoder.ray.n_v;
    net.n_d = env.encoder.n_d;
    net.stat_scale = 1.0 / env.encoder.ray.miss_value();
    shield.dt = env.dt;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    const auto& reg = registry();
    const auto it = reg.find(key);
    if (it == reg.end()) throw ConfigError("unknown key '" + key + "'");
    try {
        it->second.set(*this, value);
    } catch (const std::exception&) {
        throw ConfigError("invalid value for '" + key + "': " + value);
    }
}

std::string ExperimentConfig::serialize() const {
    std::ostringstream os;
    for (const auto& [key, entry] : registry())
        os << key << " = " << entry.get(*this) << "\n";
    return os.str();
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text,
                                               const std::string& source) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            cfg.set(key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    cfg.finalize();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_string(ss.str(), path);
}

void ExperimentConfig::apply_env_overrides() {
    // Key mapping: NAVLAB_ prefix, dots become double underscores, upper case.
    for (const auto& [key, entry] : registry()) {
        std::string env_key = "NAVLAB_";
        for (char c : key) {
            if (c == '.')
                env_key += "__";
            else
                env_key += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        }
        if (const char* v = std::getenv(env_key.c_str())) set(key, v);
    }
    finalize();
}

}  // namespace navlab
