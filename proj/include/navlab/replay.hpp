#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "navlab/env.hpp"
#include "navlab/shield.hpp"

namespace navlab {

// Episode replay log: newline-delimited JSON.
//   header  {"type":"header","version":1,"seed":"<u64>","n_dynamic":N,
//            "shield":bool,"config":"<serialized experiment config>"}
//   tick    {"type":"tick","t":T,"p":[..],"v":[..],"a":[..],"obs":[[..]..],
//            "r":[5 terms],"reward":R,"status":"...", optional "shield":{..}}
//   end     {"type":"end","outcome":"...","steps":N,"collisions":C,
//            "hash":"<hex>"}
// The trajectory hash folds the bit patterns of the robot position/velocity
// of every tick, so a re-simulation from the logged seed and actions must
// reproduce the trajectory exactly.

class TrajectoryHash {
public:
    void fold(const Vec3& p, const Vec3& v);
    std::string hex() const;
    uint64_t value() const { return h_; }

private:
    uint64_t h_ = 0xcbf29ce484222325ull;
};

struct ShieldLogEntry {
    Vec3 input, output;
    bool modified = false;
    bool infeasible = false;
    std::vector<int> active;
};

class ReplayWriter {
public:
    ReplayWriter(const std::string& path, uint64_t seed, int n_dynamic, bool shield,
                 const std::string& config_text);

    void tick(int t, const Env& env, const Vec3& action_world, const RewardTerms& terms,
              double reward, Outcome status,
              const std::optional<ShieldLogEntry>& shield = std::nullopt);
    void finish(Outcome outcome, int steps, int collisions);

private:
    std::ofstream f_;
    TrajectoryHash hash_;
};

struct ReplayResult {
    bool hash_match = false;
    Outcome outcome = Outcome::running;
    int ticks = 0;
    int collisions = 0;
    std::string expected_hash, actual_hash;
};

// Re-simulates the logged episode from its seed and recorded actions and
// verifies the trajectory hash. Optionally writes a per-tick trajectory CSV.
// Schema problems throw ConfigError with the offending line number.
ReplayResult verify_replay(const std::string& log_path,
                           const std::string& csv_out_path = "");

// Contact-event counter with 1 s debounce: a new event starts only after the
// robot has been contact-free for at least `debounce_ticks`.
class CollisionCounter {
public:
    explicit CollisionCounter(int debounce_ticks) : debounce_(debounce_ticks) {}
    void observe(int tick, bool contact) {
        if (contact) {
            if (last_contact_ < 0 || tick - last_contact_ > debounce_) ++events_;
            last_contact_ = tick;
        }
    }
    int events() const { return events_; }

private:
    int debounce_;
    int last_contact_ = -1;
    int events_ = 0;
};

}  // namespace navlab
