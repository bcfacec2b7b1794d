#include "navlab/ppo.hpp"

#include <algorithm>
#include <cmath>

namespace navlab {

using nn::BatchedBundle;
using nn::Tensor;

RolloutBuffer collect(EnvBatch& envs, const nn::PolicyNet& net, int T, Rng& rng,
                      bool deterministic) {
    const int B = envs.size();
    const auto& ncfg = net.config();
    const double v_lim = envs.env(0).config().v_lim;

    RolloutBuffer buf;
    buf.B = B;
    buf.T = T;
    buf.states.resize(B * T, ncfg.n_d, ncfg.n_h, ncfg.n_v);
    buf.actions.resize(static_cast<size_t>(B) * T * 3);
    buf.logprobs.resize(static_cast<size_t>(B) * T);
    buf.rewards.resize(static_cast<size_t>(B) * T);
    buf.values.resize(static_cast<size_t>(B) * T);
    buf.dones.resize(static_cast<size_t>(B) * T);
    buf.bootstrap.resize(B);

    BatchedBundle tick_states;
    tick_states.resize(B, ncfg.n_d, ncfg.n_h, ncfg.n_v);
    std::vector<Vec3> actions_world(B);
    std::vector<StepInfo> infos;

    for (int t = 0; t < T; ++t) {
        for (int b = 0; b < B; ++b) tick_states.set_row(b, envs.env(b).state());

        nn::PolicyNet::Output out;
        {
            nn::NoGradGuard ng;
            out = net.forward(tick_states);
        }
        const auto& alpha = out.alpha.value();
        const auto& beta = out.beta.value();
        const auto& value = out.value.value();

        for (int b = 0; b < B; ++b) {
            const double* a = alpha.data() + 3 * b;
            const double* be = beta.data() + 3 * b;
            std::array<double, 3> x_hat;
            if (deterministic) {
                x_hat = {nn::beta_mean(a[0], be[0]), nn::beta_mean(a[1], be[1]),
                         nn::beta_mean(a[2], be[2])};
            } else {
                x_hat = nn::beta_sample3(a, be, rng);
            }
            double logprob = 0.0;
            for (int d = 0; d < 3; ++d)
                logprob += nn::beta_logprob_value(a[d], be[d], x_hat[d]);

            const Vec3 v_goal = nn::scale_action(x_hat, v_lim);
            actions_world[b] = envs.env(b).frame().to_world_vector(v_goal);

            const size_t row = static_cast<size_t>(t) * B + b;
            buf.actions[row * 3 + 0] = x_hat[0];
            buf.actions[row * 3 + 1] = x_hat[1];
            buf.actions[row * 3 + 2] = x_hat[2];
            buf.logprobs[row] = logprob;
            buf.values[row] = value[b];
            buf.states.set_row(static_cast<int>(row), envs.env(b).state());
        }

        envs.step(actions_world, infos);
        for (int b = 0; b < B; ++b) {
            const size_t row = static_cast<size_t>(t) * B + b;
            buf.rewards[row] = infos[b].reward;
            buf.dones[row] = infos[b].outcome != Outcome::running ? 1 : 0;
        }
        envs.reset_done();
    }

    for (int b = 0; b < B; ++b) tick_states.set_row(b, envs.env(b).state());
    {
        nn::NoGradGuard ng;
        auto out = net.forward(tick_states);
        for (int b = 0; b < B; ++b) buf.bootstrap[b] = out.value.value()[b];
    }

    auto eps = envs.drain_episodes();
    buf.episodes.insert(buf.episodes.end(), eps.begin(), eps.end());
    return buf;
}

void gae(const RolloutBuffer& buf, double gamma, double lambda,
         std::vector<double>& advantages, std::vector<double>& returns) {
    const int B = buf.B, T = buf.T;
    advantages.assign(buf.rows(), 0.0);
    returns.assign(buf.rows(), 0.0);
    for (int b = 0; b < B; ++b) {
        double acc = 0.0;
        for (int t = T - 1; t >= 0; --t) {
            const size_t idx = static_cast<size_t>(t) * B + b;
            const double nonterminal = buf.dones[idx] ? 0.0 : 1.0;
            const double next_value =
                t == T - 1 ? buf.bootstrap[b] : buf.values[idx + B];
            const double delta = buf.rewards[idx] +
                                 gamma * next_value * nonterminal - buf.values[idx];
            acc = delta + gamma * lambda * nonterminal * acc;
            advantages[idx] = acc;
            returns[idx] = acc + buf.values[idx];
        }
    }
}

void normalize_advantages(std::vector<double>& advantages) {
    if (advantages.size() < 2) return;
    double mean = 0.0;
    for (double a : advantages) mean += a;
    mean /= static_cast<double>(advantages.size());
    double var = 0.0;
    for (double a : advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(advantages.size());
    const double inv = 1.0 / (std::sqrt(var) + 1e-8);
    for (double& a : advantages) a = (a - mean) * inv;
}

UpdateReport update(nn::PolicyNet& net, nn::Adam& adam, const RolloutBuffer& buf,
                    const PpoConfig& cfg, Rng& rng) {
    UpdateReport report;
    const int rows = buf.rows();
    if (rows == 0) return report;

    std::vector<double> advantages, returns;
    gae(buf, cfg.gamma, cfg.gae_lambda, advantages, returns);
    normalize_advantages(advantages);

    // Returns can be hundreds of reward units; dividing the optimized value
    // term by their batch variance keeps the value gradient from starving the
    // policy gradient under the global norm clip. The reported value_loss
    // stays the raw MSE.
    double ret_mean = 0.0;
    for (double r : returns) ret_mean += r;
    ret_mean /= static_cast<double>(returns.size());
    double ret_var = 0.0;
    for (double r : returns) ret_var += (r - ret_mean) * (r - ret_mean);
    ret_var /= static_cast<double>(returns.size());
    const double value_scale = 1.0 / std::max(1.0, ret_var);

    const int mb_size = cfg.minibatch > 0 ? std::min(cfg.minibatch, rows)
                                          : std::max(1, rows / 16);
    std::vector<int> order(rows);
    for (int i = 0; i < rows; ++i) order[i] = i;

    const auto& ncfg = net.config();
    BatchedBundle mb_states;
    double sum_pl = 0, sum_vl = 0, sum_ent = 0, sum_kl = 0, sum_clip = 0;
    int count = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the caller's stream.
        for (int i = rows - 1; i > 0; --i)
            std::swap(order[i], order[rng.uniform_int(i + 1)]);

        for (int start = 0; start + mb_size <= rows; start += mb_size) {
            const int mb = mb_size;
            mb_states.resize(mb, ncfg.n_d, ncfg.n_h, ncfg.n_v);
            std::vector<double> mb_actions(static_cast<size_t>(mb) * 3);
            std::vector<double> mb_oldlp(mb), mb_adv_pos(mb), mb_ret(mb);
            for (int i = 0; i < mb; ++i) {
                const int src = order[start + i];
                std::copy_n(buf.states.s_int.data() + static_cast<size_t>(src) * 7, 7,
                            mb_states.s_int.data() + static_cast<size_t>(i) * 7);
                std::copy_n(
                    buf.states.s_dyn.data() + static_cast<size_t>(src) * mb_states.dim_dyn,
                    mb_states.dim_dyn,
                    mb_states.s_dyn.data() + static_cast<size_t>(i) * mb_states.dim_dyn);
                std::copy_n(buf.states.s_stat.data() +
                                static_cast<size_t>(src) * mb_states.dim_stat,
                            mb_states.dim_stat,
                            mb_states.s_stat.data() +
                                static_cast<size_t>(i) * mb_states.dim_stat);
                std::copy_n(buf.actions.data() + static_cast<size_t>(src) * 3, 3,
                            mb_actions.data() + static_cast<size_t>(i) * 3);
                mb_oldlp[i] = buf.logprobs[src];
                mb_adv_pos[i] = advantages[src];
                mb_ret[i] = returns[src];
            }

            auto out = net.forward(mb_states);
            Tensor x_const = Tensor::constant({mb, 3}, std::move(mb_actions));
            Tensor oldlp = Tensor::constant({mb}, std::move(mb_oldlp));
            Tensor adv = Tensor::constant({mb}, std::move(mb_adv_pos));
            Tensor ret = Tensor::constant({mb}, std::move(mb_ret));

            Tensor logp = nn::beta_logprob(out.alpha, out.beta, x_const);
            Tensor ratio = nn::exp_t(nn::sub(logp, oldlp));
            Tensor surr1 = nn::mul(ratio, adv);
            Tensor surr2 =
                nn::mul(nn::clamp_t(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), adv);
            Tensor policy_loss = nn::neg(nn::mean_all(nn::min_t(surr1, surr2)));
            Tensor value_loss = nn::mean_all(nn::square(nn::sub(out.value, ret)));
            Tensor entropy = nn::mean_all(nn::beta_entropy(out.alpha, out.beta));
            Tensor loss =
                nn::add(policy_loss,
                        nn::sub(nn::scale(value_loss, cfg.value_coef * value_scale),
                                nn::scale(entropy, cfg.entropy_coef)));

            if (!std::isfinite(loss.item())) {
                report.aborted = true;
                return report;
            }

            adam.zero_grad();
            nn::backward(loss);
            if (cfg.max_grad_norm > 0.0) {
                double norm_sq = 0.0;
                for (const auto& p : net.parameters())
                    for (double gv : p.grad()) norm_sq += gv * gv;
                const double norm = std::sqrt(norm_sq);
                if (norm > cfg.max_grad_norm) {
                    const double f = cfg.max_grad_norm / norm;
                    for (auto& p : net.parameters())
                        for (double& gv : p.grad()) gv *= f;
                }
            }
            adam.step();

            // Diagnostics from the recorded values.
            double kl = 0.0, clipped = 0.0;
            const auto& rv = ratio.value();
            for (int i = 0; i < mb; ++i) {
                kl += rv[i] - 1.0 - std::log(rv[i]);
                if (std::abs(rv[i] - 1.0) > cfg.clip) clipped += 1.0;
            }
            sum_pl += policy_loss.item();
            sum_vl += value_loss.item();
            sum_ent += entropy.item();
            sum_kl += kl / mb;
            sum_clip += clipped / mb;
            ++count;
        }
    }

    if (count > 0) {
        report.policy_loss = sum_pl / count;
        report.value_loss = sum_vl / count;
        report.entropy = sum_ent / count;
        report.kl = sum_kl / count;
        report.clip_fraction = sum_clip / count;
        report.minibatches = count;
    }
    return report;
}

}  // namespace navlab
