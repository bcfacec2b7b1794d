#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "navlab/geometry.hpp"
#include "navlab/nn/autodiff.hpp"
#include "navlab/rng.hpp"
#include "navlab/state.hpp"

namespace navlab::nn {

// Architecture knobs. conv_extractors=false swaps the two conv stacks for
// flatten+dense extractors (fast CI mode); everything else unchanged.
struct NetConfig {
    int n_h = 36;
    int n_v = 5;
    int n_d = 5;
    bool conv_extractors = true;
    int static_embed = 128;
    int dynamic_embed = 64;
    int trunk_width = 128;
    std::array<int, 3> conv_channels{8, 16, 32};
    double stat_scale = 1.0 / 4.1;  // 1/(max_range + miss_offset)
    double dist_scale = 0.05;       // scales raw metric distances at the input

    int action_dims = 3;

    uint64_t arch_hash() const;
};

// Row-major batched policy input, assembled from StateBundles.
struct BatchedBundle {
    int batch = 0;
    int dim_int = 7, dim_dyn = 0, dim_stat = 0;
    std::vector<double> s_int;   // batch x 7
    std::vector<double> s_dyn;   // batch x (n_d*9)
    std::vector<double> s_stat;  // batch x (n_h*n_v)

    static BatchedBundle from_bundles(std::span<const StateBundle> bundles);
    void resize(int batch, int n_d, int n_h, int n_v);
    void set_row(int row, const StateBundle& b);
};

class Adam;

// Actor-critic over the three-part state: two feature extractors feed a dense
// trunk with Beta-parameter heads (softplus + 1, so alpha,beta > 1) and a
// scalar value head.
class PolicyNet {
public:
    PolicyNet(const NetConfig& cfg, uint64_t init_seed);

    struct Output {
        Tensor alpha;  // [B,3]
        Tensor beta;   // [B,3]
        Tensor value;  // [B]
    };
    Output forward(const BatchedBundle& input) const;

    const NetConfig& config() const { return cfg_; }
    std::vector<Tensor>& parameters() { return params_; }
    const std::vector<Tensor>& parameters() const { return params_; }
    size_t parameter_count() const;

    // Checkpoint: header (magic, version, arch hash, config, counter, count) +
    // little-endian parameters + optional optimizer moments. `counter` is a
    // caller-defined progress number (the trainer stores its update index).
    void save_checkpoint(const std::string& path, const Adam* adam = nullptr,
                         uint64_t counter = 0) const;
    static PolicyNet load_checkpoint(const std::string& path, Adam* adam = nullptr,
                                     uint64_t* counter = nullptr);

private:
    Tensor make_dense(int in, int out, double gain, Rng& rng);
    Tensor make_conv(int out_c, int in_c, int k, Rng& rng);

    NetConfig cfg_;
    std::vector<Tensor> params_;
    // Parameter handles (views into params_).
    Tensor se_w1_, se_b1_, se_w2_, se_b2_, se_w3_, se_b3_, se_proj_w_, se_proj_b_;
    Tensor de_w1_, de_b1_, de_w2_, de_b2_, de_w3_, de_b3_, de_proj_w_, de_proj_b_;
    Tensor trunk_w1_, trunk_b1_, trunk_w2_, trunk_b2_;
    Tensor head_alpha_w_, head_alpha_b_, head_beta_w_, head_beta_b_;
    Tensor head_value_w_, head_value_b_;
};

struct CheckpointInfo {
    uint32_t version = 0;
    uint64_t arch_hash = 0;
    NetConfig config;
    uint64_t counter = 0;
    uint64_t param_count = 0;
    bool has_optimizer = false;
    int64_t adam_step = 0;
};
CheckpointInfo read_checkpoint_info(const std::string& path);

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(std::vector<Tensor>& params, AdamConfig cfg = {});

    void zero_grad();
    void step();

    int64_t t() const { return t_; }
    AdamConfig& config() { return cfg_; }

    std::vector<std::vector<double>>& moments_m() { return m_; }
    std::vector<std::vector<double>>& moments_v() { return v_; }
    void set_t(int64_t t) { t_ = t; }

private:
    std::vector<Tensor>* params_;
    AdamConfig cfg_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// -- Beta-policy helpers (plain values, no graph) ---------------------------

// Sample via two gamma draws, clamped strictly inside (0,1).
double beta_sample(double alpha, double beta, Rng& rng);
std::array<double, 3> beta_sample3(const double* alpha, const double* beta, Rng& rng);

inline double beta_mean(double alpha, double beta) { return alpha / (alpha + beta); }

double beta_logprob_value(double alpha, double beta, double x);

// Eq-style action scaling: v = v_lim * (2*x - 1), componentwise, goal frame.
Vec3 scale_action(const std::array<double, 3>& x_hat, double v_lim);

}  // namespace navlab::nn
