#include "navlab/nn/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "navlab/nn/special.hpp"

namespace navlab::nn {

namespace {

constexpr char kMagic[4] = {'N', 'V', 'C', 'K'};
constexpr uint32_t kVersion = 1;

uint64_t fnv1a(uint64_t h, uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Orthogonal init (modified Gram-Schmidt on a random normal matrix).
std::vector<double> orthogonal(int rows, int cols, double gain, Rng& rng) {
    const bool tall = rows >= cols;
    const int n = tall ? rows : cols;
    const int k = tall ? cols : rows;
    std::vector<std::vector<double>> q(k, std::vector<double>(n));
    for (auto& col : q)
        for (double& v : col) v = rng.normal();
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < i; ++j) {
            double dot = 0.0;
            for (int r = 0; r < n; ++r) dot += q[i][r] * q[j][r];
            for (int r = 0; r < n; ++r) q[i][r] -= dot * q[j][r];
        }
        double norm = 0.0;
        for (double v : q[i]) norm += v * v;
        norm = std::sqrt(norm);
        if (norm < 1e-12) norm = 1.0;
        for (double& v : q[i]) v /= norm;
    }
    std::vector<double> w(static_cast<size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            w[static_cast<size_t>(r) * cols + c] = gain * (tall ? q[c][r] : q[r][c]);
    return w;
}

}  // namespace

uint64_t NetConfig::arch_hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    h = fnv1a(h, static_cast<uint64_t>(n_h));
    h = fnv1a(h, static_cast<uint64_t>(n_v));
    h = fnv1a(h, static_cast<uint64_t>(n_d));
    h = fnv1a(h, conv_extractors ? 1 : 0);
    h = fnv1a(h, static_cast<uint64_t>(static_embed));
    h = fnv1a(h, static_cast<uint64_t>(dynamic_embed));
    h = fnv1a(h, static_cast<uint64_t>(trunk_width));
    for (int c : conv_channels) h = fnv1a(h, static_cast<uint64_t>(c));
    uint64_t bits;
    std::memcpy(&bits, &stat_scale, 8);
    h = fnv1a(h, bits);
    std::memcpy(&bits, &dist_scale, 8);
    h = fnv1a(h, bits);
    h = fnv1a(h, static_cast<uint64_t>(action_dims));
    return h;
}

BatchedBundle BatchedBundle::from_bundles(std::span<const StateBundle> bundles) {
    BatchedBundle out;
    if (bundles.empty()) return out;
    const int n_d = bundles[0].s_dyn.rows();
    const int n_h = bundles[0].s_stat.rows();
    const int n_v = bundles[0].s_stat.cols();
    out.resize(static_cast<int>(bundles.size()), n_d, n_h, n_v);
    for (size_t i = 0; i < bundles.size(); ++i)
        out.set_row(static_cast<int>(i), bundles[i]);
    return out;
}

void BatchedBundle::resize(int b, int n_d, int n_h, int n_v) {
    batch = b;
    dim_dyn = n_d * 9;
    dim_stat = n_h * n_v;
    s_int.assign(static_cast<size_t>(b) * dim_int, 0.0);
    s_dyn.assign(static_cast<size_t>(b) * dim_dyn, 0.0);
    s_stat.assign(static_cast<size_t>(b) * dim_stat, 0.0);
}

void BatchedBundle::set_row(int row, const StateBundle& b) {
    std::copy_n(b.s_int.data(), dim_int, s_int.data() + static_cast<size_t>(row) * dim_int);
    std::copy_n(b.s_dyn.data().data(), dim_dyn,
                s_dyn.data() + static_cast<size_t>(row) * dim_dyn);
    std::copy_n(b.s_stat.data().data(), dim_stat,
                s_stat.data() + static_cast<size_t>(row) * dim_stat);
}

Tensor PolicyNet::make_dense(int in, int out, double gain, Rng& rng) {
    Tensor w = Tensor::param({in, out}, orthogonal(in, out, gain, rng));
    params_.push_back(w);
    return w;
}

Tensor PolicyNet::make_conv(int out_c, int in_c, int k, Rng& rng) {
    const double std = std::sqrt(2.0 / (in_c * k * k));  // He
    std::vector<double> w(static_cast<size_t>(out_c) * in_c * k * k);
    for (double& v : w) v = std * rng.normal();
    Tensor t = Tensor::param({out_c, in_c, k, k}, std::move(w));
    params_.push_back(t);
    return t;
}

PolicyNet::PolicyNet(const NetConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    Rng rng(init_seed);
    auto bias = [&](int n) {
        Tensor b = Tensor::param({n}, std::vector<double>(n, 0.0));
        params_.push_back(b);
        return b;
    };

    const auto [c1, c2, c3] = cfg_.conv_channels;
    if (cfg_.conv_extractors) {
        se_w1_ = make_conv(c1, 1, 3, rng);
        se_b1_ = bias(c1);
        se_w2_ = make_conv(c2, c1, 3, rng);
        se_b2_ = bias(c2);
        se_w3_ = make_conv(c3, c2, 3, rng);
        se_b3_ = bias(c3);
        se_proj_w_ = make_dense(c3, cfg_.static_embed, std::sqrt(2.0), rng);
        se_proj_b_ = bias(cfg_.static_embed);

        de_w1_ = make_conv(c1, 1, 3, rng);
        de_b1_ = bias(c1);
        de_w2_ = make_conv(c2, c1, 3, rng);
        de_b2_ = bias(c2);
        de_w3_ = make_conv(c3, c2, 3, rng);
        de_b3_ = bias(c3);
        de_proj_w_ = make_dense(c3, cfg_.dynamic_embed, std::sqrt(2.0), rng);
        de_proj_b_ = bias(cfg_.dynamic_embed);
    } else {
        se_proj_w_ = make_dense(cfg_.n_h * cfg_.n_v, cfg_.static_embed, std::sqrt(2.0), rng);
        se_proj_b_ = bias(cfg_.static_embed);
        de_proj_w_ = make_dense(cfg_.n_d * 9, cfg_.dynamic_embed, std::sqrt(2.0), rng);
        de_proj_b_ = bias(cfg_.dynamic_embed);
    }

    const int trunk_in = cfg_.static_embed + cfg_.dynamic_embed + 7;
    trunk_w1_ = make_dense(trunk_in, cfg_.trunk_width, 1.0, rng);
    trunk_b1_ = bias(cfg_.trunk_width);
    trunk_w2_ = make_dense(cfg_.trunk_width, cfg_.trunk_width, 1.0, rng);
    trunk_b2_ = bias(cfg_.trunk_width);

    head_alpha_w_ = make_dense(cfg_.trunk_width, cfg_.action_dims, 0.01, rng);
    head_alpha_b_ = bias(cfg_.action_dims);
    head_beta_w_ = make_dense(cfg_.trunk_width, cfg_.action_dims, 0.01, rng);
    head_beta_b_ = bias(cfg_.action_dims);
    head_value_w_ = make_dense(cfg_.trunk_width, 1, 1.0, rng);
    head_value_b_ = bias(1);
}

size_t PolicyNet::parameter_count() const {
    size_t n = 0;
    for (const Tensor& p : params_) n += p.value().size();
    return n;
}

PolicyNet::Output PolicyNet::forward(const BatchedBundle& input) const {
    const int b = input.batch;
    if (input.dim_stat != cfg_.n_h * cfg_.n_v || input.dim_dyn != cfg_.n_d * 9)
        throw std::invalid_argument(
            "forward: shape mismatch, expected s_stat cols " +
            std::to_string(cfg_.n_h * cfg_.n_v) + " s_dyn cols " +
            std::to_string(cfg_.n_d * 9) + ", got " + std::to_string(input.dim_stat) +
            " and " + std::to_string(input.dim_dyn));

    // Fixed input scaling: ray lengths to (0,1], metric distances to ~O(1).
    std::vector<double> stat_scaled = input.s_stat;
    for (double& v : stat_scaled) v *= cfg_.stat_scale;
    // Obstacle rows are [unit(3), dist, vel(3), w, h]; col 3 is the raw distance.
    std::vector<double> dyn_scaled = input.s_dyn;
    for (int r = 0; r < b; ++r)
        for (int row = 0; row < cfg_.n_d; ++row)
            dyn_scaled[static_cast<size_t>(r) * input.dim_dyn + row * 9 + 3] *=
                cfg_.dist_scale;
    std::vector<double> int_scaled = input.s_int;
    for (int r = 0; r < b; ++r)
        int_scaled[static_cast<size_t>(r) * 7 + 3] *= cfg_.dist_scale;

    Tensor stat_in = Tensor::constant({b, input.dim_stat}, std::move(stat_scaled));
    Tensor dyn_in = Tensor::constant({b, input.dim_dyn}, std::move(dyn_scaled));
    Tensor int_in = Tensor::constant({b, 7}, std::move(int_scaled));

    Tensor stat_embed, dyn_embed;
    if (cfg_.conv_extractors) {
        Tensor img = reshape(stat_in, {b, 1, cfg_.n_h, cfg_.n_v});
        img = relu(conv2d(img, se_w1_, se_b1_));
        img = relu(conv2d(img, se_w2_, se_b2_));
        img = relu(conv2d(img, se_w3_, se_b3_));
        stat_embed = relu(linear(global_avg_pool(img), se_proj_w_, se_proj_b_));

        Tensor dimg = reshape(dyn_in, {b, 1, cfg_.n_d, 9});
        dimg = relu(conv2d(dimg, de_w1_, de_b1_));
        dimg = relu(conv2d(dimg, de_w2_, de_b2_));
        dimg = relu(conv2d(dimg, de_w3_, de_b3_));
        dyn_embed = relu(linear(global_avg_pool(dimg), de_proj_w_, de_proj_b_));
    } else {
        stat_embed = relu(linear(stat_in, se_proj_w_, se_proj_b_));
        dyn_embed = relu(linear(dyn_in, de_proj_w_, de_proj_b_));
    }

    const Tensor parts[3] = {stat_embed, dyn_embed, int_in};
    Tensor trunk = concat_cols(parts);
    trunk = tanh_t(linear(trunk, trunk_w1_, trunk_b1_));
    trunk = tanh_t(linear(trunk, trunk_w2_, trunk_b2_));

    Output out;
    out.alpha = add_scalar(softplus_t(linear(trunk, head_alpha_w_, head_alpha_b_)), 1.0);
    out.beta = add_scalar(softplus_t(linear(trunk, head_beta_w_, head_beta_b_)), 1.0);
    out.value = reshape(linear(trunk, head_value_w_, head_value_b_), {b});
    return out;
}

// -- checkpoint io -----------------------------------------------------------

namespace {

void write_u32(std::ofstream& f, uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
}
void write_u64(std::ofstream& f, uint64_t v) {
    f.write(reinterpret_cast<const char*>(&v), 8);
}
void write_f64(std::ofstream& f, double v) {
    f.write(reinterpret_cast<const char*>(&v), 8);
}
uint32_t read_u32(std::ifstream& f) {
    uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
uint64_t read_u64(std::ifstream& f) {
    uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
double read_f64(std::ifstream& f) {
    double v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

void write_config(std::ofstream& f, const NetConfig& c) {
    write_u32(f, static_cast<uint32_t>(c.n_h));
    write_u32(f, static_cast<uint32_t>(c.n_v));
    write_u32(f, static_cast<uint32_t>(c.n_d));
    write_u32(f, c.conv_extractors ? 1 : 0);
    write_u32(f, static_cast<uint32_t>(c.static_embed));
    write_u32(f, static_cast<uint32_t>(c.dynamic_embed));
    write_u32(f, static_cast<uint32_t>(c.trunk_width));
    for (int ch : c.conv_channels) write_u32(f, static_cast<uint32_t>(ch));
    write_f64(f, c.stat_scale);
    write_f64(f, c.dist_scale);
    write_u32(f, static_cast<uint32_t>(c.action_dims));
}

NetConfig read_config(std::ifstream& f) {
    NetConfig c;
    c.n_h = static_cast<int>(read_u32(f));
    c.n_v = static_cast<int>(read_u32(f));
    c.n_d = static_cast<int>(read_u32(f));
    c.conv_extractors = read_u32(f) != 0;
    c.static_embed = static_cast<int>(read_u32(f));
    c.dynamic_embed = static_cast<int>(read_u32(f));
    c.trunk_width = static_cast<int>(read_u32(f));
    for (int& ch : c.conv_channels) ch = static_cast<int>(read_u32(f));
    c.stat_scale = read_f64(f);
    c.dist_scale = read_f64(f);
    c.action_dims = static_cast<int>(read_u32(f));
    return c;
}

}  // namespace

void PolicyNet::save_checkpoint(const std::string& path, const Adam* adam,
                                uint64_t counter) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f.write(kMagic, 4);
    write_u32(f, kVersion);
    write_u64(f, cfg_.arch_hash());
    write_config(f, cfg_);
    write_u64(f, counter);
    write_u64(f, parameter_count());
    for (const Tensor& p : params_)
        f.write(reinterpret_cast<const char*>(p.value().data()),
                static_cast<std::streamsize>(p.value().size() * sizeof(double)));
    write_u32(f, adam ? 1 : 0);
    if (adam) {
        Adam& a = *const_cast<Adam*>(adam);
        write_u64(f, static_cast<uint64_t>(a.t()));
        for (const auto& m : a.moments_m())
            f.write(reinterpret_cast<const char*>(m.data()),
                    static_cast<std::streamsize>(m.size() * sizeof(double)));
        for (const auto& v : a.moments_v())
            f.write(reinterpret_cast<const char*>(v.data()),
                    static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

PolicyNet PolicyNet::load_checkpoint(const std::string& path, Adam* adam,
                                     uint64_t* counter) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for read: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("bad checkpoint magic: " + path);
    const uint32_t version = read_u32(f);
    if (version != kVersion) throw std::runtime_error("unsupported checkpoint version");
    const uint64_t stored_hash = read_u64(f);
    const NetConfig cfg = read_config(f);
    if (cfg.arch_hash() != stored_hash)
        throw std::runtime_error("checkpoint architecture hash mismatch");
    const uint64_t stored_counter = read_u64(f);
    if (counter) *counter = stored_counter;
    const uint64_t count = read_u64(f);

    PolicyNet net(cfg, /*init_seed=*/0);
    if (net.parameter_count() != count)
        throw std::runtime_error("checkpoint architecture hash mismatch");
    for (Tensor& p : net.params_) {
        f.read(reinterpret_cast<char*>(p.value().data()),
               static_cast<std::streamsize>(p.value().size() * sizeof(double)));
    }
    const bool has_opt = read_u32(f) != 0;
    if (has_opt && adam) {
        adam->set_t(static_cast<int64_t>(read_u64(f)));
        for (auto& m : adam->moments_m())
            f.read(reinterpret_cast<char*>(m.data()),
                   static_cast<std::streamsize>(m.size() * sizeof(double)));
        for (auto& v : adam->moments_v())
            f.read(reinterpret_cast<char*>(v.data()),
                   static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    return net;
}

CheckpointInfo read_checkpoint_info(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for read: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("bad checkpoint magic: " + path);
    CheckpointInfo info;
    info.version = read_u32(f);
    info.arch_hash = read_u64(f);
    info.config = read_config(f);
    info.counter = read_u64(f);
    info.param_count = read_u64(f);
    f.seekg(static_cast<std::streamoff>(info.param_count * sizeof(double)),
            std::ios::cur);
    info.has_optimizer = read_u32(f) != 0;
    if (info.has_optimizer) info.adam_step = static_cast<int64_t>(read_u64(f));
    return info;
}

// -- Adam --------------------------------------------------------------------

Adam::Adam(std::vector<Tensor>& params, AdamConfig cfg) : params_(&params), cfg_(cfg) {
    for (Tensor& p : params) {
        m_.emplace_back(p.value().size(), 0.0);
        v_.emplace_back(p.value().size(), 0.0);
    }
}

void Adam::zero_grad() {
    for (Tensor& p : *params_) std::fill(p.grad().begin(), p.grad().end(), 0.0);
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t p = 0; p < params_->size(); ++p) {
        auto& val = (*params_)[p].value();
        const auto& g = (*params_)[p].grad();
        auto& m = m_[p];
        auto& v = v_[p];
        for (size_t i = 0; i < val.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            val[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
        }
    }
}

// -- Beta helpers --------------------------------------------------------------

double beta_sample(double alpha, double beta, Rng& rng) {
    const double x = rng.beta(alpha, beta);
    return std::clamp(x, 1e-6, 1.0 - 1e-6);
}

std::array<double, 3> beta_sample3(const double* alpha, const double* beta, Rng& rng) {
    return {beta_sample(alpha[0], beta[0], rng), beta_sample(alpha[1], beta[1], rng),
            beta_sample(alpha[2], beta[2], rng)};
}

double beta_logprob_value(double alpha, double beta, double x) {
    x = std::clamp(x, 1e-6, 1.0 - 1e-6);
    return (alpha - 1.0) * std::log(x) + (beta - 1.0) * std::log1p(-x) -
           log_beta(alpha, beta);
}

Vec3 scale_action(const std::array<double, 3>& x_hat, double v_lim) {
    return {v_lim * (2.0 * x_hat[0] - 1.0), v_lim * (2.0 * x_hat[1] - 1.0),
            v_lim * (2.0 * x_hat[2] - 1.0)};
}

}  // namespace navlab::nn
