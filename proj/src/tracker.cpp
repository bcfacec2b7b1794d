#include "navlab/tracker.hpp"

#include <algorithm>
#include <cmath>

namespace navlab {

namespace {

// Per-axis constant-acceleration transition, applied blockwise.
void apply_transition(std::array<double, 9>& s, double dt) {
    for (int a = 0; a < 3; ++a) {
        const double p = s[a], v = s[3 + a], acc = s[6 + a];
        s[a] = p + v * dt + 0.5 * acc * dt * dt;
        s[3 + a] = v + acc * dt;
    }
}

Matrix transition_matrix(double dt) {
    Matrix f = Matrix::identity(9);
    for (int a = 0; a < 3; ++a) {
        f(a, 3 + a) = dt;
        f(a, 6 + a) = 0.5 * dt * dt;
        f(3 + a, 6 + a) = dt;
    }
    return f;
}

// White-jerk process noise for the CA model.
Matrix process_noise(double dt, double q) {
    Matrix n(9, 9);
    const double d2 = dt * dt, d3 = d2 * dt, d4 = d3 * dt, d5 = d4 * dt;
    const double blk[3][3] = {{d5 / 20.0, d4 / 8.0, d3 / 6.0},
                              {d4 / 8.0, d3 / 3.0, d2 / 2.0},
                              {d3 / 6.0, d2 / 2.0, dt}};
    for (int a = 0; a < 3; ++a)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) n(3 * i + a, 3 * j + a) = q * blk[i][j];
    return n;
}

void symmetrize(Matrix& p) {
    for (int i = 0; i < p.rows(); ++i)
        for (int j = i + 1; j < p.cols(); ++j) {
            const double v = 0.5 * (p(i, j) + p(j, i));
            p(i, j) = v;
            p(j, i) = v;
        }
}

bool invert3(const double a[9], double inv[9]) {
    const double det = a[0] * (a[4] * a[8] - a[5] * a[7]) -
                       a[1] * (a[3] * a[8] - a[5] * a[6]) +
                       a[2] * (a[3] * a[7] - a[4] * a[6]);
    if (std::abs(det) < 1e-18) return false;
    const double id = 1.0 / det;
    inv[0] = (a[4] * a[8] - a[5] * a[7]) * id;
    inv[1] = (a[2] * a[7] - a[1] * a[8]) * id;
    inv[2] = (a[1] * a[5] - a[2] * a[4]) * id;
    inv[3] = (a[5] * a[6] - a[3] * a[8]) * id;
    inv[4] = (a[0] * a[8] - a[2] * a[6]) * id;
    inv[5] = (a[2] * a[3] - a[0] * a[5]) * id;
    inv[6] = (a[3] * a[7] - a[4] * a[6]) * id;
    inv[7] = (a[1] * a[6] - a[0] * a[7]) * id;
    inv[8] = (a[0] * a[4] - a[1] * a[3]) * id;
    return true;
}

}  // namespace

double similarity(const ObstacleTrack& track, const Detection& det,
                  const TrackerConfig& cfg) {
    const Vec3 dp = track.position() - det.center;
    const double d_pos = dp.norm() / cfg.scale_pos;
    const double dw = track.feature[3] - det.feature[3];
    const double dh = track.feature[4] - det.feature[4];
    const double d_dims = std::sqrt(dw * dw + dh * dh) / cfg.scale_dims;
    const double d_count = std::abs(track.feature[5] - det.feature[5]) / cfg.scale_count;
    const double d_std = std::abs(track.feature[6] - det.feature[6]) / cfg.scale_std;
    return std::exp(-(cfg.w_pos * d_pos + cfg.w_dims * d_dims + cfg.w_count * d_count +
                      cfg.w_std * d_std));
}

std::vector<std::pair<int, int>> associate(std::span<const ObstacleTrack> tracks,
                                           std::span<const Detection> dets,
                                           const TrackerConfig& cfg) {
    struct Cand {
        double score;
        int ti;
        int di;
    };
    std::vector<Cand> cands;
    cands.reserve(tracks.size() * dets.size());
    const double gate = std::exp(-cfg.w_pos * cfg.gate_pos_dist / cfg.scale_pos);
    for (size_t ti = 0; ti < tracks.size(); ++ti)
        for (size_t di = 0; di < dets.size(); ++di) {
            const double s = similarity(tracks[ti], dets[di], cfg);
            if (s >= gate)
                cands.push_back({s, static_cast<int>(ti), static_cast<int>(di)});
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.ti != b.ti) return a.ti < b.ti;
        return a.di < b.di;
    });

    std::vector<char> track_used(tracks.size(), 0), det_used(dets.size(), 0);
    std::vector<std::pair<int, int>> matches;
    for (const Cand& c : cands) {
        if (track_used[c.ti] || det_used[c.di]) continue;
        track_used[c.ti] = 1;
        det_used[c.di] = 1;
        matches.emplace_back(tracks[c.ti].id, c.di);
    }
    return matches;
}

void kf_predict(ObstacleTrack& track, double dt, const TrackerConfig& cfg) {
    apply_transition(track.state, dt);
    const Matrix f = transition_matrix(dt);
    track.covariance = f * track.covariance * f.transposed() +
                       process_noise(dt, cfg.jerk_psd);
    symmetrize(track.covariance);
}

bool kf_update(ObstacleTrack& track, const Detection& det, const TrackerConfig& cfg) {
    Matrix& p = track.covariance;
    const double r = cfg.meas_noise_std * cfg.meas_noise_std;

    // S = H P H^T + R with H selecting the position block.
    double s[9], s_inv[9];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s[3 * i + j] = p(i, j) + (i == j ? r : 0.0);
    if (!invert3(s, s_inv)) {
        ++track.missed_frames;
        return false;
    }

    // K = P H^T S^-1, 9x3.
    Matrix k(9, 3);
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int m = 0; m < 3; ++m) acc += p(i, m) * s_inv[3 * m + j];
            k(i, j) = acc;
        }

    const Vec3 innov = det.center - track.position();
    const double y[3] = {innov.x, innov.y, innov.z};
    for (int i = 0; i < 9; ++i)
        track.state[i] += k(i, 0) * y[0] + k(i, 1) * y[1] + k(i, 2) * y[2];

    // Joseph form: (I-KH) P (I-KH)^T + K R K^T.
    Matrix ikh = Matrix::identity(9);
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 3; ++j) ikh(i, j) -= k(i, j);
    Matrix joseph = ikh * p * ikh.transposed();
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) {
            double acc = 0.0;
            for (int m = 0; m < 3; ++m) acc += k(i, m) * k(j, m);
            joseph(i, j) += r * acc;
        }
    p = joseph;
    symmetrize(p);

    track.width += cfg.dims_ema * (det.width - track.width);
    track.height += cfg.dims_ema * (det.height - track.height);
    track.feature = det.feature;
    track.feature[3] = track.width;
    track.feature[4] = track.height;
    track.missed_frames = 0;
    return true;
}

ObstacleTrack MultiObjectTracker::spawn(const Detection& det) {
    ObstacleTrack t;
    t.id = next_id_++;
    t.state = {det.center.x, det.center.y, det.center.z, 0, 0, 0, 0, 0, 0};
    t.covariance = Matrix(9, 9);
    for (int a = 0; a < 3; ++a) {
        t.covariance(a, a) = cfg_.spawn_pos_std * cfg_.spawn_pos_std;
        t.covariance(3 + a, 3 + a) = cfg_.spawn_vel_std * cfg_.spawn_vel_std;
        t.covariance(6 + a, 6 + a) = cfg_.spawn_acc_std * cfg_.spawn_acc_std;
    }
    t.width = det.width;
    t.height = det.height;
    t.feature = det.feature;
    return t;
}

const std::vector<ObstacleTrack>& MultiObjectTracker::step(std::span<const Detection> dets,
                                                           double dt) {
    for (ObstacleTrack& t : tracks_) {
        kf_predict(t, dt, cfg_);
        ++t.age;
    }

    const auto matches = associate(tracks_, dets, cfg_);
    std::vector<char> det_matched(dets.size(), 0);
    std::vector<char> track_matched(tracks_.size(), 0);
    for (const auto& [track_id, di] : matches) {
        for (size_t ti = 0; ti < tracks_.size(); ++ti) {
            if (tracks_[ti].id == track_id) {
                kf_update(tracks_[ti], dets[di], cfg_);
                track_matched[ti] = 1;
                det_matched[di] = 1;
                break;
            }
        }
    }
    for (size_t ti = 0; ti < tracks_.size(); ++ti)
        if (!track_matched[ti]) ++tracks_[ti].missed_frames;

    for (size_t di = 0; di < dets.size(); ++di)
        if (!det_matched[di]) tracks_.push_back(spawn(dets[di]));

    std::erase_if(tracks_, [this](const ObstacleTrack& t) {
        return t.missed_frames > cfg_.prune_after;
    });
    return tracks_;
}

}  // namespace navlab
