#include "navlab/nn/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "navlab/nn/special.hpp"
#include "navlab/thread_pool.hpp"

namespace navlab::nn {

namespace {

std::atomic<uint64_t> g_next_id{1};
thread_local int g_no_grad_depth = 0;

bool grad_enabled() { return g_no_grad_depth == 0; }

std::shared_ptr<TensorNode> make_node(Shape shape, bool requires_grad) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value.resize(shape_numel(n->shape), 0.0);
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad.resize(n->value.size(), 0.0);
    n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    return n;
}

Tensor wrap(std::shared_ptr<TensorNode> node) {
    Tensor t;
    t.node() = std::move(node);
    return t;
}

bool track(std::initializer_list<const Tensor*> inputs) {
    if (!grad_enabled()) return false;
    for (const Tensor* t : inputs)
        if (t->node() && t->node()->requires_grad) return true;
    return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        std::ostringstream os;
        os << op << ": shape mismatch, expected " << shape_str(a.shape()) << " got "
           << shape_str(b.shape());
        throw std::invalid_argument(os.str());
    }
}

// Elementwise unary helper: f(value) and df(value, upstream-grad slot).
Tensor unary_op(const Tensor& x, double (*f)(double), double (*df)(double)) {
    const bool rg = track({&x});
    auto out = make_node(x.shape(), rg);
    const auto& xv = x.value();
    for (size_t i = 0; i < xv.size(); ++i) out->value[i] = f(xv[i]);
    if (rg) {
        auto xn = x.node();
        out->parents = {xn};
        out->backward_fn = [xn, df](TensorNode& self) {
            if (!xn->requires_grad) return;
            for (size_t i = 0; i < self.value.size(); ++i)
                xn->grad[i] += self.grad[i] * df(xn->value[i]);
        };
    }
    return wrap(out);
}

}  // namespace

int shape_numel(const Shape& shape) {
    int n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return wrap(make_node(std::move(shape), requires_grad && grad_enabled()));
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    auto n = make_node(std::move(shape), false);
    if (values.size() != n->value.size())
        throw std::invalid_argument("constant: value count does not match shape");
    n->value = std::move(values);
    return wrap(n);
}

Tensor Tensor::param(Shape shape, std::vector<double> values) {
    auto n = make_node(std::move(shape), true);
    if (values.size() != n->value.size())
        throw std::invalid_argument("param: value count does not match shape");
    n->value = std::move(values);
    return wrap(n);
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be a defined scalar");
    if (!loss.node()->requires_grad)
        throw std::invalid_argument("backward: loss does not require grad");

    // Topological order by DFS; node ids increase with creation order, so the
    // reverse sweep can simply process ids descending.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<TensorNode*> stack{loss.node().get()};
    while (!stack.empty()) {
        TensorNode* n = stack.back();
        stack.pop_back();
        if (!n->requires_grad || !seen.insert(n).second) continue;
        order.push_back(n);
        for (auto& p : n->parents) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(),
              [](const TensorNode* a, const TensorNode* b) { return a->id > b->id; });

    loss.node()->grad[0] += 1.0;
    for (TensorNode* n : order)
        if (n->backward_fn) n->backward_fn(*n);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.shape().size() != 2 || w.shape().size() != 2 || b.shape().size() != 1 ||
        x.shape()[1] != w.shape()[0] || w.shape()[1] != b.shape()[0]) {
        throw std::invalid_argument("linear: shape mismatch, expected x[B," +
                                    std::to_string(w.shape()[0]) + "] got " +
                                    shape_str(x.shape()));
    }
    const int batch = x.shape()[0], in = w.shape()[0], out_n = w.shape()[1];
    const bool rg = track({&x, &w, &b});
    auto out = make_node({batch, out_n}, rg);

    const double* xv = x.value().data();
    const double* wv = w.value().data();
    const double* bv = b.value().data();
    double* yv = out->value.data();
    // Rows are processed in tiles of four so each weight row streams from
    // cache once per tile instead of once per sample.
    constexpr int kTile = 4;
    const int n_tiles = (batch + kTile - 1) / kTile;
    ThreadPool::global().parallel_for(n_tiles, [&](int tile) {
        const int r0 = tile * kTile;
        const int rows = std::min(kTile, batch - r0);
        double* yr[kTile];
        const double* xr[kTile];
        for (int t = 0; t < rows; ++t) {
            yr[t] = yv + static_cast<size_t>(r0 + t) * out_n;
            xr[t] = xv + static_cast<size_t>(r0 + t) * in;
            for (int o = 0; o < out_n; ++o) yr[t][o] = bv[o];
        }
        if (rows == kTile) {
            for (int i = 0; i < in; ++i) {
                const double* wr = wv + static_cast<size_t>(i) * out_n;
                const double a0 = xr[0][i], a1 = xr[1][i], a2 = xr[2][i],
                             a3 = xr[3][i];
                for (int o = 0; o < out_n; ++o) {
                    const double wo = wr[o];
                    yr[0][o] += a0 * wo;
                    yr[1][o] += a1 * wo;
                    yr[2][o] += a2 * wo;
                    yr[3][o] += a3 * wo;
                }
            }
        } else {
            for (int t = 0; t < rows; ++t)
                for (int i = 0; i < in; ++i) {
                    const double a = xr[t][i];
                    const double* wr = wv + static_cast<size_t>(i) * out_n;
                    for (int o = 0; o < out_n; ++o) yr[t][o] += a * wr[o];
                }
        }
    });

    if (rg) {
        auto xn = x.node(), wn = w.node(), bn = b.node();
        out->parents = {xn, wn, bn};
        out->backward_fn = [xn, wn, bn, batch, in, out_n](TensorNode& self) {
            const double* gy = self.grad.data();
            constexpr int kTile = 4;
            if (xn->requires_grad) {
                double* gx = xn->grad.data();
                const double* wv2 = wn->value.data();
                const int n_tiles = (batch + kTile - 1) / kTile;
                ThreadPool::global().parallel_for(n_tiles, [&](int tile) {
                    const int r0 = tile * kTile;
                    const int rows = std::min(kTile, batch - r0);
                    if (rows == kTile) {
                        const double* g0 = gy + static_cast<size_t>(r0) * out_n;
                        const double* g1 = g0 + out_n;
                        const double* g2 = g1 + out_n;
                        const double* g3 = g2 + out_n;
                        for (int i = 0; i < in; ++i) {
                            const double* wr = wv2 + static_cast<size_t>(i) * out_n;
                            double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
                            for (int o = 0; o < out_n; ++o) {
                                const double wo = wr[o];
                                a0 += g0[o] * wo;
                                a1 += g1[o] * wo;
                                a2 += g2[o] * wo;
                                a3 += g3[o] * wo;
                            }
                            gx[static_cast<size_t>(r0) * in + i] += a0;
                            gx[static_cast<size_t>(r0 + 1) * in + i] += a1;
                            gx[static_cast<size_t>(r0 + 2) * in + i] += a2;
                            gx[static_cast<size_t>(r0 + 3) * in + i] += a3;
                        }
                    } else {
                        for (int t = 0; t < rows; ++t) {
                            const double* gyr = gy + static_cast<size_t>(r0 + t) * out_n;
                            double* gxr = gx + static_cast<size_t>(r0 + t) * in;
                            for (int i = 0; i < in; ++i) {
                                const double* wr = wv2 + static_cast<size_t>(i) * out_n;
                                double acc = 0.0;
                                for (int o = 0; o < out_n; ++o) acc += gyr[o] * wr[o];
                                gxr[i] += acc;
                            }
                        }
                    }
                });
            }
            if (wn->requires_grad) {
                double* gw = wn->grad.data();
                const double* xv2 = xn->value.data();
                const int n_tiles = (in + kTile - 1) / kTile;
                ThreadPool::global().parallel_for(n_tiles, [&](int tile) {
                    const int i0 = tile * kTile;
                    const int cols = std::min(kTile, in - i0);
                    if (cols == kTile) {
                        double* w0 = gw + static_cast<size_t>(i0) * out_n;
                        double* w1 = w0 + out_n;
                        double* w2 = w1 + out_n;
                        double* w3 = w2 + out_n;
                        for (int r = 0; r < batch; ++r) {
                            const double* xc = xv2 + static_cast<size_t>(r) * in + i0;
                            const double* gyr = gy + static_cast<size_t>(r) * out_n;
                            const double a0 = xc[0], a1 = xc[1], a2 = xc[2], a3 = xc[3];
                            for (int o = 0; o < out_n; ++o) {
                                const double g = gyr[o];
                                w0[o] += a0 * g;
                                w1[o] += a1 * g;
                                w2[o] += a2 * g;
                                w3[o] += a3 * g;
                            }
                        }
                    } else {
                        for (int t = 0; t < cols; ++t) {
                            double* gwr = gw + static_cast<size_t>(i0 + t) * out_n;
                            for (int r = 0; r < batch; ++r) {
                                const double a = xv2[static_cast<size_t>(r) * in + i0 + t];
                                if (a == 0.0) continue;
                                const double* gyr = gy + static_cast<size_t>(r) * out_n;
                                for (int o = 0; o < out_n; ++o) gwr[o] += a * gyr[o];
                            }
                        }
                    }
                });
            }
            if (bn->requires_grad) {
                double* gb = bn->grad.data();
                for (int r = 0; r < batch; ++r) {
                    const double* gyr = gy + static_cast<size_t>(r) * out_n;
                    for (int o = 0; o < out_n; ++o) gb[o] += gyr[o];
                }
            }
        };
    }
    return wrap(out);
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.shape().size() != 4 || w.shape().size() != 4 || x.shape()[1] != w.shape()[1])
        throw std::invalid_argument("conv2d: shape mismatch, x " + shape_str(x.shape()) +
                                    " w " + shape_str(w.shape()));
    const int batch = x.shape()[0], ch = x.shape()[1], h = x.shape()[2], wd = x.shape()[3];
    const int filt = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
    const int ph = kh / 2, pw = kw / 2;
    const bool rg = track({&x, &w, &b});
    auto out = make_node({batch, filt, h, wd}, rg);

    const double* xv = x.value().data();
    const double* wv = w.value().data();
    const double* bv = b.value().data();
    double* yv = out->value.data();
    const size_t x_img = static_cast<size_t>(ch) * h * wd;
    const size_t y_img = static_cast<size_t>(filt) * h * wd;

    ThreadPool::global().parallel_for(batch, [&](int n) {
        const double* xb = xv + n * x_img;
        double* yb = yv + n * y_img;
        for (int f = 0; f < filt; ++f) {
            double* yf = yb + static_cast<size_t>(f) * h * wd;
            for (int i = 0; i < h * wd; ++i) yf[i] = bv[f];
            for (int c = 0; c < ch; ++c) {
                const double* xc = xb + static_cast<size_t>(c) * h * wd;
                const double* wf = wv + ((static_cast<size_t>(f) * ch + c) * kh) * kw;
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx) {
                        const double wval = wf[ky * kw + kx];
                        if (wval == 0.0) continue;
                        const int dy = ky - ph, dx = kx - pw;
                        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                        const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
                        for (int y = y0; y < y1; ++y) {
                            const double* xrow = xc + static_cast<size_t>(y + dy) * wd + dx;
                            double* yrow = yf + static_cast<size_t>(y) * wd;
                            for (int xx = x0; xx < x1; ++xx) yrow[xx] += wval * xrow[xx];
                        }
                    }
            }
        }
    });

    if (rg) {
        auto xn = x.node(), wn = w.node(), bn = b.node();
        out->parents = {xn, wn, bn};
        out->backward_fn = [xn, wn, bn, batch, ch, h, wd, filt, kh, kw, ph,
                            pw](TensorNode& self) {
            const double* gy = self.grad.data();
            const size_t x_img = static_cast<size_t>(ch) * h * wd;
            const size_t y_img = static_cast<size_t>(filt) * h * wd;
            if (xn->requires_grad) {
                double* gx = xn->grad.data();
                const double* wv2 = wn->value.data();
                ThreadPool::global().parallel_for(batch, [&](int n) {
                    double* gxb = gx + n * x_img;
                    const double* gyb = gy + n * y_img;
                    for (int f = 0; f < filt; ++f) {
                        const double* gyf = gyb + static_cast<size_t>(f) * h * wd;
                        for (int c = 0; c < ch; ++c) {
                            double* gxc = gxb + static_cast<size_t>(c) * h * wd;
                            const double* wf =
                                wv2 + ((static_cast<size_t>(f) * ch + c) * kh) * kw;
                            for (int ky = 0; ky < kh; ++ky)
                                for (int kx = 0; kx < kw; ++kx) {
                                    const double wval = wf[ky * kw + kx];
                                    if (wval == 0.0) continue;
                                    const int dy = ky - ph, dx = kx - pw;
                                    const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                                    const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
                                    for (int y = y0; y < y1; ++y) {
                                        double* gxrow =
                                            gxc + static_cast<size_t>(y + dy) * wd + dx;
                                        const double* gyrow = gyf + static_cast<size_t>(y) * wd;
                                        for (int xx = x0; xx < x1; ++xx)
                                            gxrow[xx] += wval * gyrow[xx];
                                    }
                                }
                        }
                    }
                });
            }
            if (wn->requires_grad) {
                double* gw = wn->grad.data();
                const double* xv2 = xn->value.data();
                ThreadPool::global().parallel_for(filt, [&](int f) {
                    for (int n = 0; n < batch; ++n) {
                        const double* xb = xv2 + n * x_img;
                        const double* gyf =
                            gy + n * y_img + static_cast<size_t>(f) * h * wd;
                        for (int c = 0; c < ch; ++c) {
                            const double* xc = xb + static_cast<size_t>(c) * h * wd;
                            double* gwf =
                                gw + ((static_cast<size_t>(f) * ch + c) * kh) * kw;
                            for (int ky = 0; ky < kh; ++ky)
                                for (int kx = 0; kx < kw; ++kx) {
                                    const int dy = ky - ph, dx = kx - pw;
                                    const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                                    const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
                                    double acc = 0.0;
                                    for (int y = y0; y < y1; ++y) {
                                        const double* xrow =
                                            xc + static_cast<size_t>(y + dy) * wd + dx;
                                        const double* gyrow =
                                            gyf + static_cast<size_t>(y) * wd;
                                        for (int xx = x0; xx < x1; ++xx)
                                            acc += xrow[xx] * gyrow[xx];
                                    }
                                    gwf[ky * kw + kx] += acc;
                                }
                        }
                    }
                });
            }
            if (bn->requires_grad) {
                double* gb = bn->grad.data();
                for (int n = 0; n < batch; ++n)
                    for (int f = 0; f < filt; ++f) {
                        const double* gyf = gy + n * y_img + static_cast<size_t>(f) * h * wd;
                        double acc = 0.0;
                        for (int i = 0; i < h * wd; ++i) acc += gyf[i];
                        gb[f] += acc;
                    }
            }
        };
    }
    return wrap(out);
}

Tensor relu(const Tensor& x) {
    return unary_op(
        x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh_t(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::tanh(v); },
        [](double v) {
            const double t = std::tanh(v);
            return 1.0 - t * t;
        });
}

Tensor softplus_t(const Tensor& x) {
    return unary_op(
        x, [](double v) { return softplus(v); }, [](double v) { return sigmoid(v); });
}

Tensor exp_t(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

Tensor log_t(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
    return unary_op(
        x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Tensor neg(const Tensor& x) {
    return unary_op(
        x, [](double v) { return -v; }, [](double) { return -1.0; });
}

Tensor lgamma_t(const Tensor& x) {
    return unary_op(
        x, [](double v) { return lgamma_lanczos(v); },
        [](double v) { return digamma(v); });
}

Tensor digamma_t(const Tensor& x) {
    return unary_op(
        x, [](double v) { return digamma(v); }, [](double v) { return trigamma(v); });
}

Tensor scale(const Tensor& x, double c) {
    const bool rg = track({&x});
    auto out = make_node(x.shape(), rg);
    for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = c * x.value()[i];
    if (rg) {
        auto xn = x.node();
        out->parents = {xn};
        out->backward_fn = [xn, c](TensorNode& self) {
            for (size_t i = 0; i < self.value.size(); ++i)
                xn->grad[i] += c * self.grad[i];
        };
    }
    return wrap(out);
}

Tensor add_scalar(const Tensor& x, double c) {
    const bool rg = track({&x});
    auto out = make_node(x.shape(), rg);
    for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = x.value()[i] + c;
    if (rg) {
        auto xn = x.node();
        out->parents = {xn};
        out->backward_fn = [xn](TensorNode& self) {
            for (size_t i = 0; i < self.value.size(); ++i) xn->grad[i] += self.grad[i];
        };
    }
    return wrap(out);
}

Tensor clamp_t(const Tensor& x, double lo, double hi) {
    const bool rg = track({&x});
    auto out = make_node(x.shape(), rg);
    for (size_t i = 0; i < out->value.size(); ++i)
        out->value[i] = std::clamp(x.value()[i], lo, hi);
    if (rg) {
        auto xn = x.node();
        out->parents = {xn};
        out->backward_fn = [xn, lo, hi](TensorNode& self) {
            for (size_t i = 0; i < self.value.size(); ++i) {
                const double v = xn->value[i];
                if (v > lo && v < hi) xn->grad[i] += self.grad[i];
            }
        };
    }
    return wrap(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    const bool rg = track({&a, &b});
    auto out = make_node(a.shape(), rg);
    for (size_t i = 0; i < out->value.size(); ++i)
        out->value[i] = a.value()[i] + b.value()[i];
    if (rg) {
        auto an = a.node(), bn = b.node();
        out->parents = {an, bn};
        out->backward_fn = [an, bn](TensorNode& self) {
            for (size_t i = 0; i < self.value.size(); ++i) {
                if (an->requires_grad) an->grad[i] += self.grad[i];
                if (bn->requires_grad) bn->grad[i] += self.grad[i];
            }
        };
    }
    return wrap(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    const bool rg = track({&a, &b});
    auto out = make_node(a.shape(), rg);
    for (size_t i = 0; i < out->value.size(); ++i)
        out->value[i] = a.value()[i] - b.value()[i];
    if (rg) {
        auto an = a.node(), bn = b.node();
        out->parents = {an, bn};
        out->backward_fn = [an, bn](TensorNode& self) {
            for (size_t i = 0; i < self.value.size(); ++i) {
                if (an->requires_grad) an->grad[i] += self.grad[i];
                if (bn->requires_grad) bn->grad[i] -= self.grad[i];
            }
        };
    }
    return wrap(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    const bool rg = track({&a, &b});
    auto out = make_node(a.shape(), rg);
    for (size_t i = 0; i < out->value.size(); ++i)
        out->value[i] = a.value()[i] * b.value()[i];
    if (rg) {
        auto an = a.node(), bn = b.node();
        out->parents = {an, bn};
        out->backward_fn = [an, bn](TensorNode& self) {
            for (size_t i = 0; i < self.value.size(); ++i) {
                if (an->requires_grad) an->grad[i] += self.grad[i] * bn->value[i];
                if (bn->requires_grad) bn->grad[i] += self.grad[i] * an->value[i];
            }
        };
    }
    return wrap(out);
}

Tensor min_t(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "min");
    const bool rg = track({&a, &b});
    auto out = make_node(a.shape(), rg);
    for (size_t i = 0; i < out->value.size(); ++i)
        out->value[i] = std::min(a.value()[i], b.value()[i]);
    if (rg) {
        auto an = a.node(), bn = b.node();
        out->parents = {an, bn};
        out->backward_fn = [an, bn](TensorNode& self) {
            for (size_t i = 0; i < self.value.size(); ++i) {
                if (an->value[i] <= bn->value[i]) {
                    if (an->requires_grad) an->grad[i] += self.grad[i];
                } else if (bn->requires_grad) {
                    bn->grad[i] += self.grad[i];
                }
            }
        };
    }
    return wrap(out);
}

Tensor sum_all(const Tensor& x) {
    const bool rg = track({&x});
    auto out = make_node({1}, rg);
    double acc = 0.0;
    for (double v : x.value()) acc += v;
    out->value[0] = acc;
    if (rg) {
        auto xn = x.node();
        out->parents = {xn};
        out->backward_fn = [xn](TensorNode& self) {
            const double g = self.grad[0];
            for (double& gv : xn->grad) gv += g;
        };
    }
    return wrap(out);
}

Tensor mean_all(const Tensor& x) {
    const double inv = 1.0 / static_cast<double>(x.numel());
    return scale(sum_all(x), inv);
}

Tensor row_sum(const Tensor& x) {
    if (x.shape().size() != 2)
        throw std::invalid_argument("row_sum: expected rank-2, got " +
                                    shape_str(x.shape()));
    const int batch = x.shape()[0], n = x.shape()[1];
    const bool rg = track({&x});
    auto out = make_node({batch}, rg);
    for (int r = 0; r < batch; ++r) {
        double acc = 0.0;
        const double* row = x.value().data() + static_cast<size_t>(r) * n;
        for (int i = 0; i < n; ++i) acc += row[i];
        out->value[r] = acc;
    }
    if (rg) {
        auto xn = x.node();
        out->parents = {xn};
        out->backward_fn = [xn, batch, n](TensorNode& self) {
            for (int r = 0; r < batch; ++r) {
                const double g = self.grad[r];
                double* row = xn->grad.data() + static_cast<size_t>(r) * n;
                for (int i = 0; i < n; ++i) row[i] += g;
            }
        };
    }
    return wrap(out);
}

Tensor global_avg_pool(const Tensor& x) {
    if (x.shape().size() != 4)
        throw std::invalid_argument("global_avg_pool: expected rank-4, got " +
                                    shape_str(x.shape()));
    const int batch = x.shape()[0], ch = x.shape()[1];
    const int hw = x.shape()[2] * x.shape()[3];
    const double inv = 1.0 / hw;
    const bool rg = track({&x});
    auto out = make_node({batch, ch}, rg);
    for (int n = 0; n < batch; ++n)
        for (int c = 0; c < ch; ++c) {
            const double* img =
                x.value().data() + (static_cast<size_t>(n) * ch + c) * hw;
            double acc = 0.0;
            for (int i = 0; i < hw; ++i) acc += img[i];
            out->value[static_cast<size_t>(n) * ch + c] = acc * inv;
        }
    if (rg) {
        auto xn = x.node();
        out->parents = {xn};
        out->backward_fn = [xn, batch, ch, hw, inv](TensorNode& self) {
            for (int n = 0; n < batch; ++n)
                for (int c = 0; c < ch; ++c) {
                    const double g = self.grad[static_cast<size_t>(n) * ch + c] * inv;
                    double* img = xn->grad.data() + (static_cast<size_t>(n) * ch + c) * hw;
                    for (int i = 0; i < hw; ++i) img[i] += g;
                }
        };
    }
    return wrap(out);
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const int batch = parts[0].shape()[0];
    int total = 0;
    bool rg = false;
    for (const Tensor& t : parts) {
        if (t.shape().size() != 2 || t.shape()[0] != batch)
            throw std::invalid_argument("concat_cols: expected [B,N] with B=" +
                                        std::to_string(batch) + ", got " +
                                        shape_str(t.shape()));
        total += t.shape()[1];
        rg = rg || (grad_enabled() && t.requires_grad());
    }
    auto out = make_node({batch, total}, rg);
    int off = 0;
    for (const Tensor& t : parts) {
        const int n = t.shape()[1];
        for (int r = 0; r < batch; ++r)
            std::copy_n(t.value().data() + static_cast<size_t>(r) * n, n,
                        out->value.data() + static_cast<size_t>(r) * total + off);
        off += n;
    }
    if (rg) {
        std::vector<std::shared_ptr<TensorNode>> nodes;
        std::vector<int> widths;
        for (const Tensor& t : parts) {
            nodes.push_back(t.node());
            widths.push_back(t.shape()[1]);
        }
        out->parents = nodes;
        out->backward_fn = [nodes, widths, batch, total](TensorNode& self) {
            int off2 = 0;
            for (size_t p = 0; p < nodes.size(); ++p) {
                const int n = widths[p];
                if (nodes[p]->requires_grad) {
                    for (int r = 0; r < batch; ++r) {
                        const double* src =
                            self.grad.data() + static_cast<size_t>(r) * total + off2;
                        double* dst = nodes[p]->grad.data() + static_cast<size_t>(r) * n;
                        for (int i = 0; i < n; ++i) dst[i] += src[i];
                    }
                }
                off2 += n;
            }
        };
    }
    return wrap(out);
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel())
        throw std::invalid_argument("reshape: numel mismatch " + shape_str(x.shape()) +
                                    " -> " + shape_str(shape));
    const bool rg = track({&x});
    auto out = make_node(std::move(shape), rg);
    out->value = x.value();
    if (rg) {
        auto xn = x.node();
        out->parents = {xn};
        out->backward_fn = [xn](TensorNode& self) {
            for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
        };
    }
    return wrap(out);
}

Tensor beta_logprob(const Tensor& alpha, const Tensor& beta, const Tensor& x) {
    check_same_shape(alpha, beta, "beta_logprob");
    check_same_shape(alpha, x, "beta_logprob");
    // (a-1) ln x + (b-1) ln(1-x) - ln B(a,b), summed across action dims.
    Tensor one_minus_x = add_scalar(neg(x), 1.0);
    Tensor term = add(mul(add_scalar(alpha, -1.0), log_t(x)),
                      mul(add_scalar(beta, -1.0), log_t(one_minus_x)));
    Tensor log_b = sub(add(lgamma_t(alpha), lgamma_t(beta)), lgamma_t(add(alpha, beta)));
    return row_sum(sub(term, log_b));
}

Tensor beta_entropy(const Tensor& alpha, const Tensor& beta) {
    check_same_shape(alpha, beta, "beta_entropy");
    Tensor ab = add(alpha, beta);
    Tensor log_b = sub(add(lgamma_t(alpha), lgamma_t(beta)), lgamma_t(ab));
    Tensor h = sub(log_b, mul(add_scalar(alpha, -1.0), digamma_t(alpha)));
    h = sub(h, mul(add_scalar(beta, -1.0), digamma_t(beta)));
    h = add(h, mul(add_scalar(ab, -2.0), digamma_t(ab)));
    return row_sum(h);
}

}  // namespace navlab::nn
