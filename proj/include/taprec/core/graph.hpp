#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "taprec/core/errors.hpp"
#include "taprec/core/rng.hpp"
#include "taprec/core/tensor.hpp"

namespace taprec {

// A trainable tensor with its gradient accumulator and Adam state.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m, adam_v;

    Param() = default;
    Param(std::string name_, Tensor value_) : name(std::move(name_)), value(std::move(value_)) {
        grad = Tensor(value.n(), value.c(), value.h(), value.w());
    }

    void zero_grad() { grad.fill(0.0); }
};

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are appended in forward order; backward() walks
// them in reverse. One tape per training step; params live outside the tape
// and receive their gradients when backward reaches the leaf nodes.
class Tape {
public:
    struct Node {
        Tensor val;
        Tensor grad;
        bool has_grad = false;
        bool need = false;
        Param* param = nullptr;
        std::function<void(Tape&, Node&)> back;
    };

    // --- leaves ---------------------------------------------------------

    Var input(Tensor v) { return push(std::move(v), false); }

    // Non-param leaf that still accumulates a gradient (finite-difference
    // probes, Grad-CAM input gradients).
    Var input_tracked(Tensor v) { return push(std::move(v), true); }

    Var param(Param& p) {
        Var out = push(p.value, true);
        node(out).param = &p;
        return out;
    }

    // --- elementwise / structural ----------------------------------------

    Var add(Var a, Var b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        require_same(ta, tb, "add");
        Tensor out = ta;
        for (size_t i = 0; i < out.numel(); ++i) out[i] += tb[i];
        Var o = push(std::move(out), needs(a) || needs(b));
        node(o).back = [a, b](Tape& t, Node& n) {
            t.accumulate(a, n.grad, 1.0);
            t.accumulate(b, n.grad, 1.0);
        };
        return o;
    }

    Var sub(Var a, Var b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        require_same(ta, tb, "sub");
        Tensor out = ta;
        for (size_t i = 0; i < out.numel(); ++i) out[i] -= tb[i];
        Var o = push(std::move(out), needs(a) || needs(b));
        node(o).back = [a, b](Tape& t, Node& n) {
            t.accumulate(a, n.grad, 1.0);
            t.accumulate(b, n.grad, -1.0);
        };
        return o;
    }

    Var scale(Var a, double s) {
        Tensor out = val(a);
        for (size_t i = 0; i < out.numel(); ++i) out[i] *= s;
        Var o = push(std::move(out), needs(a));
        node(o).back = [a, s](Tape& t, Node& n) { t.accumulate(a, n.grad, s); };
        return o;
    }

    // a + s*b, shapes equal.
    Var add_scaled(Var a, Var b, double s) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        require_same(ta, tb, "add_scaled");
        Tensor out = ta;
        for (size_t i = 0; i < out.numel(); ++i) out[i] += s * tb[i];
        Var o = push(std::move(out), needs(a) || needs(b));
        node(o).back = [a, b, s](Tape& t, Node& n) {
            t.accumulate(a, n.grad, 1.0);
            t.accumulate(b, n.grad, s);
        };
        return o;
    }

    Var leaky_relu(Var a, double slope = 0.1) {
        const Tensor& ta = val(a);
        Tensor out = ta;
        for (size_t i = 0; i < out.numel(); ++i)
            if (out[i] < 0.0) out[i] *= slope;
        Var o = push(std::move(out), needs(a));
        node(o).back = [a, slope](Tape& t, Node& n) {
            const Tensor& x = t.val(a);
            Tensor g = n.grad;
            for (size_t i = 0; i < g.numel(); ++i)
                if (x[i] < 0.0) g[i] *= slope;
            t.accumulate_raw(a, g);
        };
        return o;
    }

    Var concat_channels(Var a, Var b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (ta.n() != tb.n() || ta.h() != tb.h() || ta.w() != tb.w())
            throw DimensionError("concat_channels: " + ta.shape_str() + " vs " + tb.shape_str());
        const int ca = ta.c(), cb = tb.c();
        Tensor out(ta.n(), ca + cb, ta.h(), ta.w());
        const size_t plane = static_cast<size_t>(ta.h()) * ta.w();
        for (int n = 0; n < ta.n(); ++n) {
            std::copy_n(ta.data() + n * ca * plane, ca * plane, out.data() + n * (ca + cb) * plane);
            std::copy_n(tb.data() + n * cb * plane, cb * plane,
                        out.data() + (n * (ca + cb) + ca) * plane);
        }
        Var o = push(std::move(out), needs(a) || needs(b));
        node(o).back = [a, b, ca, cb, plane](Tape& t, Node& n) {
            const int N = n.grad.n();
            if (t.needs(a)) {
                Tensor ga(N, ca, n.grad.h(), n.grad.w());
                for (int i = 0; i < N; ++i)
                    std::copy_n(n.grad.data() + i * (ca + cb) * plane, ca * plane,
                                ga.data() + i * ca * plane);
                t.accumulate_raw(a, ga);
            }
            if (t.needs(b)) {
                Tensor gb(N, cb, n.grad.h(), n.grad.w());
                for (int i = 0; i < N; ++i)
                    std::copy_n(n.grad.data() + (i * (ca + cb) + ca) * plane, cb * plane,
                                gb.data() + i * cb * plane);
                t.accumulate_raw(b, gb);
            }
        };
        return o;
    }

    // --- convolution ------------------------------------------------------

    Var conv2d(Var x, Var w, Var b, int stride = 1, int pad = 1) {
        const Tensor& tx = val(x);
        const Tensor& tw = val(w);
        const Tensor& tb = val(b);
        const int N = tx.n(), Cin = tx.c(), H = tx.h(), W = tx.w();
        const int Cout = tw.n(), kh = tw.h(), kw = tw.w();
        if (tw.c() != Cin)
            throw DimensionError("conv2d: input channels " + std::to_string(Cin) +
                                 " != kernel channels " + std::to_string(tw.c()));
        if (tb.numel() != static_cast<size_t>(Cout)) throw DimensionError("conv2d: bias size mismatch");
        const int Ho = (H + 2 * pad - kh) / stride + 1;
        const int Wo = (W + 2 * pad - kw) / stride + 1;
        if (Ho <= 0 || Wo <= 0) throw DimensionError("conv2d: kernel larger than padded input");

        const int K = Cin * kh * kw;
        const int M = Ho * Wo;
        Tensor out(N, Cout, Ho, Wo);
        std::vector<double> col(static_cast<size_t>(K) * M);
        ConstMatMap wm(tw.data(), Cout, K);
        for (int n = 0; n < N; ++n) {
            im2col(tx, n, kh, kw, stride, pad, Ho, Wo, col.data());
            ConstMatMap cm(col.data(), K, M);
            MatMap ym(out.data() + out.index(n, 0, 0, 0), Cout, M);
            ym.noalias() = wm * cm;
            for (int c = 0; c < Cout; ++c) ym.row(c).array() += tb[c];
        }

        Var o = push(std::move(out), needs(x) || needs(w) || needs(b));
        node(o).back = [x, w, b, stride, pad](Tape& t, Node& n) {
            const Tensor& tx = t.val(x);
            const Tensor& tw = t.val(w);
            const int N = tx.n(), Cin = tx.c(), H = tx.h(), W = tx.w();
            const int Cout = tw.n(), kh = tw.h(), kw = tw.w();
            const int Ho = n.grad.h(), Wo = n.grad.w();
            const int K = Cin * kh * kw;
            const int M = Ho * Wo;
            ConstMatMap wm(tw.data(), Cout, K);

            Tensor gw(Cout, Cin, kh, kw);
            Tensor gb(1, Cout, 1, 1);
            Tensor gx;
            if (t.needs(x)) gx = Tensor(N, Cin, H, W);
            MatMap gwm(gw.data(), Cout, K);
            std::vector<double> col(static_cast<size_t>(K) * M);
            std::vector<double> gcol(static_cast<size_t>(K) * M);
            for (int i = 0; i < N; ++i) {
                ConstMatMap gym(n.grad.data() + n.grad.index(i, 0, 0, 0), Cout, M);
                if (t.needs(w)) {
                    im2col(tx, i, kh, kw, stride, pad, Ho, Wo, col.data());
                    ConstMatMap cm(col.data(), K, M);
                    gwm.noalias() += gym * cm.transpose();
                }
                if (t.needs(b)) {
                    // fixed-order scalar sum: vectorized reductions change
                    // their summation order with buffer alignment, which
                    // breaks run-to-run bit reproducibility
                    const double* g = n.grad.data() + n.grad.index(i, 0, 0, 0);
                    for (int c = 0; c < Cout; ++c) {
                        double s = 0.0;
                        for (int m = 0; m < M; ++m) s += g[static_cast<size_t>(c) * M + m];
                        gb[c] += s;
                    }
                }
                if (t.needs(x)) {
                    MatMap gcm(gcol.data(), K, M);
                    gcm.noalias() = wm.transpose() * gym;
                    col2im_add(gx, i, kh, kw, stride, pad, Ho, Wo, gcol.data());
                }
            }
            if (t.needs(w)) t.accumulate_raw(w, gw);
            if (t.needs(b)) t.accumulate_raw(b, gb);
            if (t.needs(x)) t.accumulate_raw(x, gx);
        };
        return o;
    }

    // --- pooling / resampling ----------------------------------------------

    Var maxpool2(Var x) {
        const Tensor& tx = val(x);
        const int N = tx.n(), C = tx.c(), H = tx.h(), W = tx.w();
        if (H % 2 != 0 || W % 2 != 0)
            throw DimensionError("maxpool2: spatial dims must be even, got " + tx.shape_str());
        const int Ho = H / 2, Wo = W / 2;
        Tensor out(N, C, Ho, Wo);
        auto arg = std::make_shared<std::vector<int32_t>>(out.numel());
        size_t oi = 0;
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < Ho; ++i)
                    for (int j = 0; j < Wo; ++j, ++oi) {
                        const size_t base = tx.index(n, c, 2 * i, 2 * j);
                        size_t best = base;
                        double bv = tx[base];
                        const size_t cand[3] = {base + 1, base + W, base + W + 1};
                        for (size_t k : cand)
                            if (tx[k] > bv) {
                                bv = tx[k];
                                best = k;
                            }
                        out[oi] = bv;
                        (*arg)[oi] = static_cast<int32_t>(best - tx.index(n, c, 0, 0));
                    }
        Var o = push(std::move(out), needs(x));
        node(o).back = [x, arg](Tape& t, Node& n) {
            const Tensor& tx = t.val(x);
            Tensor gx(tx.n(), tx.c(), tx.h(), tx.w());
            const size_t plane_in = static_cast<size_t>(tx.h()) * tx.w();
            const size_t plane_out = static_cast<size_t>(n.grad.h()) * n.grad.w();
            size_t oi = 0;
            for (int nc = 0; nc < tx.n() * tx.c(); ++nc)
                for (size_t k = 0; k < plane_out; ++k, ++oi)
                    gx[nc * plane_in + (*arg)[oi]] += n.grad[oi];
            t.accumulate_raw(x, gx);
        };
        return o;
    }

    Var upsample_nearest2(Var x) {
        const Tensor& tx = val(x);
        const int N = tx.n(), C = tx.c(), H = tx.h(), W = tx.w();
        Tensor out(N, C, 2 * H, 2 * W);
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < 2 * H; ++i) {
                    const double* src = tx.data() + tx.index(n, c, i / 2, 0);
                    double* dst = out.data() + out.index(n, c, i, 0);
                    for (int j = 0; j < 2 * W; ++j) dst[j] = src[j / 2];
                }
        Var o = push(std::move(out), needs(x));
        node(o).back = [x](Tape& t, Node& n) {
            const Tensor& tx = t.val(x);
            Tensor gx(tx.n(), tx.c(), tx.h(), tx.w());
            for (int nn = 0; nn < tx.n(); ++nn)
                for (int c = 0; c < tx.c(); ++c)
                    for (int i = 0; i < n.grad.h(); ++i) {
                        const double* src = n.grad.data() + n.grad.index(nn, c, i, 0);
                        double* dst = gx.data() + gx.index(nn, c, i / 2, 0);
                        for (int j = 0; j < n.grad.w(); ++j) dst[j / 2] += src[j];
                    }
            t.accumulate_raw(x, gx);
        };
        return o;
    }

    Var global_avg_pool(Var x) {
        const Tensor& tx = val(x);
        const int N = tx.n(), C = tx.c();
        const size_t plane = static_cast<size_t>(tx.h()) * tx.w();
        Tensor out(N, C, 1, 1);
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const double* p = tx.data() + tx.index(n, c, 0, 0);
                double s = 0.0;
                for (size_t k = 0; k < plane; ++k) s += p[k];
                out.at(n, c, 0, 0) = s / static_cast<double>(plane);
            }
        Var o = push(std::move(out), needs(x));
        node(o).back = [x, plane](Tape& t, Node& n) {
            const Tensor& tx = t.val(x);
            Tensor gx(tx.n(), tx.c(), tx.h(), tx.w());
            for (int nn = 0; nn < tx.n(); ++nn)
                for (int c = 0; c < tx.c(); ++c) {
                    const double g = n.grad.at(nn, c, 0, 0) / static_cast<double>(plane);
                    double* p = gx.data() + gx.index(nn, c, 0, 0);
                    for (size_t k = 0; k < plane; ++k) p[k] = g;
                }
            t.accumulate_raw(x, gx);
        };
        return o;
    }

    // --- linear -------------------------------------------------------------

    // x viewed as (N, F); w is (O, F) stored (O, F, 1, 1); b is (1, O, 1, 1).
    Var linear(Var x, Var w, Var b) {
        const Tensor& tx = val(x);
        const Tensor& tw = val(w);
        const Tensor& tb = val(b);
        const int N = tx.n();
        const int F = static_cast<int>(tx.numel()) / std::max(1, N);
        const int O = tw.n();
        if (static_cast<int>(tw.numel()) != O * F)
            throw DimensionError("linear: weight " + tw.shape_str() + " incompatible with input " +
                                 tx.shape_str());
        if (tb.numel() != static_cast<size_t>(O)) throw DimensionError("linear: bias size mismatch");
        Tensor out(N, O, 1, 1);
        ConstMatMap xm(tx.data(), N, F);
        ConstMatMap wm(tw.data(), O, F);
        MatMap ym(out.data(), N, O);
        ym.noalias() = xm * wm.transpose();
        for (int n = 0; n < N; ++n)
            for (int o = 0; o < O; ++o) ym(n, o) += tb[o];
        Var o = push(std::move(out), needs(x) || needs(w) || needs(b));
        node(o).back = [x, w, b, N, F, O](Tape& t, Node& n) {
            ConstMatMap gym(n.grad.data(), N, O);
            if (t.needs(w)) {
                const Tensor& tx = t.val(x);
                ConstMatMap xm(tx.data(), N, F);
                Tensor gw(O, F, 1, 1);
                MatMap gwm(gw.data(), O, F);
                gwm.noalias() = gym.transpose() * xm;
                const Tensor& tw = t.val(w);
                t.accumulate_raw(w, gw.reshaped(tw.n(), tw.c(), tw.h(), tw.w()));
            }
            if (t.needs(b)) {
                Tensor gb(1, O, 1, 1);
                for (int i = 0; i < N; ++i)
                    for (int o = 0; o < O; ++o) gb[o] += gym(i, o);
                t.accumulate_raw(b, gb);
            }
            if (t.needs(x)) {
                const Tensor& tw = t.val(w);
                ConstMatMap wm(tw.data(), O, F);
                const Tensor& tx = t.val(x);
                Tensor gx(tx.n(), tx.c(), tx.h(), tx.w());
                MatMap gxm(gx.data(), N, F);
                gxm.noalias() = gym * wm;
                t.accumulate_raw(x, gx);
            }
        };
        return o;
    }

    // --- group norm ----------------------------------------------------------

    Var group_norm(Var x, Var gamma, Var beta, int groups, double eps = 1e-5) {
        const Tensor& tx = val(x);
        const int N = tx.n(), C = tx.c(), H = tx.h(), W = tx.w();
        if (groups < 1 || C % groups != 0)
            throw DimensionError("group_norm: channels " + std::to_string(C) +
                                 " not divisible by groups " + std::to_string(groups));
        const int cg = C / groups;
        const size_t m = static_cast<size_t>(cg) * H * W;
        Tensor out(N, C, H, W);
        auto stats = std::make_shared<std::vector<double>>(static_cast<size_t>(N) * groups * 2);
        const Tensor& tg = val(gamma);
        const Tensor& tb = val(beta);
        for (int n = 0; n < N; ++n)
            for (int g = 0; g < groups; ++g) {
                const double* p = tx.data() + tx.index(n, g * cg, 0, 0);
                double mean = 0.0;
                for (size_t k = 0; k < m; ++k) mean += p[k];
                mean /= static_cast<double>(m);
                double var = 0.0;
                for (size_t k = 0; k < m; ++k) {
                    const double d = p[k] - mean;
                    var += d * d;
                }
                var /= static_cast<double>(m);
                const double inv = 1.0 / std::sqrt(var + eps);
                (*stats)[(n * groups + g) * 2] = mean;
                (*stats)[(n * groups + g) * 2 + 1] = inv;
                double* q = out.data() + out.index(n, g * cg, 0, 0);
                const size_t plane = static_cast<size_t>(H) * W;
                for (int cc = 0; cc < cg; ++cc) {
                    const int c = g * cg + cc;
                    const double a = tg[c] * inv;
                    const double b2 = tb[c] - a * mean;
                    for (size_t k = 0; k < plane; ++k) q[cc * plane + k] = a * p[cc * plane + k] + b2;
                }
            }
        Var o = push(std::move(out), needs(x) || needs(gamma) || needs(beta));
        node(o).back = [x, gamma, beta, groups, stats](Tape& t, Node& n) {
            const Tensor& tx = t.val(x);
            const Tensor& tg = t.val(gamma);
            const int N = tx.n(), C = tx.c(), H = tx.h(), W = tx.w();
            const int cg = C / groups;
            const size_t m = static_cast<size_t>(cg) * H * W;
            const size_t plane = static_cast<size_t>(H) * W;
            Tensor gx, ggamma(1, C, 1, 1), gbeta(1, C, 1, 1);
            if (t.needs(x)) gx = Tensor(N, C, H, W);
            for (int nn = 0; nn < N; ++nn)
                for (int g = 0; g < groups; ++g) {
                    const double mean = (*stats)[(nn * groups + g) * 2];
                    const double inv = (*stats)[(nn * groups + g) * 2 + 1];
                    const double* p = tx.data() + tx.index(nn, g * cg, 0, 0);
                    const double* gy = n.grad.data() + n.grad.index(nn, g * cg, 0, 0);
                    // s1 = sum(dxhat), s2 = sum(dxhat * xhat) over the group
                    double s1 = 0.0, s2 = 0.0;
                    for (int cc = 0; cc < cg; ++cc) {
                        const int c = g * cg + cc;
                        for (size_t k = 0; k < plane; ++k) {
                            const double xh = (p[cc * plane + k] - mean) * inv;
                            const double dy = gy[cc * plane + k];
                            ggamma[c] += dy * xh;
                            gbeta[c] += dy;
                            s1 += dy * tg[c];
                            s2 += dy * tg[c] * xh;
                        }
                    }
                    if (t.needs(x)) {
                        double* q = gx.data() + gx.index(nn, g * cg, 0, 0);
                        const double im = 1.0 / static_cast<double>(m);
                        for (int cc = 0; cc < cg; ++cc) {
                            const int c = g * cg + cc;
                            for (size_t k = 0; k < plane; ++k) {
                                const double xh = (p[cc * plane + k] - mean) * inv;
                                const double dxh = gy[cc * plane + k] * tg[c];
                                q[cc * plane + k] = inv * (dxh - im * (s1 + xh * s2));
                            }
                        }
                    }
                }
            if (t.needs(gamma)) t.accumulate_raw(gamma, ggamma);
            if (t.needs(beta)) t.accumulate_raw(beta, gbeta);
            if (t.needs(x)) t.accumulate_raw(x, gx);
        };
        return o;
    }

    // Scalar projection sum_i a_i * r_i. Used to pick out a single logit
    // (one-hot r) and to reduce arbitrary outputs for gradient probes.
    Var inner(Var a, Tensor r) {
        const Tensor& ta = val(a);
        if (ta.numel() != r.numel())
            throw DimensionError("inner: " + ta.shape_str() + " vs " + r.shape_str());
        double s = 0.0;
        for (size_t i = 0; i < ta.numel(); ++i) s += ta[i] * r[i];
        Var o = push(Tensor::scalar(s), needs(a));
        node(o).back = [a, r = std::move(r)](Tape& t, Node& n) {
            t.accumulate(a, r, n.grad.item());
        };
        return o;
    }

    // --- losses -------------------------------------------------------------

    // Mean softmax cross-entropy over the batch; logits (N, K, 1, 1),
    // labels[i] in [0, K).
    Var softmax_cross_entropy(Var logits, std::vector<int> labels) {
        const Tensor& tl = val(logits);
        const int N = tl.n();
        const int K = static_cast<int>(tl.numel()) / std::max(1, N);
        if (static_cast<int>(labels.size()) != N)
            throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                 " labels for batch " + std::to_string(N));
        auto probs = std::make_shared<Tensor>(N, K, 1, 1);
        double loss = 0.0;
        for (int n = 0; n < N; ++n) {
            const double* l = tl.data() + static_cast<size_t>(n) * K;
            double mx = l[0];
            for (int k = 1; k < K; ++k) mx = std::max(mx, l[k]);
            double z = 0.0;
            for (int k = 0; k < K; ++k) z += std::exp(l[k] - mx);
            const double logz = std::log(z) + mx;
            for (int k = 0; k < K; ++k) (*probs)[n * K + k] = std::exp(l[k] - logz);
            loss -= l[labels[n]] - logz;
        }
        loss /= static_cast<double>(N);
        Var o = push(Tensor::scalar(loss), needs(logits));
        node(o).back = [logits, labels = std::move(labels), probs, N, K](Tape& t, Node& n) {
            const double g = n.grad.item() / static_cast<double>(N);
            Tensor gl(N, K, 1, 1);
            for (int i = 0; i < N; ++i)
                for (int k = 0; k < K; ++k)
                    gl[i * K + k] = g * ((*probs)[i * K + k] - (k == labels[i] ? 1.0 : 0.0));
            t.accumulate_raw(logits, gl);
        };
        return o;
    }

    // Channel-decorrelation penalty. Per sample, channel vectors are the
    // flattened spatial values; the Gram matrix (normalised by spatial size)
    // is softmax-normalised per row at temperature tau and the negative mean
    // log-diagonal is averaged over the batch.
    Var decorrelation(Var z, double tau) {
        const Tensor& tz = val(z);
        const int N = tz.n(), C = tz.c();
        if (C < 2) throw ConfigError("decorrelation: needs at least 2 feature channels, got " +
                                     std::to_string(C));
        const int S = tz.h() * tz.w();
        auto soft = std::make_shared<std::vector<double>>(static_cast<size_t>(N) * C * C);
        double loss = 0.0;
        std::vector<double> gram(static_cast<size_t>(C) * C);
        for (int n = 0; n < N; ++n) {
            ConstMatMap vm(tz.data() + tz.index(n, 0, 0, 0), C, S);
            MatMap gm(gram.data(), C, C);
            gm.noalias() = vm * vm.transpose() / static_cast<double>(S);
            double* a = soft->data() + static_cast<size_t>(n) * C * C;
            for (int i = 0; i < C; ++i) {
                double mx = gram[i * C];
                for (int j = 1; j < C; ++j) mx = std::max(mx, gram[i * C + j]);
                double zsum = 0.0;
                for (int j = 0; j < C; ++j) zsum += std::exp((gram[i * C + j] - mx) / tau);
                const double logz = std::log(zsum) + mx / tau;
                for (int j = 0; j < C; ++j) a[i * C + j] = std::exp(gram[i * C + j] / tau - logz);
                loss -= gram[i * C + i] / tau - logz;
            }
        }
        loss /= static_cast<double>(N) * C;
        Var o = push(Tensor::scalar(loss), needs(z));
        node(o).back = [z, tau, soft, N, C, S](Tape& t, Node& n) {
            const Tensor& tz = t.val(z);
            const double gscale = n.grad.item() / (static_cast<double>(N) * C);
            Tensor gz(N, C, tz.h(), tz.w());
            std::vector<double> d(static_cast<size_t>(C) * C);
            for (int nn = 0; nn < N; ++nn) {
                const double* a = soft->data() + static_cast<size_t>(nn) * C * C;
                // dL/dGram = (D + D^T) applied through V V^T / S, where
                // D_ij = (A_ij - I_ij) / tau  (per-row softmax gradient).
                for (int i = 0; i < C; ++i)
                    for (int j = 0; j < C; ++j)
                        d[i * C + j] = (a[i * C + j] - (i == j ? 1.0 : 0.0)) / tau;
                ConstMatMap dm(d.data(), C, C);
                ConstMatMap vm(tz.data() + tz.index(nn, 0, 0, 0), C, S);
                MatMap gm(gz.data() + gz.index(nn, 0, 0, 0), C, S);
                gm.noalias() = (dm + dm.transpose()) * vm * (gscale / static_cast<double>(S));
            }
            t.accumulate_raw(z, gz);
        };
        return o;
    }

    // --- engine ---------------------------------------------------------------

    void backward(Var loss) {
        Node& ln = node(loss);
        if (ln.val.numel() != 1) throw DimensionError("backward: loss must be scalar");
        ensure_grad(loss.id);
        ln.grad[0] = 1.0;
        for (int i = loss.id; i >= 0; --i) {
            Node& n = nodes_[i];
            if (!n.need || !n.has_grad) continue;
            if (n.back) n.back(*this, n);
            if (n.param) {
                for (size_t k = 0; k < n.grad.numel(); ++k) n.param->grad[k] += n.grad[k];
            }
        }
    }

    const Tensor& val(Var v) const { return nodes_[v.id].val; }

    const Tensor& grad(Var v) const {
        const Node& n = nodes_[v.id];
        if (!n.has_grad) {
            static const Tensor empty;
            return empty;
        }
        return n.grad;
    }

    bool needs(Var v) const { return nodes_[v.id].need; }

    size_t size() const { return nodes_.size(); }

private:
    Node& node(Var v) { return nodes_[v.id]; }

    Var push(Tensor v, bool need) {
        Node n;
        n.val = std::move(v);
        n.need = need;
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    void ensure_grad(int id) {
        Node& n = nodes_[id];
        if (!n.has_grad) {
            n.grad = Tensor(n.val.n(), n.val.c(), n.val.h(), n.val.w());
            n.has_grad = true;
        }
    }

    void accumulate(Var v, const Tensor& g, double s) {
        if (!needs(v)) return;
        ensure_grad(v.id);
        Tensor& dst = nodes_[v.id].grad;
        for (size_t i = 0; i < dst.numel(); ++i) dst[i] += s * g[i];
    }

    void accumulate_raw(Var v, const Tensor& g) { accumulate(v, g, 1.0); }

    static void require_same(const Tensor& a, const Tensor& b, const char* op) {
        if (!a.same_shape(b))
            throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                                 b.shape_str());
    }

    static void im2col(const Tensor& x, int n, int kh, int kw, int stride, int pad, int Ho, int Wo,
                       double* col) {
        const int Cin = x.c(), H = x.h(), W = x.w();
        const int M = Ho * Wo;
        size_t r = 0;
        for (int c = 0; c < Cin; ++c) {
            const double* plane = x.data() + x.index(n, c, 0, 0);
            for (int di = 0; di < kh; ++di)
                for (int dj = 0; dj < kw; ++dj, ++r) {
                    double* row = col + r * M;
                    for (int oi = 0; oi < Ho; ++oi) {
                        const int ii = oi * stride + di - pad;
                        double* dst = row + oi * Wo;
                        if (ii < 0 || ii >= H) {
                            std::fill_n(dst, Wo, 0.0);
                            continue;
                        }
                        const double* src = plane + static_cast<size_t>(ii) * W;
                        for (int oj = 0; oj < Wo; ++oj) {
                            const int jj = oj * stride + dj - pad;
                            dst[oj] = (jj < 0 || jj >= W) ? 0.0 : src[jj];
                        }
                    }
                }
        }
    }

    static void col2im_add(Tensor& gx, int n, int kh, int kw, int stride, int pad, int Ho, int Wo,
                           const double* col) {
        const int Cin = gx.c(), H = gx.h(), W = gx.w();
        const int M = Ho * Wo;
        size_t r = 0;
        for (int c = 0; c < Cin; ++c) {
            double* plane = gx.data() + gx.index(n, c, 0, 0);
            for (int di = 0; di < kh; ++di)
                for (int dj = 0; dj < kw; ++dj, ++r) {
                    const double* row = col + r * M;
                    for (int oi = 0; oi < Ho; ++oi) {
                        const int ii = oi * stride + di - pad;
                        if (ii < 0 || ii >= H) continue;
                        double* dst = plane + static_cast<size_t>(ii) * W;
                        for (int oj = 0; oj < Wo; ++oj) {
                            const int jj = oj * stride + dj - pad;
                            if (jj >= 0 && jj < W) dst[jj] += row[oi * Wo + oj];
                        }
                    }
                }
        }
    }

    std::vector<Node> nodes_;
};

// Adam with optional cosine learning-rate decay, applied by the owning
// training loop. Step count is 1-based for bias correction.
class Adam {
public:
    explicit Adam(std::vector<Param*> params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (Param* p : params_) {
            if (p->adam_m.numel() != p->value.numel()) {
                p->adam_m = Tensor(p->value.n(), p->value.c(), p->value.h(), p->value.w());
                p->adam_v = Tensor(p->value.n(), p->value.c(), p->value.h(), p->value.w());
            }
        }
    }

    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (Param* p : params_) {
            for (size_t i = 0; i < p->value.numel(); ++i) {
                const double g = p->grad[i];
                p->adam_m[i] = beta1_ * p->adam_m[i] + (1.0 - beta1_) * g;
                p->adam_v[i] = beta2_ * p->adam_v[i] + (1.0 - beta2_) * g * g;
                const double mhat = p->adam_m[i] / bc1;
                const double vhat = p->adam_v[i] / bc2;
                p->value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    void zero_grad() {
        for (Param* p : params_) p->zero_grad();
    }

private:
    std::vector<Param*> params_;
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

inline double cosine_lr(double lr_start, double lr_end, int step, int total_steps) {
    if (total_steps <= 1) return lr_start;
    const double u = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(std::numbers::pi * u));
}

// Kaiming-uniform initialisation, fan-in mode with rectifier gain sqrt(2):
// bound = sqrt(6 / fan_in).
inline void kaiming_uniform(Tensor& w, int fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
}

}  // namespace taprec
