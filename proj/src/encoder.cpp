#include "cueing/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "cueing/nn_ops.hpp"

namespace cueing::nn {

template <typename T>
TensorT<T> adaptive_avg_pool(const TensorT<T>& x, int p, int q) {
    if (x.ndim() != 3) throw std::invalid_argument("adaptive_avg_pool: expected [N,H,W]");
    const int n = x.dim(0), h = x.dim(1), w = x.dim(2);
    TensorT<T> y({n, p, q});
    for (int in = 0; in < n; ++in) {
        const T* src = x.data.data() + static_cast<size_t>(in) * h * w;
        T* dst = y.data.data() + static_cast<size_t>(in) * p * q;
        for (int i = 0; i < p; ++i) {
            int y0 = (i * h) / p;
            int y1 = ((i + 1) * h + p - 1) / p;
            for (int j = 0; j < q; ++j) {
                int x0 = (j * w) / q;
                int x1 = ((j + 1) * w + q - 1) / q;
                T acc = T(0);
                for (int yy = y0; yy < y1; ++yy)
                    for (int xx = x0; xx < x1; ++xx) acc += src[static_cast<size_t>(yy) * w + xx];
                dst[static_cast<size_t>(i) * q + j] = acc / static_cast<T>((y1 - y0) * (x1 - x0));
            }
        }
    }
    return y;
}

template <typename T>
TensorT<T> adaptive_avg_pool_backward(const std::vector<int>& x_shape, int p, int q,
                                      const TensorT<T>& gy) {
    const int n = x_shape[0], h = x_shape[1], w = x_shape[2];
    TensorT<T> gx(x_shape);
    for (int in = 0; in < n; ++in) {
        T* dst = gx.data.data() + static_cast<size_t>(in) * h * w;
        const T* src = gy.data.data() + static_cast<size_t>(in) * p * q;
        for (int i = 0; i < p; ++i) {
            int y0 = (i * h) / p;
            int y1 = ((i + 1) * h + p - 1) / p;
            for (int j = 0; j < q; ++j) {
                int x0 = (j * w) / q;
                int x1 = ((j + 1) * w + q - 1) / q;
                T g = src[static_cast<size_t>(i) * q + j] / static_cast<T>((y1 - y0) * (x1 - x0));
                for (int yy = y0; yy < y1; ++yy)
                    for (int xx = x0; xx < x1; ++xx) dst[static_cast<size_t>(yy) * w + xx] += g;
            }
        }
    }
    return gx;
}

template <typename T>
TensorT<T> channel_mean(const TensorT<T>& v) {
    if (v.ndim() != 4) throw std::invalid_argument("channel_mean: expected [N,C,H,W]");
    const int n = v.dim(0), c = v.dim(1);
    const size_t plane = static_cast<size_t>(v.dim(2)) * v.dim(3);
    TensorT<T> y({n, v.dim(2), v.dim(3)});
    for (int in = 0; in < n; ++in) {
        T* dst = y.data.data() + in * plane;
        for (int ic = 0; ic < c; ++ic) {
            const T* src = v.data.data() + (static_cast<size_t>(in) * c + ic) * plane;
            for (size_t i = 0; i < plane; ++i) dst[i] += src[i];
        }
        for (size_t i = 0; i < plane; ++i) dst[i] /= static_cast<T>(c);
    }
    return y;
}

template <typename T>
TensorT<T> channel_mean_backward(const std::vector<int>& v_shape, const TensorT<T>& gy) {
    const int n = v_shape[0], c = v_shape[1];
    const size_t plane = static_cast<size_t>(v_shape[2]) * v_shape[3];
    TensorT<T> gv(v_shape);
    const T scale = T(1) / static_cast<T>(c);
    for (int in = 0; in < n; ++in) {
        const T* src = gy.data.data() + in * plane;
        for (int ic = 0; ic < c; ++ic) {
            T* dst = gv.data.data() + (static_cast<size_t>(in) * c + ic) * plane;
            for (size_t i = 0; i < plane; ++i) dst[i] = src[i] * scale;
        }
    }
    return gv;
}

// ---- channel attention ---------------------------------------------------------

template <typename T>
ChannelAttentionT<T> ChannelAttentionT<T>::create(RegistryT<T>& reg, const std::string& prefix,
                                                  int channels, int reduction, bool plain) {
    ChannelAttentionT<T> m;
    m.channels = channels;
    m.plain = plain;
    if (plain) {
        m.gate = &reg.add(prefix + ".gate", {channels});
    } else {
        if (channels % reduction != 0)
            throw std::invalid_argument("channel attention: reduction must divide channels");
        m.reduced = channels / reduction;
        m.fc1_w = &reg.add(prefix + ".fc1.weight", {m.reduced, channels});
        m.fc1_b = &reg.add(prefix + ".fc1.bias", {m.reduced});
        m.fc2_w = &reg.add(prefix + ".fc2.weight", {channels, m.reduced});
        m.fc2_b = &reg.add(prefix + ".fc2.bias", {channels});
    }
    return m;
}

template <typename T>
TensorT<T> ChannelAttentionT<T>::forward(const TensorT<T>& v, Cache* cache) const {
    if (v.ndim() != 4) throw std::invalid_argument("channel attention: expected [N,C,H,W]");
    const int n = v.dim(0), c = v.dim(1);
    if (c != channels) throw std::invalid_argument("channel attention: channel mismatch");
    const size_t plane = static_cast<size_t>(v.dim(2)) * v.dim(3);

    Cache local;
    Cache& cc = cache ? *cache : local;
    cc.v = v;
    cc.w = TensorT<T>({n, c});

    if (plain) {
        for (int in = 0; in < n; ++in)
            for (int ic = 0; ic < c; ++ic)
                cc.w.at2(in, ic) = sigmoid_scalar(gate->value.data[ic]);
    } else {
        cc.avg = TensorT<T>({n, c});
        cc.mx = TensorT<T>({n, c});
        cc.argmax.assign(static_cast<size_t>(n) * c, 0);
        for (int in = 0; in < n; ++in) {
            for (int ic = 0; ic < c; ++ic) {
                const T* src = v.data.data() + (static_cast<size_t>(in) * c + ic) * plane;
                T sum = T(0), best = src[0];
                size_t bi = 0;
                for (size_t i = 0; i < plane; ++i) {
                    sum += src[i];
                    if (src[i] > best) {
                        best = src[i];
                        bi = i;
                    }
                }
                cc.avg.at2(in, ic) = sum / static_cast<T>(plane);
                cc.mx.at2(in, ic) = best;
                cc.argmax[static_cast<size_t>(in) * c + ic] = bi;
            }
        }
        cc.a1pre = linear(cc.avg, fc1_w->value, fc1_b->value);
        cc.a1 = relu(cc.a1pre);
        cc.a2 = linear(cc.a1, fc2_w->value, fc2_b->value);
        cc.m1pre = linear(cc.mx, fc1_w->value, fc1_b->value);
        cc.m1 = relu(cc.m1pre);
        cc.m2 = linear(cc.m1, fc2_w->value, fc2_b->value);
        for (int in = 0; in < n; ++in)
            for (int ic = 0; ic < c; ++ic)
                cc.w.at2(in, ic) = sigmoid_scalar(cc.a2.at2(in, ic) + cc.m2.at2(in, ic));
    }

    TensorT<T> out(v.shape);
    for (int in = 0; in < n; ++in) {
        for (int ic = 0; ic < c; ++ic) {
            const T wv = cc.w.at2(in, ic);
            const T* src = v.data.data() + (static_cast<size_t>(in) * c + ic) * plane;
            T* dst = out.data.data() + (static_cast<size_t>(in) * c + ic) * plane;
            for (size_t i = 0; i < plane; ++i) dst[i] = src[i] * wv;
        }
    }
    return out;
}

template <typename T>
TensorT<T> ChannelAttentionT<T>::backward(const Cache& cc, const TensorT<T>& g_weighted) const {
    const int n = cc.v.dim(0), c = cc.v.dim(1);
    const size_t plane = static_cast<size_t>(cc.v.dim(2)) * cc.v.dim(3);

    TensorT<T> gv(cc.v.shape);
    TensorT<T> gw({n, c});
    for (int in = 0; in < n; ++in) {
        for (int ic = 0; ic < c; ++ic) {
            const T wv = cc.w.at2(in, ic);
            const size_t off = (static_cast<size_t>(in) * c + ic) * plane;
            T acc = T(0);
            for (size_t i = 0; i < plane; ++i) {
                acc += g_weighted.data[off + i] * cc.v.data[off + i];
                gv.data[off + i] = g_weighted.data[off + i] * wv;
            }
            gw.at2(in, ic) = acc;
        }
    }

    // Through the sigmoid gate.
    TensorT<T> gz({n, c});
    for (size_t i = 0; i < gz.numel(); ++i)
        gz.data[i] = gw.data[i] * cc.w.data[i] * (T(1) - cc.w.data[i]);

    if (plain) {
        for (int in = 0; in < n; ++in)
            for (int ic = 0; ic < c; ++ic) gate->grad.data[ic] += gz.at2(in, ic);
        return gv;
    }

    auto add_into = [](TensorT<T>& dst, const TensorT<T>& src) {
        for (size_t i = 0; i < dst.numel(); ++i) dst.data[i] += src.data[i];
    };

    // Avg-pool path.
    TensorT<T> ga1, gw2, gb2, ga1pre, gavg, gw1, gb1;
    linear_backward(cc.a1, fc2_w->value, gz, &ga1, &gw2, &gb2);
    add_into(fc2_w->grad, gw2);
    add_into(fc2_b->grad, gb2);
    ga1pre = relu_backward(cc.a1pre, ga1);
    linear_backward(cc.avg, fc1_w->value, ga1pre, &gavg, &gw1, &gb1);
    add_into(fc1_w->grad, gw1);
    add_into(fc1_b->grad, gb1);

    // Max-pool path (shared MLP).
    TensorT<T> gm1, gm1pre, gmx;
    linear_backward(cc.m1, fc2_w->value, gz, &gm1, &gw2, &gb2);
    add_into(fc2_w->grad, gw2);
    add_into(fc2_b->grad, gb2);
    gm1pre = relu_backward(cc.m1pre, gm1);
    linear_backward(cc.mx, fc1_w->value, gm1pre, &gmx, &gw1, &gb1);
    add_into(fc1_w->grad, gw1);
    add_into(fc1_b->grad, gb1);

    // Pooling backward: avg spreads evenly, max routes to the argmax.
    const T inv_plane = T(1) / static_cast<T>(plane);
    for (int in = 0; in < n; ++in) {
        for (int ic = 0; ic < c; ++ic) {
            const size_t off = (static_cast<size_t>(in) * c + ic) * plane;
            const T ga = gavg.at2(in, ic) * inv_plane;
            for (size_t i = 0; i < plane; ++i) gv.data[off + i] += ga;
            gv.data[off + cc.argmax[static_cast<size_t>(in) * c + ic]] += gmx.at2(in, ic);
        }
    }
    return gv;
}

// ---- transformer encoder layer ---------------------------------------------------

template <typename T>
EncoderLayerT<T> EncoderLayerT<T>::create(RegistryT<T>& reg, const std::string& prefix, int d,
                                          int heads, int ffn, bool symmetric_qk) {
    if (heads < 1 || d % heads != 0)
        throw std::invalid_argument("encoder: embed dim " + std::to_string(d) +
                                    " not divisible by heads " + std::to_string(heads));
    EncoderLayerT<T> m;
    m.d = d;
    m.heads = heads;
    m.ffn = ffn;
    m.symmetric_qk = symmetric_qk;
    m.ln1_g = &reg.add(prefix + ".ln1.gain", {d});
    m.ln1_b = &reg.add(prefix + ".ln1.bias", {d});
    m.wq = &reg.add(prefix + ".attn.q.weight", {d, d});
    m.bq = &reg.add(prefix + ".attn.q.bias", {d});
    if (!symmetric_qk) {
        m.wk = &reg.add(prefix + ".attn.k.weight", {d, d});
        m.bk = &reg.add(prefix + ".attn.k.bias", {d});
    }
    m.wv = &reg.add(prefix + ".attn.v.weight", {d, d});
    m.bv = &reg.add(prefix + ".attn.v.bias", {d});
    m.wo = &reg.add(prefix + ".attn.out.weight", {d, d});
    m.bo = &reg.add(prefix + ".attn.out.bias", {d});
    m.ln2_g = &reg.add(prefix + ".ln2.gain", {d});
    m.ln2_b = &reg.add(prefix + ".ln2.bias", {d});
    m.fc1_w = &reg.add(prefix + ".ffn.fc1.weight", {ffn, d});
    m.fc1_b = &reg.add(prefix + ".ffn.fc1.bias", {ffn});
    m.fc2_w = &reg.add(prefix + ".ffn.fc2.weight", {d, ffn});
    m.fc2_b = &reg.add(prefix + ".ffn.fc2.bias", {d});
    return m;
}

template <typename T>
TensorT<T> EncoderLayerT<T>::forward(const TensorT<T>& x, Cache* cache) const {
    if (x.ndim() != 2 || x.dim(1) != d)
        throw std::invalid_argument("encoder: expected [T," + std::to_string(d) + "], got " +
                                    x.shape_str());
    const int t = x.dim(0);
    const int dh = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    Cache local;
    Cache& cc = cache ? *cache : local;
    cc.x = x;
    cc.n1 = layer_norm(x, ln1_g->value, ln1_b->value);
    cc.q = linear(cc.n1, wq->value, bq->value);
    cc.k = symmetric_qk ? cc.q : linear(cc.n1, wk->value, bk->value);
    cc.v = linear(cc.n1, wv->value, bv->value);

    TensorT<T> scores({heads, t, t});
    for (int hh = 0; hh < heads; ++hh) {
        T* s = scores.data.data() + static_cast<size_t>(hh) * t * t;
        for (int i = 0; i < t; ++i) {
            const T* qi = cc.q.data.data() + static_cast<size_t>(i) * d + hh * dh;
            for (int j = 0; j < t; ++j) {
                const T* kj = cc.k.data.data() + static_cast<size_t>(j) * d + hh * dh;
                T acc = T(0);
                for (int e = 0; e < dh; ++e) acc += qi[e] * kj[e];
                s[static_cast<size_t>(i) * t + j] = acc * scale;
            }
        }
    }
    cc.attn = softmax(scores, 2);

    cc.ctx = TensorT<T>({t, d});
    for (int hh = 0; hh < heads; ++hh) {
        const T* a = cc.attn.data.data() + static_cast<size_t>(hh) * t * t;
        for (int i = 0; i < t; ++i) {
            T* out = cc.ctx.data.data() + static_cast<size_t>(i) * d + hh * dh;
            const T* arow = a + static_cast<size_t>(i) * t;
            for (int j = 0; j < t; ++j) {
                const T aij = arow[j];
                const T* vj = cc.v.data.data() + static_cast<size_t>(j) * d + hh * dh;
                for (int e = 0; e < dh; ++e) out[e] += aij * vj[e];
            }
        }
    }

    TensorT<T> attn_out = linear(cc.ctx, wo->value, bo->value);
    cc.x2 = x;
    for (size_t i = 0; i < cc.x2.numel(); ++i) cc.x2.data[i] += attn_out.data[i];

    cc.n2 = layer_norm(cc.x2, ln2_g->value, ln2_b->value);
    cc.f1pre = linear(cc.n2, fc1_w->value, fc1_b->value);
    cc.f1 = relu(cc.f1pre);
    TensorT<T> f2 = linear(cc.f1, fc2_w->value, fc2_b->value);

    TensorT<T> y = cc.x2;
    for (size_t i = 0; i < y.numel(); ++i) y.data[i] += f2.data[i];
    return y;
}

template <typename T>
TensorT<T> EncoderLayerT<T>::backward(const Cache& cc, const TensorT<T>& gy) const {
    const int t = cc.x.dim(0);
    const int dh = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    auto add_into = [](TensorT<T>& dst, const TensorT<T>& src) {
        for (size_t i = 0; i < dst.numel(); ++i) dst.data[i] += src.data[i];
    };

    // y = x2 + f2
    TensorT<T> gx2 = gy;
    TensorT<T> gf1, gwl, gbl, gf1pre, gn2;
    linear_backward(cc.f1, fc2_w->value, gy, &gf1, &gwl, &gbl);
    add_into(fc2_w->grad, gwl);
    add_into(fc2_b->grad, gbl);
    gf1pre = relu_backward(cc.f1pre, gf1);
    linear_backward(cc.n2, fc1_w->value, gf1pre, &gn2, &gwl, &gbl);
    add_into(fc1_w->grad, gwl);
    add_into(fc1_b->grad, gbl);

    TensorT<T> gx2_ln, ggain, gbias;
    layer_norm_backward(cc.x2, ln2_g->value, gn2, &gx2_ln, &ggain, &gbias);
    add_into(ln2_g->grad, ggain);
    add_into(ln2_b->grad, gbias);
    add_into(gx2, gx2_ln);

    // x2 = x + linear(ctx, wo, bo)
    TensorT<T> gx = gx2;
    TensorT<T> gctx;
    linear_backward(cc.ctx, wo->value, gx2, &gctx, &gwl, &gbl);
    add_into(wo->grad, gwl);
    add_into(bo->grad, gbl);

    // ctx per head: ctx_h = attn_h * v_h
    TensorT<T> gattn({heads, t, t});
    TensorT<T> gv({t, d});
    for (int hh = 0; hh < heads; ++hh) {
        const T* a = cc.attn.data.data() + static_cast<size_t>(hh) * t * t;
        T* ga = gattn.data.data() + static_cast<size_t>(hh) * t * t;
        for (int i = 0; i < t; ++i) {
            const T* gc = gctx.data.data() + static_cast<size_t>(i) * d + hh * dh;
            for (int j = 0; j < t; ++j) {
                const T* vj = cc.v.data.data() + static_cast<size_t>(j) * d + hh * dh;
                T acc = T(0);
                for (int e = 0; e < dh; ++e) acc += gc[e] * vj[e];
                ga[static_cast<size_t>(i) * t + j] = acc;
                T* gvj = gv.data.data() + static_cast<size_t>(j) * d + hh * dh;
                const T aij = a[static_cast<size_t>(i) * t + j];
                for (int e = 0; e < dh; ++e) gvj[e] += aij * gc[e];
            }
        }
    }

    TensorT<T> gscores = softmax_backward(cc.attn, gattn, 2);

    // scores_h = q_h k_h^T * scale
    TensorT<T> gq({t, d}), gk({t, d});
    for (int hh = 0; hh < heads; ++hh) {
        const T* gs = gscores.data.data() + static_cast<size_t>(hh) * t * t;
        for (int i = 0; i < t; ++i) {
            T* gqi = gq.data.data() + static_cast<size_t>(i) * d + hh * dh;
            for (int j = 0; j < t; ++j) {
                const T g = gs[static_cast<size_t>(i) * t + j] * scale;
                const T* kj = cc.k.data.data() + static_cast<size_t>(j) * d + hh * dh;
                const T* qi = cc.q.data.data() + static_cast<size_t>(i) * d + hh * dh;
                T* gkj = gk.data.data() + static_cast<size_t>(j) * d + hh * dh;
                for (int e = 0; e < dh; ++e) {
                    gqi[e] += g * kj[e];
                    gkj[e] += g * qi[e];
                }
            }
        }
    }

    TensorT<T> gn1 = TensorT<T>::zeros({t, d});
    TensorT<T> gn1_part;
    linear_backward(cc.n1, wv->value, gv, &gn1_part, &gwl, &gbl);
    add_into(wv->grad, gwl);
    add_into(bv->grad, gbl);
    add_into(gn1, gn1_part);

    if (symmetric_qk) {
        // k shares the q projection: both paths feed the same weights.
        add_into(gq, gk);
        linear_backward(cc.n1, wq->value, gq, &gn1_part, &gwl, &gbl);
        add_into(wq->grad, gwl);
        add_into(bq->grad, gbl);
        add_into(gn1, gn1_part);
    } else {
        linear_backward(cc.n1, wq->value, gq, &gn1_part, &gwl, &gbl);
        add_into(wq->grad, gwl);
        add_into(bq->grad, gbl);
        add_into(gn1, gn1_part);
        linear_backward(cc.n1, wk->value, gk, &gn1_part, &gwl, &gbl);
        add_into(wk->grad, gwl);
        add_into(bk->grad, gbl);
        add_into(gn1, gn1_part);
    }

    TensorT<T> gx_ln;
    layer_norm_backward(cc.x, ln1_g->value, gn1, &gx_ln, &ggain, &gbias);
    add_into(ln1_g->grad, ggain);
    add_into(ln1_b->grad, gbias);
    add_into(gx, gx_ln);
    return gx;
}

#define CUEING_INSTANTIATE(T)                                                                  \
    template TensorT<T> adaptive_avg_pool(const TensorT<T>&, int, int);                        \
    template TensorT<T> adaptive_avg_pool_backward(const std::vector<int>&, int, int,          \
                                                   const TensorT<T>&);                         \
    template TensorT<T> channel_mean(const TensorT<T>&);                                       \
    template TensorT<T> channel_mean_backward(const std::vector<int>&, const TensorT<T>&);     \
    template struct ChannelAttentionT<T>;                                                      \
    template struct EncoderLayerT<T>;

CUEING_INSTANTIATE(float)
CUEING_INSTANTIATE(double)
#undef CUEING_INSTANTIATE

}  // namespace cueing::nn
