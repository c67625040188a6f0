#include "cueing/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cueing::nn {

int conv_out_extent(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, int stride,
                  int pad) {
    if (x.ndim() != 4 || w.ndim() != 4)
        throw std::invalid_argument("conv2d: expected 4-d input and weight");
    const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int cout = w.dim(0), k = w.dim(2);
    if (w.dim(1) != cin)
        throw std::invalid_argument("conv2d: weight channels " + std::to_string(w.dim(1)) +
                                    " do not match input channels " + std::to_string(cin));
    if (w.dim(3) != k) throw std::invalid_argument("conv2d: kernel must be square");
    if (static_cast<int>(b.numel()) != cout)
        throw std::invalid_argument("conv2d: bias extent mismatch");
    const int ho = conv_out_extent(h, k, stride, pad);
    const int wo = conv_out_extent(wd, k, stride, pad);
    if (ho < 1 || wo < 1) throw std::invalid_argument("conv2d: non-positive output extent");

    TensorT<T> y({n, cout, ho, wo});
    const size_t xs_c = static_cast<size_t>(h) * wd;
    const size_t ys_c = static_cast<size_t>(ho) * wo;

    for (int in = 0; in < n; ++in) {
        const T* xn = x.data.data() + static_cast<size_t>(in) * cin * xs_c;
        T* yn = y.data.data() + static_cast<size_t>(in) * cout * ys_c;
        for (int oc = 0; oc < cout; ++oc) {
            const T* wc = w.data.data() + static_cast<size_t>(oc) * cin * k * k;
            T* yc = yn + static_cast<size_t>(oc) * ys_c;
            const T bias = b.data[oc];
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) {
                    T acc = bias;
                    const int iy0 = oy * stride - pad;
                    const int ix0 = ox * stride - pad;
                    for (int ic = 0; ic < cin; ++ic) {
                        const T* xc = xn + static_cast<size_t>(ic) * xs_c;
                        const T* wk = wc + static_cast<size_t>(ic) * k * k;
                        for (int ky = 0; ky < k; ++ky) {
                            const int iy = iy0 + ky;
                            if (iy < 0 || iy >= h) continue;
                            const T* xrow = xc + static_cast<size_t>(iy) * wd;
                            const T* wrow = wk + static_cast<size_t>(ky) * k;
                            for (int kx = 0; kx < k; ++kx) {
                                const int ix = ix0 + kx;
                                if (ix < 0 || ix >= wd) continue;
                                acc += xrow[ix] * wrow[kx];
                            }
                        }
                    }
                    yc[static_cast<size_t>(oy) * wo + ox] = acc;
                }
            }
        }
    }
    return y;
}

template <typename T>
void conv2d_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& gy, int stride,
                     int pad, TensorT<T>* gx, TensorT<T>* gw, TensorT<T>* gb) {
    const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int cout = w.dim(0), k = w.dim(2);
    const int ho = gy.dim(2), wo = gy.dim(3);
    const size_t xs_c = static_cast<size_t>(h) * wd;
    const size_t ys_c = static_cast<size_t>(ho) * wo;

    if (gx) *gx = TensorT<T>::zeros(x.shape);
    if (gw) *gw = TensorT<T>::zeros(w.shape);
    if (gb) *gb = TensorT<T>::zeros({cout});

    for (int in = 0; in < n; ++in) {
        const T* xn = x.data.data() + static_cast<size_t>(in) * cin * xs_c;
        const T* gyn = gy.data.data() + static_cast<size_t>(in) * cout * ys_c;
        for (int oc = 0; oc < cout; ++oc) {
            const T* gyc = gyn + static_cast<size_t>(oc) * ys_c;
            const T* wc = w.data.data() + static_cast<size_t>(oc) * cin * k * k;
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) {
                    const T g = gyc[static_cast<size_t>(oy) * wo + ox];
                    if (gb) gb->data[oc] += g;
                    const int iy0 = oy * stride - pad;
                    const int ix0 = ox * stride - pad;
                    for (int ic = 0; ic < cin; ++ic) {
                        const size_t xoff = static_cast<size_t>(ic) * xs_c;
                        const size_t woff = static_cast<size_t>(ic) * k * k;
                        for (int ky = 0; ky < k; ++ky) {
                            const int iy = iy0 + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int ix = ix0 + kx;
                                if (ix < 0 || ix >= wd) continue;
                                const size_t xi = xoff + static_cast<size_t>(iy) * wd + ix;
                                const size_t wi = woff + static_cast<size_t>(ky) * k + kx;
                                if (gw) gw->data[static_cast<size_t>(oc) * cin * k * k + wi] +=
                                    g * xn[xi];
                                if (gx) gx->data[static_cast<size_t>(in) * cin * xs_c + xi] +=
                                    g * wc[wi];
                            }
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    if (x.ndim() != 2 || w.ndim() != 2) throw std::invalid_argument("linear: expected 2-d x, w");
    const int n = x.dim(0), in = x.dim(1), out = w.dim(0);
    if (w.dim(1) != in)
        throw std::invalid_argument("linear: weight in-extent " + std::to_string(w.dim(1)) +
                                    " does not match input " + std::to_string(in));
    if (static_cast<int>(b.numel()) != out)
        throw std::invalid_argument("linear: bias extent mismatch");

    TensorT<T> y({n, out});
    matmul_bt(x.data.data(), w.data.data(), y.data.data(), n, in, out);
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < out; ++o) y.data[static_cast<size_t>(i) * out + o] += b.data[o];
    return y;
}

template <typename T>
void linear_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& gy,
                     TensorT<T>* gx, TensorT<T>* gw, TensorT<T>* gb) {
    const int n = x.dim(0), in = x.dim(1), out = w.dim(0);
    if (gx) {
        *gx = TensorT<T>::zeros(x.shape);
        matmul(gy.data.data(), w.data.data(), gx->data.data(), n, out, in);
    }
    if (gw) {
        *gw = TensorT<T>::zeros(w.shape);
        matmul_at(gy.data.data(), x.data.data(), gw->data.data(), n, out, in);
    }
    if (gb) {
        *gb = TensorT<T>::zeros({out});
        for (int i = 0; i < n; ++i)
            for (int o = 0; o < out; ++o) gb->data[o] += gy.data[static_cast<size_t>(i) * out + o];
    }
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> y = x;
    for (T& v : y.data) v = v > T(0) ? v : T(0);
    return y;
}

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& gy) {
    TensorT<T> gx = gy;
    for (size_t i = 0; i < gx.data.size(); ++i)
        if (x.data[i] <= T(0)) gx.data[i] = T(0);
    return gx;
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
    TensorT<T> y = x;
    for (T& v : y.data) v = sigmoid_scalar(v);
    return y;
}

template <typename T>
TensorT<T> sigmoid_backward(const TensorT<T>& y, const TensorT<T>& gy) {
    TensorT<T> gx = gy;
    for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] *= y.data[i] * (T(1) - y.data[i]);
    return gx;
}

namespace {

// Iterates a tensor as [outer, axis, inner] around one axis.
struct AxisSplit {
    size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const std::vector<int>& shape, int axis) {
    if (axis < 0) axis += static_cast<int>(shape.size());
    if (axis < 0 || axis >= static_cast<int>(shape.size()))
        throw std::invalid_argument("axis out of range");
    AxisSplit s;
    for (int i = 0; i < axis; ++i) s.outer *= static_cast<size_t>(shape[i]);
    s.extent = static_cast<size_t>(shape[axis]);
    for (size_t i = axis + 1; i < shape.size(); ++i) s.inner *= static_cast<size_t>(shape[i]);
    return s;
}

}  // namespace

template <typename T>
TensorT<T> softmax(const TensorT<T>& x, int axis) {
    AxisSplit s = split_axis(x.shape, axis);
    TensorT<T> y = x;
    for (size_t o = 0; o < s.outer; ++o) {
        for (size_t i = 0; i < s.inner; ++i) {
            T* base = y.data.data() + o * s.extent * s.inner + i;
            T mx = base[0];
            for (size_t a = 1; a < s.extent; ++a) mx = std::max(mx, base[a * s.inner]);
            T sum = T(0);
            for (size_t a = 0; a < s.extent; ++a) {
                T e = std::exp(base[a * s.inner] - mx);
                base[a * s.inner] = e;
                sum += e;
            }
            for (size_t a = 0; a < s.extent; ++a) base[a * s.inner] /= sum;
        }
    }
    return y;
}

template <typename T>
TensorT<T> softmax_backward(const TensorT<T>& y, const TensorT<T>& gy, int axis) {
    AxisSplit s = split_axis(y.shape, axis);
    TensorT<T> gx = gy;
    for (size_t o = 0; o < s.outer; ++o) {
        for (size_t i = 0; i < s.inner; ++i) {
            const T* yb = y.data.data() + o * s.extent * s.inner + i;
            T* gb = gx.data.data() + o * s.extent * s.inner + i;
            T dot = T(0);
            for (size_t a = 0; a < s.extent; ++a) dot += yb[a * s.inner] * gb[a * s.inner];
            for (size_t a = 0; a < s.extent; ++a)
                gb[a * s.inner] = yb[a * s.inner] * (gb[a * s.inner] - dot);
        }
    }
    return gx;
}

template <typename T>
TensorT<T> layer_norm(const TensorT<T>& x, const TensorT<T>& gain, const TensorT<T>& bias, T eps) {
    const int d = x.shape.back();
    if (static_cast<int>(gain.numel()) != d || static_cast<int>(bias.numel()) != d)
        throw std::invalid_argument("layer_norm: gain/bias extent mismatch");
    const size_t rows = x.numel() / d;
    TensorT<T> y = x;
    for (size_t r = 0; r < rows; ++r) {
        T* row = y.data.data() + r * d;
        T mu = T(0);
        for (int i = 0; i < d; ++i) mu += row[i];
        mu /= d;
        T var = T(0);
        for (int i = 0; i < d; ++i) var += (row[i] - mu) * (row[i] - mu);
        var /= d;
        T inv = T(1) / std::sqrt(var + eps);
        for (int i = 0; i < d; ++i)
            row[i] = (row[i] - mu) * inv * gain.data[i] + bias.data[i];
    }
    return y;
}

template <typename T>
void layer_norm_backward(const TensorT<T>& x, const TensorT<T>& gain, const TensorT<T>& gy,
                         TensorT<T>* gx, TensorT<T>* ggain, TensorT<T>* gbias, T eps) {
    const int d = x.shape.back();
    const size_t rows = x.numel() / d;
    if (gx) *gx = TensorT<T>::zeros(x.shape);
    if (ggain) *ggain = TensorT<T>::zeros({d});
    if (gbias) *gbias = TensorT<T>::zeros({d});

    for (size_t r = 0; r < rows; ++r) {
        const T* xr = x.data.data() + r * d;
        const T* gr = gy.data.data() + r * d;
        T mu = T(0);
        for (int i = 0; i < d; ++i) mu += xr[i];
        mu /= d;
        T var = T(0);
        for (int i = 0; i < d; ++i) var += (xr[i] - mu) * (xr[i] - mu);
        var /= d;
        T inv = T(1) / std::sqrt(var + eps);

        // dL/dxhat, plus reductions needed for the mean/variance terms.
        T sum_gh = T(0), sum_gh_xhat = T(0);
        for (int i = 0; i < d; ++i) {
            T xhat = (xr[i] - mu) * inv;
            T gh = gr[i] * gain.data[i];
            sum_gh += gh;
            sum_gh_xhat += gh * xhat;
            if (ggain) ggain->data[i] += gr[i] * xhat;
            if (gbias) gbias->data[i] += gr[i];
        }
        if (gx) {
            T* gxr = gx->data.data() + r * d;
            for (int i = 0; i < d; ++i) {
                T xhat = (xr[i] - mu) * inv;
                T gh = gr[i] * gain.data[i];
                gxr[i] = inv * (gh - sum_gh / d - xhat * sum_gh_xhat / d);
            }
        }
    }
}

template <typename T>
TensorT<T> mean(const TensorT<T>& x, const std::vector<int>& axes) {
    std::vector<bool> reduce(x.shape.size(), false);
    size_t denom = 1;
    for (int a : axes) {
        int ax = a < 0 ? a + x.ndim() : a;
        if (ax < 0 || ax >= x.ndim()) throw std::invalid_argument("mean: axis out of range");
        if (reduce[ax]) throw std::invalid_argument("mean: duplicate axis");
        reduce[ax] = true;
        denom *= static_cast<size_t>(x.shape[ax]);
    }
    std::vector<int> out_shape;
    for (size_t i = 0; i < x.shape.size(); ++i)
        if (!reduce[i]) out_shape.push_back(x.shape[i]);

    TensorT<T> y(out_shape);
    // Strides of the output in terms of input indices.
    std::vector<size_t> xstride(x.shape.size(), 1);
    for (int i = x.ndim() - 2; i >= 0; --i)
        xstride[i] = xstride[i + 1] * static_cast<size_t>(x.shape[i + 1]);

    std::vector<int> idx(x.shape.size(), 0);
    for (size_t flat = 0; flat < x.numel(); ++flat) {
        size_t rem = flat;
        size_t out_index = 0;
        size_t out_mult = 1;
        // Compute output flat index by skipping reduced axes (row-major).
        for (size_t i = 0; i < x.shape.size(); ++i) {
            idx[i] = static_cast<int>(rem / xstride[i]);
            rem %= xstride[i];
        }
        for (size_t i = 0; i < x.shape.size(); ++i) {
            if (reduce[i]) continue;
            out_mult = 1;
            for (size_t j = i + 1; j < x.shape.size(); ++j)
                if (!reduce[j]) out_mult *= static_cast<size_t>(x.shape[j]);
            out_index += static_cast<size_t>(idx[i]) * out_mult;
        }
        y.data[out_index] += x.data[flat];
    }
    for (T& v : y.data) v /= static_cast<T>(denom);
    return y;
}

template <typename T>
TensorT<T> mean_backward(const std::vector<int>& x_shape, const std::vector<int>& axes,
                         const TensorT<T>& gy) {
    std::vector<bool> reduce(x_shape.size(), false);
    size_t denom = 1;
    for (int a : axes) {
        int ax = a < 0 ? a + static_cast<int>(x_shape.size()) : a;
        reduce[ax] = true;
        denom *= static_cast<size_t>(x_shape[ax]);
    }
    TensorT<T> gx(x_shape);
    std::vector<size_t> xstride(x_shape.size(), 1);
    for (int i = static_cast<int>(x_shape.size()) - 2; i >= 0; --i)
        xstride[i] = xstride[i + 1] * static_cast<size_t>(x_shape[i + 1]);

    std::vector<int> idx(x_shape.size(), 0);
    const T scale = T(1) / static_cast<T>(denom);
    for (size_t flat = 0; flat < gx.numel(); ++flat) {
        size_t rem = flat;
        for (size_t i = 0; i < x_shape.size(); ++i) {
            idx[i] = static_cast<int>(rem / xstride[i]);
            rem %= xstride[i];
        }
        size_t out_index = 0;
        for (size_t i = 0; i < x_shape.size(); ++i) {
            if (reduce[i]) continue;
            size_t out_mult = 1;
            for (size_t j = i + 1; j < x_shape.size(); ++j)
                if (!reduce[j]) out_mult *= static_cast<size_t>(x_shape[j]);
            out_index += static_cast<size_t>(idx[i]) * out_mult;
        }
        gx.data[flat] = gy.data[out_index] * scale;
    }
    return gx;
}

template <typename T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<size_t>(m) * n, T(0));
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const T av = a[static_cast<size_t>(i) * k + p];
            const T* brow = b + static_cast<size_t>(p) * n;
            T* crow = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void matmul_bt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<size_t>(i) * k;
        T* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* brow = b + static_cast<size_t>(j) * k;
            T acc = accumulate ? crow[j] : T(0);
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = acc;
        }
    }
}

template <typename T>
void matmul_at(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<size_t>(k) * n, T(0));
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<size_t>(i) * k;
        const T* brow = b + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const T av = arow[p];
            T* crow = c + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
T bce_loss(const std::vector<T>& pred, const std::vector<T>& target) {
    if (pred.size() != target.size())
        throw std::invalid_argument("bce_loss: length mismatch (" + std::to_string(pred.size()) +
                                    " vs " + std::to_string(target.size()) + ")");
    if (pred.empty()) throw std::invalid_argument("bce_loss: empty vectors");
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        double p = static_cast<double>(pred[i]);
        double y = static_cast<double>(target[i]);
        acc += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return static_cast<T>(-acc / static_cast<double>(pred.size()));
}

template <typename T>
std::vector<T> bce_backward(const std::vector<T>& pred, const std::vector<T>& target) {
    const T n = static_cast<T>(pred.size());
    std::vector<T> g(pred.size());
    for (size_t i = 0; i < pred.size(); ++i)
        g[i] = (pred[i] - target[i]) / (n * pred[i] * (T(1) - pred[i]));
    return g;
}

#define CUEING_INSTANTIATE(T)                                                                     \
    template TensorT<T> conv2d(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&, int,      \
                               int);                                                              \
    template void conv2d_backward(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&, int,   \
                                  int, TensorT<T>*, TensorT<T>*, TensorT<T>*);                    \
    template TensorT<T> linear(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&);          \
    template void linear_backward(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,        \
                                  TensorT<T>*, TensorT<T>*, TensorT<T>*);                         \
    template TensorT<T> relu(const TensorT<T>&);                                                  \
    template TensorT<T> relu_backward(const TensorT<T>&, const TensorT<T>&);                      \
    template TensorT<T> sigmoid(const TensorT<T>&);                                               \
    template TensorT<T> sigmoid_backward(const TensorT<T>&, const TensorT<T>&);                   \
    template TensorT<T> softmax(const TensorT<T>&, int);                                          \
    template TensorT<T> softmax_backward(const TensorT<T>&, const TensorT<T>&, int);              \
    template TensorT<T> layer_norm(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&, T);   \
    template void layer_norm_backward(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,    \
                                      TensorT<T>*, TensorT<T>*, TensorT<T>*, T);                  \
    template TensorT<T> mean(const TensorT<T>&, const std::vector<int>&);                         \
    template TensorT<T> mean_backward(const std::vector<int>&, const std::vector<int>&,           \
                                      const TensorT<T>&);                                         \
    template void matmul(const T*, const T*, T*, int, int, int, bool);                            \
    template void matmul_bt(const T*, const T*, T*, int, int, int, bool);                         \
    template void matmul_at(const T*, const T*, T*, int, int, int, bool);                         \
    template T bce_loss(const std::vector<T>&, const std::vector<T>&);                            \
    template std::vector<T> bce_backward(const std::vector<T>&, const std::vector<T>&);

CUEING_INSTANTIATE(float)
CUEING_INSTANTIATE(double)
#undef CUEING_INSTANTIATE

}  // namespace cueing::nn
