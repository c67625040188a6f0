#pragma once

#include <string>
#include <vector>

#include "cueing/registry.hpp"
#include "cueing/tensor.hpp"

namespace cueing::nn {

// ---- adaptive average pooling ------------------------------------------------
// x: [N, H, W] -> [N, p, q]; bin i covers [floor(i*H/p), ceil((i+1)*H/p)).
template <typename T>
TensorT<T> adaptive_avg_pool(const TensorT<T>& x, int p, int q);
template <typename T>
TensorT<T> adaptive_avg_pool_backward(const std::vector<int>& x_shape, int p, int q,
                                      const TensorT<T>& gy);

// Mean over the channel axis of a [N, C, H, W] stack -> [N, H, W].
template <typename T>
TensorT<T> channel_mean(const TensorT<T>& v);
template <typename T>
TensorT<T> channel_mean_backward(const std::vector<int>& v_shape, const TensorT<T>& gy);

// ---- channel attention ---------------------------------------------------------
// CBAM-style gating: w = sigmoid(MLP(avgpool(v)) + MLP(maxpool(v))) with a
// shared two-layer MLP (reduction ratio r), v_weighted[c] = w[c] * v[c].
// The plain variant replaces the MLP by a single learned per-channel logit.
template <typename T>
struct ChannelAttentionT {
    int channels = 0;
    int reduced = 0;
    bool plain = false;

    ParamT<T>* fc1_w = nullptr;  // [C/r, C]
    ParamT<T>* fc1_b = nullptr;  // [C/r]
    ParamT<T>* fc2_w = nullptr;  // [C, C/r]
    ParamT<T>* fc2_b = nullptr;  // [C]
    ParamT<T>* gate = nullptr;   // [C], plain variant only

    struct Cache {
        TensorT<T> v;                // input [N, C, H, W]
        TensorT<T> avg, mx;          // [N, C]
        std::vector<size_t> argmax;  // N*C flat offsets into the spatial plane
        TensorT<T> a1pre, a1, a2;    // avg path
        TensorT<T> m1pre, m1, m2;    // max path
        TensorT<T> w;                // [N, C] gate values
    };

    static ChannelAttentionT create(RegistryT<T>& reg, const std::string& prefix, int channels,
                                    int reduction, bool plain);

    // Returns v_weighted [N, C, H, W]; cache->w holds the per-sample weights.
    TensorT<T> forward(const TensorT<T>& v, Cache* cache) const;

    // Accumulates parameter gradients, returns dL/dv.
    TensorT<T> backward(const Cache& cache, const TensorT<T>& g_weighted) const;
};

// ---- transformer encoder layer ---------------------------------------------------
// Pre-norm: x + MHA(LN(x)) then x + FFN(LN(x)). Attention is full scaled
// dot-product over all token pairs, no mask. With symmetric_qk the key
// projection reuses the query projection, making the score matrix symmetric.
template <typename T>
struct EncoderLayerT {
    int d = 0;
    int heads = 1;
    int ffn = 0;
    bool symmetric_qk = false;

    ParamT<T>*ln1_g = nullptr, *ln1_b = nullptr;
    ParamT<T>*wq = nullptr, *bq = nullptr;
    ParamT<T>*wk = nullptr, *bk = nullptr;  // null when symmetric_qk
    ParamT<T>*wv = nullptr, *bv = nullptr;
    ParamT<T>*wo = nullptr, *bo = nullptr;
    ParamT<T>*ln2_g = nullptr, *ln2_b = nullptr;
    ParamT<T>*fc1_w = nullptr, *fc1_b = nullptr;
    ParamT<T>*fc2_w = nullptr, *fc2_b = nullptr;

    struct Cache {
        TensorT<T> x, n1;
        TensorT<T> q, k, v;     // [T, d]
        TensorT<T> attn;        // [heads, T, T] row-stochastic
        TensorT<T> ctx;         // [T, d] heads concatenated
        TensorT<T> x2, n2;
        TensorT<T> f1pre, f1;
    };

    static EncoderLayerT create(RegistryT<T>& reg, const std::string& prefix, int d, int heads,
                                int ffn, bool symmetric_qk);

    TensorT<T> forward(const TensorT<T>& x, Cache* cache) const;
    TensorT<T> backward(const Cache& cache, const TensorT<T>& gy) const;
};

using EncoderLayer = EncoderLayerT<float>;
using ChannelAttention = ChannelAttentionT<float>;

}  // namespace cueing::nn
