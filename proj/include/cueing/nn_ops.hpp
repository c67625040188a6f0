#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cueing/tensor.hpp"

namespace cueing::nn {

// ---- convolution -----------------------------------------------------------
// x: [N, Cin, H, W], w: [Cout, Cin, k, k], b: [Cout] -> y: [N, Cout, Ho, Wo]
// Cross-correlation; out extent = floor((in + 2*pad - k) / stride) + 1.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, int stride,
                  int pad);

template <typename T>
void conv2d_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& gy, int stride,
                     int pad, TensorT<T>* gx, TensorT<T>* gw, TensorT<T>* gb);

int conv_out_extent(int in, int k, int stride, int pad);

// ---- dense -----------------------------------------------------------------
// x: [N, in], w: [out, in], b: [out] -> y: [N, out]
template <typename T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b);

template <typename T>
void linear_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& gy,
                     TensorT<T>* gx, TensorT<T>* gw, TensorT<T>* gb);

// ---- elementwise -----------------------------------------------------------
template <typename T>
TensorT<T> relu(const TensorT<T>& x);
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& gy);

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x);
template <typename T>
TensorT<T> sigmoid_backward(const TensorT<T>& y, const TensorT<T>& gy);  // takes forward output

// Clamped away from the saturation endpoints so the output is strictly inside
// (0,1) even where 1/(1+e^-x) rounds to 1; keeps downstream logs finite.
template <typename T>
inline T sigmoid_scalar(T v) {
    T y = T(1) / (T(1) + std::exp(-v));
    const T eps = std::numeric_limits<T>::epsilon();
    return std::min(T(1) - eps, std::max(eps, y));
}

// ---- softmax over one axis --------------------------------------------------
template <typename T>
TensorT<T> softmax(const TensorT<T>& x, int axis);
template <typename T>
TensorT<T> softmax_backward(const TensorT<T>& y, const TensorT<T>& gy, int axis);

// ---- layer norm over the last axis ------------------------------------------
// gain/bias have the extent of the last axis.
template <typename T>
TensorT<T> layer_norm(const TensorT<T>& x, const TensorT<T>& gain, const TensorT<T>& bias,
                      T eps = T(1e-5));
template <typename T>
void layer_norm_backward(const TensorT<T>& x, const TensorT<T>& gain, const TensorT<T>& gy,
                         TensorT<T>* gx, TensorT<T>* ggain, TensorT<T>* gbias, T eps = T(1e-5));

// ---- mean over a set of axes -------------------------------------------------
// Reduced axes are removed from the output shape (scalar -> shape []).
template <typename T>
TensorT<T> mean(const TensorT<T>& x, const std::vector<int>& axes);
template <typename T>
TensorT<T> mean_backward(const std::vector<int>& x_shape, const std::vector<int>& axes,
                         const TensorT<T>& gy);

// ---- matmul helpers ----------------------------------------------------------
// C[m,n] = A[m,k] * B[k,n]; accumulate variants add into C.
template <typename T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false);
// C[m,n] = A[m,k] * B[n,k]^T
template <typename T>
void matmul_bt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false);
// C[k,n] = A[m,k]^T * B[m,n]
template <typename T>
void matmul_at(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false);

// ---- binary cross entropy -----------------------------------------------------
// L = -(1/T) * sum_i [y_i log p_i + (1 - y_i) log(1 - p_i)], p strictly in (0,1).
template <typename T>
T bce_loss(const std::vector<T>& pred, const std::vector<T>& target);
template <typename T>
std::vector<T> bce_backward(const std::vector<T>& pred, const std::vector<T>& target);

}  // namespace cueing::nn
