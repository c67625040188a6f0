#include "cueing/tokenizer.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace cueing {

bool is_valid_token_count(int t) {
    if (t < 1) return false;
    if ((t & (t - 1)) != 0) return false;  // power of 2
    int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(t))));
    return s * s == t;
}

int token_grid_side(int t) {
    if (t < 1) throw std::invalid_argument("token count must be >= 1");
    int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(t))));
    if (s * s != t)
        throw std::invalid_argument("token count " + std::to_string(t) +
                                    " is not a perfect square");
    return s;
}

void check_token_divisibility(int h, int w, int token_count) {
    int s = token_grid_side(token_count);
    if (h % s != 0 || w % s != 0)
        throw std::invalid_argument("image extent H=" + std::to_string(h) +
                                    ", W=" + std::to_string(w) + " not divisible by sqrt(T)=" +
                                    std::to_string(s));
}

namespace {

void check_batch_token_count(int t) {
    if (!is_valid_token_count(t))
        throw std::invalid_argument("token count " + std::to_string(t) +
                                    " is not a power of 2 and a perfect square");
}

}  // namespace

template <typename T>
TokenBatchT<T> tokenize(const ImageT<T>& image, int token_count) {
    check_batch_token_count(token_count);
    check_token_divisibility(image.h, image.w, token_count);
    int s = token_grid_side(token_count);

    TokenBatchT<T> out;
    out.count = token_count;
    out.grid = s;
    out.token_h = image.h / s;
    out.token_w = image.w / s;
    out.data.resize(static_cast<size_t>(token_count) * out.token_size());

    const size_t plane = static_cast<size_t>(image.h) * image.w;
    for (int r = 0; r < s; ++r) {
        for (int c = 0; c < s; ++c) {
            T* tok = out.token(r * s + c);
            for (int ch = 0; ch < 3; ++ch) {
                const T* src = image.data.data() + ch * plane;
                T* dst = tok + static_cast<size_t>(ch) * out.token_h * out.token_w;
                for (int y = 0; y < out.token_h; ++y) {
                    const T* row = src + static_cast<size_t>(r * out.token_h + y) * image.w +
                                   static_cast<size_t>(c) * out.token_w;
                    std::memcpy(dst + static_cast<size_t>(y) * out.token_w, row,
                                sizeof(T) * out.token_w);
                }
            }
        }
    }
    return out;
}

template <typename T>
ImageT<T> untokenize(const TokenBatchT<T>& tokens) {
    int s = tokens.grid;
    ImageT<T> img(s * tokens.token_h, s * tokens.token_w);
    const size_t plane = static_cast<size_t>(img.h) * img.w;
    for (int r = 0; r < s; ++r) {
        for (int c = 0; c < s; ++c) {
            const T* tok = tokens.token(r * s + c);
            for (int ch = 0; ch < 3; ++ch) {
                T* dst = img.data.data() + ch * plane;
                const T* src = tok + static_cast<size_t>(ch) * tokens.token_h * tokens.token_w;
                for (int y = 0; y < tokens.token_h; ++y) {
                    std::memcpy(dst + static_cast<size_t>(r * tokens.token_h + y) * img.w +
                                    static_cast<size_t>(c) * tokens.token_w,
                                src + static_cast<size_t>(y) * tokens.token_w,
                                sizeof(T) * tokens.token_w);
                }
            }
        }
    }
    return img;
}

template <typename T>
std::vector<T> downsample_gaze(const GazeMapT<T>& gaze, int token_count) {
    check_batch_token_count(token_count);
    check_token_divisibility(gaze.h, gaze.w, token_count);
    int s = token_grid_side(token_count);
    int th = gaze.h / s;
    int tw = gaze.w / s;
    std::vector<T> points(static_cast<size_t>(token_count));
    const double inv = 1.0 / (static_cast<double>(th) * tw);
    for (int r = 0; r < s; ++r) {
        for (int c = 0; c < s; ++c) {
            double sum = 0.0;
            for (int y = 0; y < th; ++y) {
                const T* row =
                    gaze.data.data() + static_cast<size_t>(r * th + y) * gaze.w + c * tw;
                for (int x = 0; x < tw; ++x) sum += row[x];
            }
            points[static_cast<size_t>(r) * s + c] = static_cast<T>(sum * inv);
        }
    }
    return points;
}

template <typename T>
TensorT<T> coord_grid(int h, int w, int token_count) {
    check_token_divisibility(h, w, token_count);
    int s = token_grid_side(token_count);
    int th = h / s;
    int tw = w / s;

    TensorT<T> grid({2, h, w});
    const size_t plane = static_cast<size_t>(h) * w;
    for (int y = 0; y < h; ++y) {
        int r = y / th;
        T rowc = s > 1 ? static_cast<T>(-1.0 + 2.0 * r / (s - 1)) : T(0);
        for (int x = 0; x < w; ++x) {
            int c = x / tw;
            T colc = s > 1 ? static_cast<T>(-1.0 + 2.0 * c / (s - 1)) : T(0);
            grid.data[static_cast<size_t>(y) * w + x] = colc;
            grid.data[plane + static_cast<size_t>(y) * w + x] = rowc;
        }
    }
    return grid;
}

template <typename T>
TensorT<T> unfold(const TokenBatchT<T>& tokens) {
    TensorT<T> stack({tokens.count, 3, tokens.token_h, tokens.token_w});
    stack.data = tokens.data;
    return stack;
}

template <typename T>
TokenBatchT<T> fold(const TensorT<T>& stack) {
    if (stack.ndim() != 4 || stack.dim(1) != 3)
        throw std::invalid_argument("fold: expected [T,3,h,w] stack, got " + stack.shape_str());
    TokenBatchT<T> out;
    out.count = stack.dim(0);
    check_batch_token_count(out.count);
    out.grid = token_grid_side(out.count);
    out.token_h = stack.dim(2);
    out.token_w = stack.dim(3);
    out.data = stack.data;
    return out;
}

template <typename T>
TokenBatchT<T> fold(const std::vector<TensorT<T>>& items) {
    if (items.empty()) throw std::invalid_argument("fold: empty stack");
    for (size_t i = 1; i < items.size(); ++i)
        if (items[i].shape != items[0].shape)
            throw std::invalid_argument("fold: item " + std::to_string(i) + " has shape " +
                                        items[i].shape_str() + ", expected " +
                                        items[0].shape_str());
    if (items[0].ndim() != 3 || items[0].dim(0) != 3)
        throw std::invalid_argument("fold: items must be [3,h,w], got " + items[0].shape_str());

    TensorT<T> stack({static_cast<int>(items.size()), 3, items[0].dim(1), items[0].dim(2)});
    size_t per = items[0].numel();
    for (size_t i = 0; i < items.size(); ++i)
        std::copy(items[i].data.begin(), items[i].data.end(), stack.data.begin() + i * per);
    return fold(stack);
}

template TokenBatchT<float> tokenize(const ImageT<float>&, int);
template TokenBatchT<double> tokenize(const ImageT<double>&, int);
template ImageT<float> untokenize(const TokenBatchT<float>&);
template ImageT<double> untokenize(const TokenBatchT<double>&);
template std::vector<float> downsample_gaze(const GazeMapT<float>&, int);
template std::vector<double> downsample_gaze(const GazeMapT<double>&, int);
template TensorT<float> coord_grid(int, int, int);
template TensorT<double> coord_grid(int, int, int);
template TensorT<float> unfold(const TokenBatchT<float>&);
template TensorT<double> unfold(const TokenBatchT<double>&);
template TokenBatchT<float> fold(const TensorT<float>&);
template TokenBatchT<double> fold(const TensorT<double>&);
template TokenBatchT<float> fold(const std::vector<TensorT<float>>&);
template TokenBatchT<double> fold(const std::vector<TensorT<double>>&);

}  // namespace cueing
