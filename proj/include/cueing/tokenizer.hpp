#pragma once

#include <vector>

#include "cueing/tensor.hpp"
#include "cueing/types.hpp"

namespace cueing {

// T non-overlapping patches of shape 3 x token_h x token_w in row-major token
// order (left-top to right-bottom). Data layout is [count, 3, token_h, token_w].
template <typename T>
struct TokenBatchT {
    int count = 0;  // number of tokens
    int grid = 0;   // tokens per side, grid * grid == count
    int token_h = 0;
    int token_w = 0;
    std::vector<T> data;

    size_t token_size() const { return static_cast<size_t>(3) * token_h * token_w; }
    T* token(int i) { return data.data() + static_cast<size_t>(i) * token_size(); }
    const T* token(int i) const { return data.data() + static_cast<size_t>(i) * token_size(); }
};

using TokenBatch = TokenBatchT<float>;

// Token counts supported by the artifact: powers of 2 that are perfect squares.
bool is_valid_token_count(int t);

// Integer side of a valid token count; throws for invalid counts.
int token_grid_side(int t);

// Throws a dimension error naming H, W and sqrt(T) unless sqrt(T) divides both.
void check_token_divisibility(int h, int w, int token_count);

// Pure rearrangement of the image into T tokens; zero arithmetic on pixels.
template <typename T>
TokenBatchT<T> tokenize(const ImageT<T>& image, int token_count);

// Exact inverse of tokenize.
template <typename T>
ImageT<T> untokenize(const TokenBatchT<T>& tokens);

// Mean gaze value per token; output has token_count entries in token order.
template <typename T>
std::vector<T> downsample_gaze(const GazeMapT<T>& gaze, int token_count);

// 2 x H x W grid; channel 0 carries the token's column coordinate, channel 1
// its row coordinate, each equally spaced in [-1, 1] (a single token maps to 0).
template <typename T>
TensorT<T> coord_grid(int h, int w, int token_count);

// Token batch viewed as a [count, 3, token_h, token_w] stack (token axis as
// batch). Pure reshape; fold is the exact inverse.
template <typename T>
TensorT<T> unfold(const TokenBatchT<T>& tokens);

template <typename T>
TokenBatchT<T> fold(const TensorT<T>& stack);

// Ragged-input variant: items must share one shape or a dimension error names
// the offender.
template <typename T>
TokenBatchT<T> fold(const std::vector<TensorT<T>>& items);

}  // namespace cueing
