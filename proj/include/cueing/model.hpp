#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cueing/encoder.hpp"
#include "cueing/registry.hpp"
#include "cueing/tensor.hpp"
#include "cueing/tokenizer.hpp"
#include "cueing/types.hpp"

namespace cueing {

struct ModelConfig {
    int tokens = 256;       // T; power of 2 and perfect square
    int width = 1280;       // input W
    int height = 720;       // input H
    int channels = 16;      // token-conv kernels
    int pool_h = 8;         // pooled token map p
    int pool_w = 8;         // pooled token map q; d = p*q
    int layers = 1;         // encoder layers L
    int heads = 1;
    bool symmetric_qk = false;
    bool plain_channel_attention = false;
    uint64_t seed = 0;

    // Both token convolutions: 3x3, stride 2, pad 1.
    static constexpr int kKernel = 3;
    static constexpr int kStride = 2;
    static constexpr int kPad = 1;
    static constexpr int kReduction = 4;  // channel-attention MLP reduction ratio
    static constexpr int kFfnMult = 2;    // FFN hidden width = 2*d

    int embed_dim() const { return pool_h * pool_w; }
    int ffn_dim() const { return kFfnMult * embed_dim(); }

    // Throws naming the violated constraint.
    void validate() const;

    bool same_architecture(const ModelConfig& o) const;
};

// Per-stage multiply-accumulate counts for one single-image inference.
struct FlopReport {
    struct Stage {
        std::string name;
        int64_t macs = 0;
    };
    std::vector<Stage> stages;
    int64_t total = 0;

    int64_t stage(const std::string& name) const;
    double total_gmacs() const { return static_cast<double>(total) * 1e-9; }
};

// MACs of one conv2d application at the given geometry (k x k kernel).
int64_t conv2d_macs(int cin, int cout, int k, int stride, int pad, int h, int w);

template <typename T>
struct ForwardTraceT {
    TensorT<T> coord;               // [2, H, W]
    TensorT<T> pos_map;             // [1, 1, H, W]
    ImageT<T> encoded;              // image + positional map
    TokenBatchT<T> tokens;          // tokenized encoded input
    TensorT<T> stack;               // unfolded [T, 3, H', W']
    TensorT<T> conv1_pre, conv1_out;
    TensorT<T> conv2_pre, conv2_out;
    typename nn::ChannelAttentionT<T>::Cache chattn;
    TensorT<T> weighted;            // [T, C, Hout, Wout]
    TensorT<T> merged;              // channel mean [T, Hout, Wout]
    TensorT<T> pooled;              // [T, p, q]
    TensorT<T> seq;                 // [T, d]
    std::vector<typename nn::EncoderLayerT<T>::Cache> enc;
    TensorT<T> enc_out;             // [T, d]
    TensorT<T> token_means;         // [1, T]
    TensorT<T> head_out;            // [1, T]
    std::vector<T> prediction;      // sigmoid(head_out), length T
};

// The gaze prediction network: positional encoding, tokenization, token
// convolution, channel attention, transformer encoder, point head.
template <typename T>
class CueingModelT {
public:
    CueingModelT(const ModelConfig& cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    nn::RegistryT<T>& registry() { return reg_; }
    const nn::RegistryT<T>& registry() const { return reg_; }

    // Full pipeline; trace (when given) keeps every stage for backward/tests.
    std::vector<T> forward(const ImageT<T>& image, ForwardTraceT<T>* trace = nullptr) const;

    // Accumulates parameter gradients from dL/dprediction.
    void backward(const ForwardTraceT<T>& trace, const std::vector<T>& g_prediction);

    int64_t count_params(bool trainable_only = true) const;
    FlopReport count_flops() const;

    // Copies parameter values from another instance (e.g. float -> double).
    template <typename U>
    void copy_params_from(const CueingModelT<U>& other) {
        for (size_t i = 0; i < reg_.size(); ++i) {
            auto& dst = reg_[i].value.data;
            const auto& src = other.registry()[i].value.data;
            for (size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<T>(src[j]);
        }
    }

private:
    ModelConfig cfg_;
    nn::RegistryT<T> reg_;
    nn::ParamT<T>*pos_w_, *pos_b_;
    nn::ParamT<T>*conv1_w_, *conv1_b_;
    nn::ParamT<T>*conv2_w_, *conv2_b_;
    nn::ChannelAttentionT<T> chattn_;
    std::vector<nn::EncoderLayerT<T>> encoder_;
    nn::ParamT<T>*head_w_, *head_b_;
};

using CueingModel = CueingModelT<float>;
using ForwardTrace = ForwardTraceT<float>;

// Checkpoints: magic, version, config block, then named parameter records
// (name, shape, little-endian float32). See docs/checkpoint_format.md.
void save_checkpoint(const CueingModel& model, const std::string& path);
std::unique_ptr<CueingModel> load_checkpoint(const std::string& path);

}  // namespace cueing
