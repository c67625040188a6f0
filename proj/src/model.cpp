#include "cueing/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "cueing/nn_ops.hpp"

namespace cueing {

namespace {

const std::array<int, 5> kSupportedTokenCounts = {4, 16, 64, 256, 1024};

}  // namespace

void ModelConfig::validate() const {
    bool supported = false;
    for (int t : kSupportedTokenCounts) supported |= (t == tokens);
    if (!supported)
        throw std::invalid_argument(
            "config: token count " + std::to_string(tokens) +
            " unsupported (must be one of 4, 16, 64, 256, 1024)");
    int s = token_grid_side(tokens);
    if (height % s != 0 || width % s != 0)
        throw std::invalid_argument("config: input " + std::to_string(width) + "x" +
                                    std::to_string(height) + " not divisible by sqrt(T)=" +
                                    std::to_string(s));
    if (channels < 1) throw std::invalid_argument("config: channels must be >= 1");
    if (channels % kReduction != 0 && !plain_channel_attention)
        throw std::invalid_argument("config: channels must be divisible by the reduction ratio " +
                                    std::to_string(kReduction));
    if (pool_h < 1 || pool_w < 1) throw std::invalid_argument("config: pooled dims must be >= 1");
    if (layers < 1) throw std::invalid_argument("config: layers must be >= 1");
    if (heads < 1 || embed_dim() % heads != 0)
        throw std::invalid_argument("config: embed dim " + std::to_string(embed_dim()) +
                                    " not divisible by heads " + std::to_string(heads));
}

bool ModelConfig::same_architecture(const ModelConfig& o) const {
    return tokens == o.tokens && width == o.width && height == o.height &&
           channels == o.channels && pool_h == o.pool_h && pool_w == o.pool_w &&
           layers == o.layers && heads == o.heads && symmetric_qk == o.symmetric_qk &&
           plain_channel_attention == o.plain_channel_attention;
}

int64_t conv2d_macs(int cin, int cout, int k, int stride, int pad, int h, int w) {
    int64_t ho = nn::conv_out_extent(h, k, stride, pad);
    int64_t wo = nn::conv_out_extent(w, k, stride, pad);
    return ho * wo * cout * cin * static_cast<int64_t>(k) * k;
}

int64_t FlopReport::stage(const std::string& name) const {
    for (const Stage& s : stages)
        if (s.name == name) return s.macs;
    throw std::out_of_range("flop report: no stage " + name);
}

template <typename T>
CueingModelT<T>::CueingModelT(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    cfg_.seed = seed;

    pos_w_ = &reg_.add("pos_conv.weight", {1, 2, 1, 1});
    pos_b_ = &reg_.add("pos_conv.bias", {1});
    conv1_w_ = &reg_.add("conv1.weight", {cfg_.channels, 3, ModelConfig::kKernel,
                                          ModelConfig::kKernel});
    conv1_b_ = &reg_.add("conv1.bias", {cfg_.channels});
    conv2_w_ = &reg_.add("conv2.weight", {cfg_.channels, cfg_.channels, ModelConfig::kKernel,
                                          ModelConfig::kKernel});
    conv2_b_ = &reg_.add("conv2.bias", {cfg_.channels});
    chattn_ = nn::ChannelAttentionT<T>::create(reg_, "chattn", cfg_.channels,
                                               ModelConfig::kReduction,
                                               cfg_.plain_channel_attention);
    for (int l = 0; l < cfg_.layers; ++l)
        encoder_.push_back(nn::EncoderLayerT<T>::create(reg_, "encoder." + std::to_string(l),
                                                        cfg_.embed_dim(), cfg_.heads,
                                                        cfg_.ffn_dim(), cfg_.symmetric_qk));
    head_w_ = &reg_.add("head.weight", {cfg_.tokens, cfg_.tokens});
    head_b_ = &reg_.add("head.bias", {cfg_.tokens});

    reg_.init_params(seed);
}

template <typename T>
std::vector<T> CueingModelT<T>::forward(const ImageT<T>& image, ForwardTraceT<T>* trace) const {
    if (image.h != cfg_.height || image.w != cfg_.width)
        throw std::invalid_argument("forward: input " + std::to_string(image.w) + "x" +
                                    std::to_string(image.h) + " does not match config " +
                                    std::to_string(cfg_.width) + "x" +
                                    std::to_string(cfg_.height));

    ForwardTraceT<T> local;
    ForwardTraceT<T>& tr = trace ? *trace : local;

    // Stage 1: positional encoding added to every image channel.
    tr.coord = coord_grid<T>(cfg_.height, cfg_.width, cfg_.tokens);
    TensorT<T> coord4({1, 2, cfg_.height, cfg_.width}, tr.coord.data);
    tr.pos_map = nn::conv2d(coord4, pos_w_->value, pos_b_->value, 1, 0);
    tr.encoded = image;
    const size_t plane = static_cast<size_t>(cfg_.height) * cfg_.width;
    for (int c = 0; c < 3; ++c)
        for (size_t i = 0; i < plane; ++i) tr.encoded.data[c * plane + i] += tr.pos_map.data[i];

    // Stage 2-3: tokenize, unfold, token convolution (token axis as batch).
    tr.tokens = tokenize(tr.encoded, cfg_.tokens);
    tr.stack = unfold(tr.tokens);
    tr.conv1_pre = nn::conv2d(tr.stack, conv1_w_->value, conv1_b_->value, ModelConfig::kStride,
                              ModelConfig::kPad);
    tr.conv1_out = nn::relu(tr.conv1_pre);
    tr.conv2_pre = nn::conv2d(tr.conv1_out, conv2_w_->value, conv2_b_->value,
                              ModelConfig::kStride, ModelConfig::kPad);
    tr.conv2_out = nn::relu(tr.conv2_pre);

    // Channel attention, then channel mean.
    tr.weighted = chattn_.forward(tr.conv2_out, &tr.chattn);
    tr.merged = nn::channel_mean(tr.weighted);

    // Stage 4: pool each token map to p x q and flatten to d.
    tr.pooled = nn::adaptive_avg_pool(tr.merged, cfg_.pool_h, cfg_.pool_w);
    tr.seq = TensorT<T>({cfg_.tokens, cfg_.embed_dim()}, tr.pooled.data);

    // Stage 5: encoder layers.
    tr.enc.resize(encoder_.size());
    TensorT<T> h = tr.seq;
    for (size_t l = 0; l < encoder_.size(); ++l) h = encoder_[l].forward(h, &tr.enc[l]);
    tr.enc_out = h;

    // Stage 6-7: spatial mean per token, point head, sigmoid.
    tr.token_means = TensorT<T>({1, cfg_.tokens});
    const int d = cfg_.embed_dim();
    for (int t = 0; t < cfg_.tokens; ++t) {
        T acc = T(0);
        for (int e = 0; e < d; ++e) acc += tr.enc_out.data[static_cast<size_t>(t) * d + e];
        tr.token_means.data[t] = acc / static_cast<T>(d);
    }
    tr.head_out = nn::linear(tr.token_means, head_w_->value, head_b_->value);

    tr.prediction.resize(cfg_.tokens);
    for (int t = 0; t < cfg_.tokens; ++t)
        tr.prediction[t] = nn::sigmoid_scalar(tr.head_out.data[t]);
    return tr.prediction;
}

template <typename T>
void CueingModelT<T>::backward(const ForwardTraceT<T>& tr, const std::vector<T>& g_prediction) {
    if (static_cast<int>(g_prediction.size()) != cfg_.tokens)
        throw std::invalid_argument("backward: gradient length mismatch");

    auto add_into = [](TensorT<T>& dst, const TensorT<T>& src) {
        for (size_t i = 0; i < dst.numel(); ++i) dst.data[i] += src.data[i];
    };

    // Sigmoid head.
    TensorT<T> ghead({1, cfg_.tokens});
    for (int t = 0; t < cfg_.tokens; ++t) {
        const T y = tr.prediction[t];
        ghead.data[t] = g_prediction[t] * y * (T(1) - y);
    }

    TensorT<T> gmeans, gw, gb;
    nn::linear_backward(tr.token_means, head_w_->value, ghead, &gmeans, &gw, &gb);
    add_into(head_w_->grad, gw);
    add_into(head_b_->grad, gb);

    // Spatial mean over d.
    const int d = cfg_.embed_dim();
    TensorT<T> genc({cfg_.tokens, d});
    for (int t = 0; t < cfg_.tokens; ++t) {
        const T g = gmeans.data[t] / static_cast<T>(d);
        for (int e = 0; e < d; ++e) genc.data[static_cast<size_t>(t) * d + e] = g;
    }

    for (int l = static_cast<int>(encoder_.size()) - 1; l >= 0; --l)
        genc = encoder_[static_cast<size_t>(l)].backward(tr.enc[static_cast<size_t>(l)], genc);

    // Un-flatten to pooled maps, then pool backward.
    TensorT<T> gpooled({cfg_.tokens, cfg_.pool_h, cfg_.pool_w}, genc.data);
    TensorT<T> gmerged = nn::adaptive_avg_pool_backward(tr.merged.shape, cfg_.pool_h, cfg_.pool_w,
                                                        gpooled);

    TensorT<T> gweighted = nn::channel_mean_backward(tr.weighted.shape, gmerged);
    TensorT<T> gconv2_out = chattn_.backward(tr.chattn, gweighted);

    TensorT<T> gconv2_pre = nn::relu_backward(tr.conv2_pre, gconv2_out);
    TensorT<T> gconv1_out, gw2, gb2;
    nn::conv2d_backward(tr.conv1_out, conv2_w_->value, gconv2_pre, ModelConfig::kStride,
                        ModelConfig::kPad, &gconv1_out, &gw2, &gb2);
    add_into(conv2_w_->grad, gw2);
    add_into(conv2_b_->grad, gb2);

    TensorT<T> gconv1_pre = nn::relu_backward(tr.conv1_pre, gconv1_out);
    TensorT<T> gstack, gw1, gb1;
    nn::conv2d_backward(tr.stack, conv1_w_->value, gconv1_pre, ModelConfig::kStride,
                        ModelConfig::kPad, &gstack, &gw1, &gb1);
    add_into(conv1_w_->grad, gw1);
    add_into(conv1_b_->grad, gb1);

    // Back through fold/tokenize (pure rearrangements) to the encoded image.
    TokenBatchT<T> gtokens = fold(gstack);
    ImageT<T> gencoded = untokenize(gtokens);

    // The positional map was added to all 3 channels.
    const size_t plane = static_cast<size_t>(cfg_.height) * cfg_.width;
    TensorT<T> gpos({1, 1, cfg_.height, cfg_.width});
    for (size_t i = 0; i < plane; ++i)
        gpos.data[i] = gencoded.data[i] + gencoded.data[plane + i] + gencoded.data[2 * plane + i];

    TensorT<T> coord4({1, 2, cfg_.height, cfg_.width}, tr.coord.data);
    TensorT<T> gposw, gposb;
    nn::conv2d_backward(coord4, pos_w_->value, gpos, 1, 0, static_cast<TensorT<T>*>(nullptr),
                        &gposw, &gposb);
    add_into(pos_w_->grad, gposw);
    add_into(pos_b_->grad, gposb);
}

template <typename T>
int64_t CueingModelT<T>::count_params(bool trainable_only) const {
    return reg_.count_params(trainable_only);
}

template <typename T>
FlopReport CueingModelT<T>::count_flops() const {
    const int s = token_grid_side(cfg_.tokens);
    const int th = cfg_.height / s;
    const int tw = cfg_.width / s;
    const int k = ModelConfig::kKernel;
    const int c = cfg_.channels;
    const int d = cfg_.embed_dim();
    const int64_t t = cfg_.tokens;

    FlopReport rep;
    auto push = [&rep](const std::string& name, int64_t macs) {
        rep.stages.push_back({name, macs});
        rep.total += macs;
    };

    // 1x1 conv over the full-resolution coordinate grid.
    push("pos_conv", conv2d_macs(2, 1, 1, 1, 0, cfg_.height, cfg_.width));
    // Pure rearrangement: no trainable parameters and no floating-point ops.
    push("tokenize", 0);

    const int h1 = nn::conv_out_extent(th, k, ModelConfig::kStride, ModelConfig::kPad);
    const int w1 = nn::conv_out_extent(tw, k, ModelConfig::kStride, ModelConfig::kPad);
    int64_t conv1 = t * conv2d_macs(3, c, k, ModelConfig::kStride, ModelConfig::kPad, th, tw);
    int64_t conv2 = t * conv2d_macs(c, c, k, ModelConfig::kStride, ModelConfig::kPad, h1, w1);
    push("token_conv", conv1 + conv2);

    const int h2 = nn::conv_out_extent(h1, k, ModelConfig::kStride, ModelConfig::kPad);
    const int w2 = nn::conv_out_extent(w1, k, ModelConfig::kStride, ModelConfig::kPad);
    int64_t chattn;
    if (cfg_.plain_channel_attention) {
        chattn = t * static_cast<int64_t>(c) * h2 * w2;  // gating multiplies only
    } else {
        const int r = c / ModelConfig::kReduction;
        int64_t mlp = 2LL * (static_cast<int64_t>(r) * c + static_cast<int64_t>(c) * r);
        chattn = t * (mlp + static_cast<int64_t>(c) * h2 * w2);
    }
    push("channel_attention", chattn);
    push("pool", 0);

    // Per layer: Q,K,V,O projections, score and context matmuls, FFN.
    int64_t proj = 4LL * t * d * d;
    int64_t scores = 2LL * t * t * d;  // q k^T and attn v
    int64_t ffn = 2LL * t * d * cfg_.ffn_dim();
    push("encoder", cfg_.layers * (proj + scores + ffn));

    push("spatial_mean", 0);
    push("head", t * t);
    return rep;
}

template class CueingModelT<float>;
template class CueingModelT<double>;

// ---- checkpoint serialization --------------------------------------------------

namespace {

constexpr char kMagic[8] = {'C', 'U', 'E', 'I', 'N', 'G', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
    put_u32(os, static_cast<uint32_t>(v));
    put_u32(os, static_cast<uint32_t>(v >> 32));
}

void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<uint32_t>(v)); }

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

uint64_t get_u64(std::istream& is) {
    uint64_t lo = get_u32(is);
    uint64_t hi = get_u32(is);
    return lo | hi << 32;
}

}  // namespace

void save_checkpoint(const CueingModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + path);

    const ModelConfig& c = model.config();
    os.write(kMagic, 8);
    put_u32(os, kVersion);
    put_u32(os, static_cast<uint32_t>(c.tokens));
    put_u32(os, static_cast<uint32_t>(c.width));
    put_u32(os, static_cast<uint32_t>(c.height));
    put_u32(os, static_cast<uint32_t>(c.channels));
    put_u32(os, static_cast<uint32_t>(c.pool_h));
    put_u32(os, static_cast<uint32_t>(c.pool_w));
    put_u32(os, static_cast<uint32_t>(c.layers));
    put_u32(os, static_cast<uint32_t>(c.heads));
    uint32_t flags = (c.symmetric_qk ? 1u : 0u) | (c.plain_channel_attention ? 2u : 0u);
    put_u32(os, flags);
    put_u64(os, c.seed);

    const auto& reg = model.registry();
    put_u32(os, static_cast<uint32_t>(reg.size()));
    for (size_t i = 0; i < reg.size(); ++i) {
        const auto& p = reg[i];
        put_u32(os, static_cast<uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put_u32(os, static_cast<uint32_t>(p.value.ndim()));
        for (int d = 0; d < p.value.ndim(); ++d) put_u32(os, static_cast<uint32_t>(p.value.dim(d)));
        for (float v : p.value.data) put_f32(os, v);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::unique_ptr<CueingModel> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);

    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    uint32_t version = get_u32(is);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported format version " +
                                 std::to_string(version));

    ModelConfig c;
    c.tokens = static_cast<int>(get_u32(is));
    c.width = static_cast<int>(get_u32(is));
    c.height = static_cast<int>(get_u32(is));
    c.channels = static_cast<int>(get_u32(is));
    c.pool_h = static_cast<int>(get_u32(is));
    c.pool_w = static_cast<int>(get_u32(is));
    c.layers = static_cast<int>(get_u32(is));
    c.heads = static_cast<int>(get_u32(is));
    uint32_t flags = get_u32(is);
    c.symmetric_qk = (flags & 1u) != 0;
    c.plain_channel_attention = (flags & 2u) != 0;
    uint64_t seed = get_u64(is);

    auto model = std::make_unique<CueingModel>(c, seed);
    auto& reg = model->registry();

    uint32_t n = get_u32(is);
    if (n != reg.size())
        throw std::runtime_error("checkpoint: parameter count " + std::to_string(n) +
                                 " does not match architecture (" + std::to_string(reg.size()) +
                                 ")");
    for (uint32_t i = 0; i < n; ++i) {
        uint32_t len = get_u32(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (!is) throw std::runtime_error("checkpoint: truncated file");
        auto& p = reg[i];
        if (name != p.name)
            throw std::runtime_error("checkpoint: parameter '" + name + "' does not match '" +
                                     p.name + "'");
        uint32_t nd = get_u32(is);
        std::vector<int> shape(nd);
        for (uint32_t d = 0; d < nd; ++d) shape[d] = static_cast<int>(get_u32(is));
        if (shape != p.value.shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        for (float& v : p.value.data) v = std::bit_cast<float>(get_u32(is));
    }
    return model;
}

}  // namespace cueing
