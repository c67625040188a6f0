#include "cueing/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cueing/nn_ops.hpp"
#include "cueing/rng.hpp"
#include "cueing/tokenizer.hpp"

namespace cueing {

FreezeMask parse_freeze_mask(const std::string& name) {
    if (name == "none") return FreezeMask::None;
    if (name == "attention") return FreezeMask::Attention;
    if (name == "all_except_linear") return FreezeMask::AllExceptLinear;
    throw std::invalid_argument("unknown freeze mask '" + name +
                                "' (expected none, attention or all_except_linear)");
}

std::string to_string(FreezeMask mask) {
    switch (mask) {
        case FreezeMask::None: return "none";
        case FreezeMask::Attention: return "attention";
        case FreezeMask::AllExceptLinear: return "all_except_linear";
    }
    return "none";
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
}

bool is_attention_param(const std::string& name) { return name.rfind("encoder.", 0) == 0; }
bool is_head_param(const std::string& name) { return name.rfind("head.", 0) == 0; }

void apply_freeze_mask(nn::Registry& registry, FreezeMask mask) {
    for (size_t i = 0; i < registry.size(); ++i) {
        auto& p = registry[i];
        switch (mask) {
            case FreezeMask::None:
                p.trainable = true;
                break;
            case FreezeMask::Attention:
                p.trainable = !is_attention_param(p.name);
                break;
            case FreezeMask::AllExceptLinear:
                p.trainable = is_head_param(p.name);
                break;
        }
    }
}

TrainResult train_frames(CueingModel& model, const std::vector<Frame>& frames,
                         const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    const ModelConfig& mc = model.config();

    std::vector<size_t> usable;
    int64_t dropped = 0;
    for (size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].image.h != mc.height || frames[i].image.w != mc.width)
            throw std::invalid_argument("train: frame " + frames[i].id + " is " +
                                        std::to_string(frames[i].image.w) + "x" +
                                        std::to_string(frames[i].image.h) +
                                        ", config wants " + std::to_string(mc.width) + "x" +
                                        std::to_string(mc.height));
        if (cfg.drop_empty_gaze) {
            bool all_zero = true;
            for (float v : frames[i].gaze.data) all_zero &= (v == 0.0f);
            if (all_zero) {
                ++dropped;
                continue;
            }
        }
        usable.push_back(i);
    }
    if (usable.empty()) throw std::invalid_argument("train: empty dataset");

    std::vector<std::vector<float>> targets(frames.size());
    for (size_t i : usable) targets[i] = downsample_gaze(frames[i].gaze, mc.tokens);

    apply_freeze_mask(model.registry(), cfg.freeze);
    nn::Adam opt(model.registry(), cfg.adam);

    TrainResult result;
    result.frames_used = static_cast<int64_t>(usable.size());
    result.frames_dropped = dropped;

    ForwardTrace trace;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Seed-deterministic shuffle, fresh stream per epoch.
        std::vector<size_t> order = usable;
        Rng rng(mix_seed(cfg.seed, static_cast<uint64_t>(epoch), 0x7261696e));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(0, i - 1))]);

        double loss_sum = 0.0;
        int64_t loss_count = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            model.registry().zero_grad();
            double batch_loss = 0.0;
            for (size_t b = start; b < end; ++b) {
                const Frame& f = frames[order[b]];
                auto pred = model.forward(f.image, &trace);
                batch_loss += nn::bce_loss(pred, targets[order[b]]);
                auto grad = nn::bce_backward(pred, targets[order[b]]);
                // Mean over the batch.
                const float scale = 1.0f / static_cast<float>(end - start);
                for (float& g : grad) g *= scale;
                model.backward(trace, grad);
            }
            opt.step(model.registry());
            ++result.steps;
            loss_sum += batch_loss / static_cast<double>(end - start);
            ++loss_count;
        }
        result.history.push_back({epoch, loss_sum / static_cast<double>(loss_count)});
        if (on_epoch && cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0)
            on_epoch(epoch, model);
    }
    return result;
}

TrainResult train(CueingModel& model, const DatasetManifest& manifest, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    if (manifest.entries.empty()) throw std::invalid_argument("train: empty dataset");
    const ModelConfig& mc = model.config();
    std::vector<Frame> frames;
    frames.reserve(manifest.entries.size());
    for (size_t i = 0; i < manifest.entries.size(); ++i)
        frames.push_back(load_frame(manifest, i, mc.width, mc.height));
    return train_frames(model, frames, cfg, on_epoch);
}

DatasetManifest sample_finetune_subset(const DatasetManifest& manifest, double fraction,
                                       uint64_t seed) {
    if (manifest.entries.empty())
        throw std::invalid_argument("sample_finetune_subset: empty manifest");
    if (fraction <= 0.0 || fraction > 1.0)
        throw std::invalid_argument("sample_finetune_subset: fraction must be in (0, 1]");

    const size_t n = manifest.entries.size();
    const size_t k = static_cast<size_t>(
        std::ceil(fraction * static_cast<double>(n) - 1e-12));

    // Partial Fisher-Yates: the first k slots are a uniform sample.
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    Rng rng(seed);
    for (size_t i = 0; i < k; ++i)
        std::swap(idx[i], idx[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(i),
                                                                  static_cast<int64_t>(n - 1)))]);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());  // keep manifest order

    DatasetManifest out;
    out.root = manifest.root;
    for (size_t i : idx) out.entries.push_back(manifest.entries[i]);
    return out;
}

}  // namespace cueing
