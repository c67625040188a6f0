#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cueing/adam.hpp"
#include "cueing/manifest.hpp"
#include "cueing/model.hpp"

namespace cueing {

enum class FreezeMask { None, Attention, AllExceptLinear };

FreezeMask parse_freeze_mask(const std::string& name);
std::string to_string(FreezeMask mask);

struct TrainConfig {
    int epochs = 1;
    int batch_size = 8;
    nn::AdamConfig adam;
    uint64_t seed = 0;
    bool drop_empty_gaze = false;
    FreezeMask freeze = FreezeMask::None;
    int eval_every = 0;  // epochs between on-the-fly train-set evals, 0 = off

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int64_t steps = 0;
    int64_t frames_used = 0;
    int64_t frames_dropped = 0;
};

// Sets trainable flags on the registry: None trains everything, Attention
// freezes the encoder blocks, AllExceptLinear trains only the point head.
void apply_freeze_mask(nn::Registry& registry, FreezeMask mask);

// Name sets the masks act on; {attention, head, rest} partition the registry.
bool is_attention_param(const std::string& name);
bool is_head_param(const std::string& name);

// Called after each epoch; wired to the eval cadence by the CLI.
using EpochCallback = std::function<void(int epoch, CueingModel& model)>;

// Mini-batch BCE training with Adam. Frames are loaded once at config
// resolution; shuffling is seed-deterministic per epoch.
TrainResult train(CueingModel& model, const DatasetManifest& manifest, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// In-memory variant used by tests and the trainer itself.
TrainResult train_frames(CueingModel& model, const std::vector<Frame>& frames,
                         const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// ceil(fraction * N) entries, uniform without replacement, original order.
DatasetManifest sample_finetune_subset(const DatasetManifest& manifest, double fraction,
                                       uint64_t seed);

}  // namespace cueing
