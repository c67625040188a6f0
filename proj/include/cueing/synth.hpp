#pragma once

#include <cstdint>
#include <string>

#include "cueing/manifest.hpp"
#include "cueing/types.hpp"

namespace cueing {

// Desk-scale synthetic dataset: colored rectangles as objects, gaze as a sum
// of Gaussian blobs centered inside a subset of boxes, optionally one
// distractor blob outside every box. Deterministic per seed; the distractor
// stream is independent of the object stream, so regenerating with
// distractor_blob_prob = 0 yields the identical objects and object blobs.
struct SynthSpec {
    int n_frames = 8;
    int width = 320;
    int height = 192;
    int objects_min = 2;
    int objects_max = 4;
    double distractor_blob_prob = 0.0;
    uint64_t seed = 0;
};

// One generated frame, before PNG quantization.
Frame synth_frame(const SynthSpec& spec, int index);

// Writes images/ gaze/ and manifest.txt under out_dir; returns the manifest.
DatasetManifest synth_dataset(const SynthSpec& spec, const std::string& out_dir);

}  // namespace cueing
