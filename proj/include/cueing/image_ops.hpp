#pragma once

#include <string>

#include "cueing/types.hpp"

namespace cueing {

// Bilinear resample with corner-aligned sampling: output corners hit input
// corners exactly, so resizing to the same extent is the identity.
Image resize_bilinear(const Image& src, int out_h, int out_w);
GazeMap resize_bilinear(const GazeMap& src, int out_h, int out_w);

// Per-pixel channel mean of a 3-channel map.
GazeMap gaze_from_rgb(const Image& rgb);

// Rescales a box by independent width/height ratios (floor on mins, ceil on
// maxes so containment is preserved), then clamps to the target extent.
BBox rescale_box(const BBox& b, int src_w, int src_h, int dst_w, int dst_h);

// Decodes image + gaze, scales bytes by 1/255, optionally resizes both to
// target extents (0 = keep native size), converts 3-channel gaze to gray by
// channel mean, and rescales + clamps the boxes.
Frame load_frame(const std::string& image_path, const std::string& gaze_path,
                 const std::vector<BBox>& boxes, const std::string& id, int target_w = 0,
                 int target_h = 0);

Image load_image_png(const std::string& path);
GazeMap load_gaze_png(const std::string& path);

// 8-bit grayscale PNG, byte = round(v * 255).
void save_gaze_map(const GazeMap& map, const std::string& path);
void save_image_png(const Image& image, const std::string& path);

}  // namespace cueing
