#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cueing/types.hpp"

namespace cueing {

enum class Interp { Bilinear, Bicubic };

// Expands T prediction points into a full-resolution map: the points form a
// sqrt(T) x sqrt(T) grid anchored at token centers, interpolated to H x W,
// then blurred with an isotropic Gaussian (sigma in pixels, truncated at
// 3*sigma, border-renormalized) and clamped to [0,1]. sigma <= 0 skips the blur.
GazeMap upsample_points(const std::vector<float>& points, int token_count, int h, int w,
                        double sigma, Interp interp = Interp::Bilinear);

// Separable Gaussian, kernel renormalized where it overhangs the border, so
// constants pass through unchanged.
GazeMap gaussian_blur(const GazeMap& map, double sigma);

// Default render sigma: W/64 pixels (20 px at 1280).
inline double default_render_sigma(int w) { return w / 64.0; }

// Map value -> RGB via the documented 256-entry table (docs/colormap.md).
std::array<uint8_t, 3> colormap_entry(int index);
std::array<float, 3> colormap(float v);

// Heat-colored composite: out = (1 - alpha) * image + alpha * colormap(map).
Image overlay(const Image& image, const GazeMap& map, float alpha);

}  // namespace cueing
