#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cueing {

// Raw 8-bit decode result, interleaved pixels, 1 or 3 channels.
struct PngBuffer {
    int w = 0;
    int h = 0;
    int channels = 0;
    std::vector<uint8_t> data;
};

// Decodes a PNG. Grayscale stays 1-channel, everything else is expanded to
// 8-bit RGB (palette expanded, 16-bit stripped, alpha dropped).
PngBuffer load_png(const std::string& path);

// Writes interleaved 8-bit data; channels must be 1 (gray) or 3 (RGB).
// Fixed encoder settings so identical pixels give identical bytes.
void save_png(const std::string& path, int w, int h, int channels, const uint8_t* data);

}  // namespace cueing
