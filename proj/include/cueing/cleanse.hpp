#pragma once

#include <string>
#include <vector>

#include "cueing/manifest.hpp"
#include "cueing/types.hpp"

namespace cueing {

// Pixels inside the union of the boxes are kept, everything else is zeroed.
Image mask_image(const Image& image, const std::vector<BBox>& boxes);
GazeMap mask_gaze(const GazeMap& gaze, const std::vector<BBox>& boxes);

struct CleanseReport {
    int64_t frames_total = 0;
    int64_t frames_zero_gaze = 0;  // masked gaze entirely zero
    std::vector<std::string> zero_gaze_ids;
};

// Applies the box masks to every entry, mirroring relative paths under
// out_dir, writes the new manifest and a cleanse_report.txt. Frames whose
// masked gaze is all-zero are kept and counted.
CleanseReport cleanse_dataset(const DatasetManifest& manifest, const std::string& out_dir,
                              int threads = 1);

}  // namespace cueing
