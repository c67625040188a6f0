#pragma once

#include <string>
#include <vector>

#include "cueing/types.hpp"

namespace cueing {

struct ManifestEntry {
    std::string image_path;  // relative to root
    std::string gaze_path;   // relative to root
    std::vector<BBox> boxes;
};

// Ordered dataset listing. One record per line:
//   image=<relpath> gaze=<relpath> boxes=<cls,x1,y1,x2,y2;...>
// '#' begins a comment line; the boxes field may be empty.
struct DatasetManifest {
    std::string root;  // directory the relative paths resolve against
    std::vector<ManifestEntry> entries;

    std::string image_file(size_t i) const { return root + "/" + entries[i].image_path; }
    std::string gaze_file(size_t i) const { return root + "/" + entries[i].gaze_path; }
};

// Parses a manifest file; root is the file's parent directory. Malformed
// records raise with the offending line number; referenced files are checked
// for existence.
DatasetManifest load_manifest(const std::string& path);

void save_manifest(const DatasetManifest& manifest, const std::string& path);

std::string format_boxes(const std::vector<BBox>& boxes);

// Loads entry i of a manifest at the given target size (0 = native).
Frame load_frame(const DatasetManifest& manifest, size_t index, int target_w = 0,
                 int target_h = 0);

}  // namespace cueing
