#include "cueing/cleanse.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <thread>
#include <vector>

#include "cueing/image_ops.hpp"

namespace fs = std::filesystem;

namespace cueing {

namespace {

std::vector<uint8_t> union_mask(int w, int h, const std::vector<BBox>& boxes) {
    std::vector<uint8_t> keep(static_cast<size_t>(w) * h, 0);
    for (const BBox& box : boxes) {
        BBox b = box.clamped(w, h);
        for (int y = b.y1; y < b.y2; ++y)
            std::fill(keep.begin() + static_cast<size_t>(y) * w + b.x1,
                      keep.begin() + static_cast<size_t>(y) * w + b.x2, uint8_t{1});
    }
    return keep;
}

}  // namespace

Image mask_image(const Image& image, const std::vector<BBox>& boxes) {
    auto keep = union_mask(image.w, image.h, boxes);
    Image out(image.h, image.w);
    const size_t plane = keep.size();
    for (int c = 0; c < 3; ++c)
        for (size_t i = 0; i < plane; ++i)
            if (keep[i]) out.data[c * plane + i] = image.data[c * plane + i];
    return out;
}

GazeMap mask_gaze(const GazeMap& gaze, const std::vector<BBox>& boxes) {
    auto keep = union_mask(gaze.w, gaze.h, boxes);
    GazeMap out(gaze.h, gaze.w);
    for (size_t i = 0; i < keep.size(); ++i)
        if (keep[i]) out.data[i] = gaze.data[i];
    return out;
}

CleanseReport cleanse_dataset(const DatasetManifest& manifest, const std::string& out_dir,
                              int threads) {
    DatasetManifest out = manifest;
    out.root = out_dir;

    // Per-entry results land in slots so the report is order-independent of
    // scheduling.
    std::vector<uint8_t> zero_gaze(manifest.entries.size(), 0);

    auto process = [&](size_t i) {
        Frame f = load_frame(manifest, i);  // native resolution
        Image masked_img = mask_image(f.image, f.boxes);
        GazeMap masked_gaze = mask_gaze(f.gaze, f.boxes);

        const ManifestEntry& e = manifest.entries[i];
        fs::path img_out = fs::path(out_dir) / e.image_path;
        fs::path gaze_out = fs::path(out_dir) / e.gaze_path;
        fs::create_directories(img_out.parent_path());
        fs::create_directories(gaze_out.parent_path());
        save_image_png(masked_img, img_out.string());
        save_gaze_map(masked_gaze, gaze_out.string());

        bool all_zero = true;
        for (float v : masked_gaze.data) all_zero &= (v == 0.0f);
        zero_gaze[i] = all_zero ? 1 : 0;
    };

    fs::create_directories(out_dir);
    if (threads <= 1) {
        for (size_t i = 0; i < manifest.entries.size(); ++i) process(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        int n = std::min<int>(threads, std::max<int>(1, static_cast<int>(manifest.entries.size())));
        for (int t = 0; t < n; ++t)
            pool.emplace_back([&] {
                for (size_t i = next++; i < manifest.entries.size(); i = next++) process(i);
            });
        for (auto& th : pool) th.join();
    }

    save_manifest(out, out_dir + "/manifest.txt");

    CleanseReport rep;
    rep.frames_total = static_cast<int64_t>(manifest.entries.size());
    for (size_t i = 0; i < zero_gaze.size(); ++i) {
        if (zero_gaze[i]) {
            ++rep.frames_zero_gaze;
            rep.zero_gaze_ids.push_back(fs::path(manifest.entries[i].image_path).stem().string());
        }
    }

    std::ofstream report(out_dir + "/cleanse_report.txt");
    report << "frames_total=" << rep.frames_total << "\n";
    report << "frames_zero_gaze=" << rep.frames_zero_gaze << "\n";
    for (const std::string& id : rep.zero_gaze_ids) report << "zero_gaze_id=" << id << "\n";
    return rep;
}

}  // namespace cueing
