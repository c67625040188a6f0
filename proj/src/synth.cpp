#include "cueing/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "cueing/image_ops.hpp"
#include "cueing/rng.hpp"

namespace fs = std::filesystem;

namespace cueing {

namespace {

// Object fill colors; distinct per object index within a frame.
constexpr float kPalette[10][3] = {
    {0.85f, 0.30f, 0.25f}, {0.25f, 0.55f, 0.85f}, {0.30f, 0.75f, 0.35f}, {0.90f, 0.75f, 0.20f},
    {0.65f, 0.35f, 0.80f}, {0.90f, 0.50f, 0.15f}, {0.20f, 0.75f, 0.75f}, {0.80f, 0.40f, 0.60f},
    {0.55f, 0.65f, 0.25f}, {0.45f, 0.45f, 0.90f},
};

constexpr double kBoxMinFrac = 0.28;  // box extent range, fraction of min(W,H)
constexpr double kBoxMaxFrac = 0.42;
constexpr double kBlobSigmaFrac = 0.45;   // blob sigma over min(box w, box h)
constexpr double kCenterJitter = 0.15;    // blob center offset, fraction of box extent
constexpr double kFocusProb = 0.6;        // chance a box carries a gaze blob

// Adds a Gaussian blob (peak 1, truncated at 3 sigma) centered at (cx, cy).
void add_blob(GazeMap& map, double cx, double cy, double sigma) {
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy)) - r);
    const int y1 = std::min(map.h - 1, static_cast<int>(std::ceil(cy)) + r);
    const int x0 = std::max(0, static_cast<int>(std::floor(cx)) - r);
    const int x1 = std::min(map.w - 1, static_cast<int>(std::ceil(cx)) + r);
    const double lim2 = 9.0 * sigma * sigma;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            if (d2 > lim2) continue;
            map.at(y, x) += static_cast<float>(std::exp(-0.5 * d2 / (sigma * sigma)));
        }
    }
}

}  // namespace

Frame synth_frame(const SynthSpec& spec, int index) {
    // Separate streams: regenerating without distractors must not disturb
    // the object layout.
    Rng obj_rng(mix_seed(spec.seed, static_cast<uint64_t>(index), 0));
    Rng dis_rng(mix_seed(spec.seed, static_cast<uint64_t>(index), 1));

    Frame f;
    {
        std::ostringstream id;
        id << "frame_" << std::setw(5) << std::setfill('0') << index;
        f.id = id.str();
    }
    f.image = Image(spec.height, spec.width);
    f.gaze = GazeMap(spec.height, spec.width);

    // Flat gray background with a per-frame brightness.
    float bg = static_cast<float>(0.08 + 0.06 * obj_rng.uniform());
    std::fill(f.image.data.begin(), f.image.data.end(), bg);

    const int base = std::min(spec.width, spec.height);
    const int lo = std::max(8, static_cast<int>(base * kBoxMinFrac));
    const int hi = std::max(lo, static_cast<int>(base * kBoxMaxFrac));
    const int count =
        static_cast<int>(obj_rng.uniform_int(spec.objects_min, std::max(spec.objects_min,
                                                                        spec.objects_max)));

    const size_t plane = static_cast<size_t>(spec.height) * spec.width;
    for (int i = 0; i < count; ++i) {
        int bw = static_cast<int>(obj_rng.uniform_int(lo, hi));
        int bh = static_cast<int>(obj_rng.uniform_int(lo, hi));
        bw = std::min(bw, spec.width);
        bh = std::min(bh, spec.height);

        BBox b;
        b.cls = static_cast<ObjectClass>(obj_rng.uniform_int(0, kNumObjectClasses - 1));
        // Keep box centers apart so blobs rarely stack.
        for (int attempt = 0; attempt < 30; ++attempt) {
            b.x1 = static_cast<int>(obj_rng.uniform_int(0, spec.width - bw));
            b.y1 = static_cast<int>(obj_rng.uniform_int(0, spec.height - bh));
            b.x2 = b.x1 + bw;
            b.y2 = b.y1 + bh;
            bool ok = true;
            for (const BBox& prev : f.boxes) {
                double dx = (b.x1 + b.x2) * 0.5 - (prev.x1 + prev.x2) * 0.5;
                double dy = (b.y1 + b.y2) * 0.5 - (prev.y1 + prev.y2) * 0.5;
                double min_sep = 0.45 * (std::min(bw, bh) + std::min(prev.width(), prev.height()));
                if (dx * dx + dy * dy < min_sep * min_sep) {
                    ok = false;
                    break;
                }
            }
            if (ok) break;
        }

        for (int y = b.y1; y < b.y2; ++y) {
            for (int x = b.x1; x < b.x2; ++x) {
                size_t at = static_cast<size_t>(y) * spec.width + x;
                f.image.data[at] = kPalette[i % 10][0];
                f.image.data[at + plane] = kPalette[i % 10][1];
                f.image.data[at + 2 * plane] = kPalette[i % 10][2];
            }
        }
        f.boxes.push_back(b);
    }

    // Gaze blobs inside a random subset of boxes.
    for (const BBox& b : f.boxes) {
        if (!obj_rng.bernoulli(kFocusProb)) continue;
        double cx = (b.x1 + b.x2) * 0.5 + obj_rng.uniform(-kCenterJitter, kCenterJitter) * b.width();
        double cy =
            (b.y1 + b.y2) * 0.5 + obj_rng.uniform(-kCenterJitter, kCenterJitter) * b.height();
        double sigma = kBlobSigmaFrac * std::min(b.width(), b.height());
        add_blob(f.gaze, cx, cy, sigma);
    }

    // Optional distractor centered outside every box.
    if (dis_rng.bernoulli(spec.distractor_blob_prob)) {
        double sigma = dis_rng.uniform(0.06, 0.10) * base;
        for (int attempt = 0; attempt < 100; ++attempt) {
            int cx = static_cast<int>(dis_rng.uniform_int(0, spec.width - 1));
            int cy = static_cast<int>(dis_rng.uniform_int(0, spec.height - 1));
            bool inside = false;
            for (const BBox& b : f.boxes) inside |= b.contains(cx, cy);
            if (inside) continue;
            add_blob(f.gaze, cx, cy, sigma);
            break;
        }
    }

    float mx = 0.0f;
    for (float v : f.gaze.data) mx = std::max(mx, v);
    if (mx > 1.0f)
        for (float& v : f.gaze.data) v /= mx;
    return f;
}

DatasetManifest synth_dataset(const SynthSpec& spec, const std::string& out_dir) {
    fs::create_directories(fs::path(out_dir) / "images");
    fs::create_directories(fs::path(out_dir) / "gaze");

    DatasetManifest m;
    m.root = out_dir;
    for (int i = 0; i < spec.n_frames; ++i) {
        Frame f = synth_frame(spec, i);
        ManifestEntry e;
        e.image_path = "images/" + f.id + ".png";
        e.gaze_path = "gaze/" + f.id + ".png";
        e.boxes = f.boxes;
        save_image_png(f.image, out_dir + "/" + e.image_path);
        save_gaze_map(f.gaze, out_dir + "/" + e.gaze_path);
        m.entries.push_back(std::move(e));
    }
    save_manifest(m, out_dir + "/manifest.txt");
    return m;
}

}  // namespace cueing
