#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cueing/cleanse.hpp"
#include "cueing/image_ops.hpp"
#include "cueing/manifest.hpp"
#include "cueing/synth.hpp"

#include "test_util.hpp"

using namespace cueing;

namespace {

// Independent membership oracle: a pixel survives iff some box contains it.
bool oracle_kept(const std::vector<BBox>& boxes, int x, int y, int w, int h) {
    for (const BBox& box : boxes) {
        BBox b = box.clamped(w, h);
        if (x >= b.x1 && x < b.x2 && y >= b.y1 && y < b.y2) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("mask_image") {
    Image img = testutil::random_image(20, 30, 71);

    SUBCASE("no boxes zeroes everything") {
        Image out = mask_image(img, {});
        for (float v : out.data) CHECK(v == 0.0f);
    }
    SUBCASE("a box covering the whole image is the identity") {
        Image out = mask_image(img, {{ObjectClass::Car, 0, 0, 30, 20}});
        CHECK(out.data == img.data);
    }
    SUBCASE("two overlapping boxes: overlap copied once, matches the per-pixel oracle") {
        std::vector<BBox> boxes = {{ObjectClass::Car, 2, 3, 15, 12},
                                   {ObjectClass::Bus, 10, 8, 25, 18}};
        Image out = mask_image(img, boxes);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 20; ++y)
                for (int x = 0; x < 30; ++x) {
                    float want = oracle_kept(boxes, x, y, 30, 20) ? img.at(c, y, x) : 0.0f;
                    CHECK(out.at(c, y, x) == want);
                }
    }
}

TEST_CASE("mask_gaze") {
    GazeMap g = testutil::random_gaze(16, 16, 72);

    SUBCASE("no boxes zeroes the map") {
        GazeMap out = mask_gaze(g, {});
        for (float v : out.data) CHECK(v == 0.0f);
    }
    SUBCASE("a blob fully inside a box is unchanged") {
        GazeMap blob(16, 16);
        blob.at(8, 8) = 1.0f;
        blob.at(8, 9) = 0.5f;
        GazeMap out = mask_gaze(blob, {{ObjectClass::Car, 6, 6, 12, 12}});
        CHECK(out.data == blob.data);
    }
    SUBCASE("a blob straddling the box edge keeps only the inside half") {
        std::vector<BBox> boxes = {{ObjectClass::Car, 0, 0, 8, 16}};
        GazeMap out = mask_gaze(g, boxes);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) {
                float want = oracle_kept(boxes, x, y, 16, 16) ? g.at(y, x) : 0.0f;
                CHECK(out.at(y, x) == want);
            }
    }
    SUBCASE("masking is idempotent, exactly") {
        std::vector<BBox> boxes = {{ObjectClass::Car, 3, 2, 9, 14},
                                   {ObjectClass::Rider, 7, 0, 16, 5}};
        GazeMap once = mask_gaze(g, boxes);
        GazeMap twice = mask_gaze(once, boxes);
        CHECK(once.data == twice.data);
    }
    SUBCASE("adding a box never zeroes a previously kept pixel") {
        std::vector<BBox> boxes = {{ObjectClass::Car, 2, 2, 8, 8}};
        GazeMap small = mask_gaze(g, boxes);
        boxes.push_back({ObjectClass::Bus, 5, 5, 14, 14});
        GazeMap big = mask_gaze(g, boxes);
        for (size_t i = 0; i < small.data.size(); ++i)
            if (small.data[i] != 0.0f) CHECK(big.data[i] == small.data[i]);
    }
    SUBCASE("masked mass never exceeds the original") {
        std::vector<BBox> boxes = {{ObjectClass::Car, 1, 1, 10, 10}};
        GazeMap out = mask_gaze(g, boxes);
        double before = std::accumulate(g.data.begin(), g.data.end(), 0.0);
        double after = std::accumulate(out.data.begin(), out.data.end(), 0.0);
        CHECK(after <= before + 1e-9);
    }
}

TEST_CASE("cleanse_dataset") {
    testutil::TempDir src("cleanse_src");
    SynthSpec spec;
    spec.n_frames = 5;
    spec.seed = 31;
    spec.distractor_blob_prob = 0.7;
    auto manifest = synth_dataset(spec, src.str());

    testutil::TempDir out1("cleanse_out1");
    auto report = cleanse_dataset(manifest, out1.str());
    CHECK(report.frames_total == 5);

    SUBCASE("zero-gaze count matches a brute-force scan, frames retained") {
        int64_t expected = 0;
        for (size_t i = 0; i < manifest.entries.size(); ++i) {
            Frame f = load_frame(manifest, i);
            GazeMap masked = mask_gaze(f.gaze, f.boxes);
            bool zero = true;
            for (float v : masked.data) zero &= (v == 0.0f);
            expected += zero ? 1 : 0;
        }
        CHECK(report.frames_zero_gaze == expected);
        auto out_manifest = load_manifest(out1.file("manifest.txt"));
        CHECK(out_manifest.entries.size() == manifest.entries.size());  // nothing dropped
    }
    SUBCASE("cleansing twice is byte-identical") {
        auto cleansed = load_manifest(out1.file("manifest.txt"));
        testutil::TempDir out2("cleanse_out2");
        cleanse_dataset(cleansed, out2.str());
        for (const auto& e : manifest.entries) {
            CHECK(testutil::files_identical(out1.file(e.image_path), out2.file(e.image_path)));
            CHECK(testutil::files_identical(out1.file(e.gaze_path), out2.file(e.gaze_path)));
        }
        CHECK(testutil::files_identical(out1.file("manifest.txt"), out2.file("manifest.txt")));
        CHECK(testutil::files_identical(out1.file("cleanse_report.txt"),
                                        out2.file("cleanse_report.txt")));
    }
    SUBCASE("parallel cleansing matches the single-threaded output") {
        testutil::TempDir out4("cleanse_out4");
        cleanse_dataset(manifest, out4.str(), 4);
        for (const auto& e : manifest.entries)
            CHECK(testutil::files_identical(out1.file(e.gaze_path), out4.file(e.gaze_path)));
        CHECK(testutil::files_identical(out1.file("cleanse_report.txt"),
                                        out4.file("cleanse_report.txt")));
    }
}

TEST_CASE("an entry whose boxes miss all gaze is kept and counted") {
    testutil::TempDir tmp("zero_gaze");
    // Gaze blob far from the only box.
    Image img = testutil::random_image(20, 20, 73);
    GazeMap g(20, 20);
    g.at(2, 2) = 1.0f;
    save_image_png(img, tmp.file("i.png"));
    save_gaze_map(g, tmp.file("g.png"));
    std::ofstream(tmp.file("manifest.txt")) << "image=i.png gaze=g.png boxes=car,10,10,18,18\n";
    auto m = load_manifest(tmp.file("manifest.txt"));

    testutil::TempDir out("zero_gaze_out");
    auto report = cleanse_dataset(m, out.str());
    CHECK(report.frames_total == 1);
    CHECK(report.frames_zero_gaze == 1);
    auto out_m = load_manifest(out.file("manifest.txt"));
    REQUIRE(out_m.entries.size() == 1);  // retained, not dropped
    auto masked = load_gaze_png(out.file("g.png"));
    for (float v : masked.data) CHECK(v == 0.0f);
}
