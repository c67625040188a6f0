#include "cueing/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cueing/png_io.hpp"

namespace cueing {

namespace {

// Samples one plane at (out_h x out_w); corner-aligned source coordinates.
void resample_plane(const float* src, int sh, int sw, float* dst, int dh, int dw) {
    const double ry = dh > 1 ? static_cast<double>(sh - 1) / (dh - 1) : 0.0;
    const double rx = dw > 1 ? static_cast<double>(sw - 1) / (dw - 1) : 0.0;
    for (int y = 0; y < dh; ++y) {
        double fy = y * ry;
        int y0 = static_cast<int>(fy);
        int y1 = std::min(y0 + 1, sh - 1);
        double wy = fy - y0;
        for (int x = 0; x < dw; ++x) {
            double fx = x * rx;
            int x0 = static_cast<int>(fx);
            int x1 = std::min(x0 + 1, sw - 1);
            double wx = fx - x0;
            double v00 = src[static_cast<size_t>(y0) * sw + x0];
            double v01 = src[static_cast<size_t>(y0) * sw + x1];
            double v10 = src[static_cast<size_t>(y1) * sw + x0];
            double v11 = src[static_cast<size_t>(y1) * sw + x1];
            double top = v00 + (v01 - v00) * wx;
            double bot = v10 + (v11 - v10) * wx;
            dst[static_cast<size_t>(y) * dw + x] = static_cast<float>(top + (bot - top) * wy);
        }
    }
}

uint8_t to_byte(float v) {
    float c = std::min(1.0f, std::max(0.0f, v));
    return static_cast<uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

std::optional<ObjectClass> parse_object_class(std::string_view name) {
    std::string norm(name);
    for (char& c : norm)
        if (c == '_') c = ' ';
    const auto& names = object_class_names();
    for (int i = 0; i < kNumObjectClasses; ++i)
        if (norm == names[static_cast<size_t>(i)]) return static_cast<ObjectClass>(i);
    return std::nullopt;
}

Image resize_bilinear(const Image& src, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize: target extent must be >= 1");
    Image dst(out_h, out_w);
    size_t splane = static_cast<size_t>(src.h) * src.w;
    size_t dplane = static_cast<size_t>(out_h) * out_w;
    for (int c = 0; c < 3; ++c)
        resample_plane(src.data.data() + c * splane, src.h, src.w, dst.data.data() + c * dplane,
                       out_h, out_w);
    return dst;
}

GazeMap resize_bilinear(const GazeMap& src, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize: target extent must be >= 1");
    GazeMap dst(out_h, out_w);
    resample_plane(src.data.data(), src.h, src.w, dst.data.data(), out_h, out_w);
    return dst;
}

GazeMap gaze_from_rgb(const Image& rgb) {
    GazeMap g(rgb.h, rgb.w);
    size_t plane = static_cast<size_t>(rgb.h) * rgb.w;
    for (size_t i = 0; i < plane; ++i)
        g.data[i] = (rgb.data[i] + rgb.data[i + plane] + rgb.data[i + 2 * plane]) / 3.0f;
    return g;
}

BBox rescale_box(const BBox& b, int src_w, int src_h, int dst_w, int dst_h) {
    double sx = static_cast<double>(dst_w) / src_w;
    double sy = static_cast<double>(dst_h) / src_h;
    BBox out = b;
    out.x1 = static_cast<int>(std::floor(b.x1 * sx));
    out.y1 = static_cast<int>(std::floor(b.y1 * sy));
    out.x2 = static_cast<int>(std::ceil(b.x2 * sx));
    out.y2 = static_cast<int>(std::ceil(b.y2 * sy));
    return out.clamped(dst_w, dst_h);
}

Image load_image_png(const std::string& path) {
    PngBuffer buf = load_png(path);
    Image img(buf.h, buf.w);
    size_t plane = static_cast<size_t>(buf.h) * buf.w;
    if (buf.channels == 3) {
        for (size_t i = 0; i < plane; ++i) {
            img.data[i] = buf.data[i * 3] / 255.0f;
            img.data[i + plane] = buf.data[i * 3 + 1] / 255.0f;
            img.data[i + 2 * plane] = buf.data[i * 3 + 2] / 255.0f;
        }
    } else {
        for (size_t i = 0; i < plane; ++i) {
            float v = buf.data[i] / 255.0f;
            img.data[i] = img.data[i + plane] = img.data[i + 2 * plane] = v;
        }
    }
    return img;
}

GazeMap load_gaze_png(const std::string& path) {
    PngBuffer buf = load_png(path);
    GazeMap g(buf.h, buf.w);
    size_t plane = static_cast<size_t>(buf.h) * buf.w;
    if (buf.channels == 1) {
        for (size_t i = 0; i < plane; ++i) g.data[i] = buf.data[i] / 255.0f;
    } else {
        // 3-channel source: per-pixel channel mean.
        for (size_t i = 0; i < plane; ++i) {
            int s = buf.data[i * 3] + buf.data[i * 3 + 1] + buf.data[i * 3 + 2];
            g.data[i] = static_cast<float>(s) / (3.0f * 255.0f);
        }
    }
    return g;
}

Frame load_frame(const std::string& image_path, const std::string& gaze_path,
                 const std::vector<BBox>& boxes, const std::string& id, int target_w,
                 int target_h) {
    Frame f;
    f.id = id;
    f.image = load_image_png(image_path);
    f.gaze = load_gaze_png(gaze_path);

    int src_w = f.image.w;
    int src_h = f.image.h;
    int tw = target_w > 0 ? target_w : src_w;
    int th = target_h > 0 ? target_h : src_h;

    if (tw != f.image.w || th != f.image.h) f.image = resize_bilinear(f.image, th, tw);
    if (tw != f.gaze.w || th != f.gaze.h) f.gaze = resize_bilinear(f.gaze, th, tw);

    f.boxes.reserve(boxes.size());
    for (const BBox& b : boxes) f.boxes.push_back(rescale_box(b, src_w, src_h, tw, th));
    return f;
}

void save_gaze_map(const GazeMap& map, const std::string& path) {
    std::vector<uint8_t> bytes(map.numel());
    for (size_t i = 0; i < map.data.size(); ++i) bytes[i] = to_byte(map.data[i]);
    save_png(path, map.w, map.h, 1, bytes.data());
}

void save_image_png(const Image& image, const std::string& path) {
    size_t plane = static_cast<size_t>(image.h) * image.w;
    std::vector<uint8_t> bytes(plane * 3);
    for (size_t i = 0; i < plane; ++i) {
        bytes[i * 3] = to_byte(image.data[i]);
        bytes[i * 3 + 1] = to_byte(image.data[i + plane]);
        bytes[i * 3 + 2] = to_byte(image.data[i + 2 * plane]);
    }
    save_png(path, image.w, image.h, 3, bytes.data());
}

}  // namespace cueing
