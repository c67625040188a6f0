#include "cueing/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cueing/tokenizer.hpp"

namespace cueing {

namespace {

// Catmull-Rom weights for the bicubic option.
double cubic_weight(double x) {
    x = std::fabs(x);
    if (x < 1.0) return 1.0 - 2.5 * x * x + 1.5 * x * x * x;
    if (x < 2.0) return 2.0 - 4.0 * x + 2.5 * x * x - 0.5 * x * x * x;
    return 0.0;
}

}  // namespace

GazeMap upsample_points(const std::vector<float>& points, int token_count, int h, int w,
                        double sigma, Interp interp) {
    int s = token_grid_side(token_count);
    if (static_cast<int>(points.size()) != token_count)
        throw std::invalid_argument("upsample: expected " + std::to_string(token_count) +
                                    " points, got " + std::to_string(points.size()));
    if (h < s || w < s)
        throw std::invalid_argument("upsample: target extent smaller than the token grid");

    // Grid value (r,c) sits at the center of token (r,c).
    const double cell_h = static_cast<double>(h) / s;
    const double cell_w = static_cast<double>(w) / s;

    GazeMap out(h, w);
    for (int y = 0; y < h; ++y) {
        double gy = (y + 0.5) / cell_h - 0.5;
        for (int x = 0; x < w; ++x) {
            double gx = (x + 0.5) / cell_w - 0.5;
            double v;
            if (interp == Interp::Bilinear) {
                int r0 = static_cast<int>(std::floor(gy));
                int c0 = static_cast<int>(std::floor(gx));
                double fy = gy - r0;
                double fx = gx - c0;
                auto at = [&](int r, int c) {
                    r = std::clamp(r, 0, s - 1);
                    c = std::clamp(c, 0, s - 1);
                    return static_cast<double>(points[static_cast<size_t>(r) * s + c]);
                };
                double top = at(r0, c0) * (1 - fx) + at(r0, c0 + 1) * fx;
                double bot = at(r0 + 1, c0) * (1 - fx) + at(r0 + 1, c0 + 1) * fx;
                v = top * (1 - fy) + bot * fy;
            } else {
                int r0 = static_cast<int>(std::floor(gy));
                int c0 = static_cast<int>(std::floor(gx));
                double acc = 0.0, wsum = 0.0;
                for (int dr = -1; dr <= 2; ++dr) {
                    for (int dc = -1; dc <= 2; ++dc) {
                        int r = std::clamp(r0 + dr, 0, s - 1);
                        int c = std::clamp(c0 + dc, 0, s - 1);
                        double wt = cubic_weight(gy - (r0 + dr)) * cubic_weight(gx - (c0 + dc));
                        acc += wt * points[static_cast<size_t>(r) * s + c];
                        wsum += wt;
                    }
                }
                v = acc / wsum;
            }
            out.at(y, x) = static_cast<float>(v);
        }
    }

    if (sigma > 0.0) out = gaussian_blur(out, sigma);
    for (float& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
    return out;
}

GazeMap gaussian_blur(const GazeMap& map, double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("gaussian_blur: sigma must be > 0");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
    for (int i = -radius; i <= radius; ++i)
        kernel[static_cast<size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));

    const int h = map.h, w = map.w;
    std::vector<double> tmp(static_cast<size_t>(h) * w);

    // Horizontal pass, kernel renormalized over the in-bounds support.
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0, wsum = 0.0;
            int lo = std::max(-radius, -x);
            int hi = std::min(radius, w - 1 - x);
            for (int i = lo; i <= hi; ++i) {
                double k = kernel[static_cast<size_t>(i + radius)];
                acc += k * map.at(y, x + i);
                wsum += k;
            }
            tmp[static_cast<size_t>(y) * w + x] = acc / wsum;
        }
    }
    GazeMap out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0, wsum = 0.0;
            int lo = std::max(-radius, -y);
            int hi = std::min(radius, h - 1 - y);
            for (int i = lo; i <= hi; ++i) {
                double k = kernel[static_cast<size_t>(i + radius)];
                acc += k * tmp[static_cast<size_t>(y + i) * w + x];
                wsum += k;
            }
            out.at(y, x) = static_cast<float>(acc / wsum);
        }
    }
    return out;
}

std::array<float, 3> colormap(float v) {
    // Piecewise-linear jet: each channel ramps over a quarter of the range.
    v = std::clamp(v, 0.0f, 1.0f);
    auto ramp = [](float x) { return std::clamp(x, 0.0f, 1.0f); };
    float r = ramp(std::min(4.0f * v - 1.5f, -4.0f * v + 4.5f));
    float g = ramp(std::min(4.0f * v - 0.5f, -4.0f * v + 3.5f));
    float b = ramp(std::min(4.0f * v + 0.5f, -4.0f * v + 2.5f));
    return {r, g, b};
}

std::array<uint8_t, 3> colormap_entry(int index) {
    if (index < 0 || index > 255) throw std::out_of_range("colormap: index must be in [0,255]");
    auto rgb = colormap(static_cast<float>(index) / 255.0f);
    return {static_cast<uint8_t>(std::lround(rgb[0] * 255.0f)),
            static_cast<uint8_t>(std::lround(rgb[1] * 255.0f)),
            static_cast<uint8_t>(std::lround(rgb[2] * 255.0f))};
}

Image overlay(const Image& image, const GazeMap& map, float alpha) {
    if (image.h != map.h || image.w != map.w)
        throw std::invalid_argument("overlay: image and map dims differ");
    if (alpha < 0.0f || alpha > 1.0f)
        throw std::invalid_argument("overlay: alpha must be in [0,1]");

    Image out(image.h, image.w);
    const size_t plane = static_cast<size_t>(image.h) * image.w;
    for (size_t i = 0; i < plane; ++i) {
        auto rgb = colormap(map.data[i]);
        for (int c = 0; c < 3; ++c)
            out.data[c * plane + i] =
                (1.0f - alpha) * image.data[c * plane + i] + alpha * rgb[static_cast<size_t>(c)];
    }
    return out;
}

}  // namespace cueing
