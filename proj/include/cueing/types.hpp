#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cueing {

// The 10 driving-relevant object categories.
enum class ObjectClass : uint8_t {
    Pedestrian,
    Rider,
    Car,
    Truck,
    Bus,
    Train,
    Motorcycle,
    Bicycle,
    TrafficLight,
    TrafficSign,
};

inline constexpr int kNumObjectClasses = 10;

inline const std::array<std::string_view, kNumObjectClasses>& object_class_names() {
    static const std::array<std::string_view, kNumObjectClasses> names = {
        "pedestrian", "rider",      "car",     "truck",         "bus",
        "train",      "motorcycle", "bicycle", "traffic light", "traffic sign",
    };
    return names;
}

inline std::string_view to_string(ObjectClass c) {
    return object_class_names()[static_cast<size_t>(c)];
}

// Accepts the canonical names; underscores are treated as spaces so that
// whitespace-averse annotation files parse too.
std::optional<ObjectClass> parse_object_class(std::string_view name);

// Planar 3xHxW RGB image, values in [0,1].
template <typename T>
struct ImageT {
    int h = 0;
    int w = 0;
    std::vector<T> data;  // channel-major: data[c*h*w + y*w + x]

    ImageT() = default;
    ImageT(int h_, int w_) : h(h_), w(w_), data(static_cast<size_t>(3) * h_ * w_, T(0)) {}

    T& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * h + y) * w + x]; }
    const T& at(int c, int y, int x) const { return data[(static_cast<size_t>(c) * h + y) * w + x]; }
    size_t numel() const { return data.size(); }
};

// Single-channel HxW gaze map, values in [0,1].
template <typename T>
struct GazeMapT {
    int h = 0;
    int w = 0;
    std::vector<T> data;  // data[y*w + x]

    GazeMapT() = default;
    GazeMapT(int h_, int w_) : h(h_), w(w_), data(static_cast<size_t>(h_) * w_, T(0)) {}

    T& at(int y, int x) { return data[static_cast<size_t>(y) * w + x]; }
    const T& at(int y, int x) const { return data[static_cast<size_t>(y) * w + x]; }
    size_t numel() const { return data.size(); }
};

using Image = ImageT<float>;
using GazeMap = GazeMapT<float>;

// Axis-aligned box, pixel coordinates, [x1,x2) x [y1,y2).
struct BBox {
    ObjectClass cls = ObjectClass::Car;
    int x1 = 0;
    int y1 = 0;
    int x2 = 0;
    int y2 = 0;

    int width() const { return x2 - x1; }
    int height() const { return y2 - y1; }
    bool contains(int x, int y) const { return x >= x1 && x < x2 && y >= y1 && y < y2; }

    // Clamps to an image of extent w x h; may yield an empty box.
    BBox clamped(int w, int h) const {
        BBox b = *this;
        b.x1 = std::max(0, std::min(b.x1, w));
        b.x2 = std::max(0, std::min(b.x2, w));
        b.y1 = std::max(0, std::min(b.y1, h));
        b.y2 = std::max(0, std::min(b.y2, h));
        return b;
    }
    bool empty() const { return x2 <= x1 || y2 <= y1; }
};

// One sample: image, gaze map, annotated boxes.
struct Frame {
    Image image;
    GazeMap gaze;
    std::vector<BBox> boxes;
    std::string id;
};

}  // namespace cueing
