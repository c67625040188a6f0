#include "cueing/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cueing/image_ops.hpp"

namespace fs = std::filesystem;

namespace cueing {

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& why) {
    throw std::runtime_error("manifest " + path + ":" + std::to_string(line) + ": " + why);
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Extracts the value of `key=` up to the next known key marker or end of line.
std::string field(const std::string& line, const std::string& key, const std::string& path,
                  int lineno) {
    size_t pos = line.find(key + "=");
    if (pos == std::string::npos) parse_fail(path, lineno, "missing field '" + key + "='");
    size_t start = pos + key.size() + 1;
    size_t end = line.size();
    for (const char* marker : {" image=", " gaze=", " boxes="}) {
        size_t m = line.find(marker, start);
        if (m != std::string::npos && m < end) end = m;
    }
    return trim(line.substr(start, end - start));
}

std::vector<BBox> parse_boxes(const std::string& text, const std::string& path, int lineno) {
    std::vector<BBox> boxes;
    if (text.empty()) return boxes;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        item = trim(item);
        if (item.empty()) continue;
        size_t c = item.find(',');
        if (c == std::string::npos) parse_fail(path, lineno, "malformed box '" + item + "'");
        std::string cls_name = trim(item.substr(0, c));
        auto cls = parse_object_class(cls_name);
        if (!cls) parse_fail(path, lineno, "unknown object class '" + cls_name + "'");

        int coords[4];
        std::string rest = item.substr(c + 1);
        std::stringstream cs(rest);
        std::string num;
        int n = 0;
        while (std::getline(cs, num, ',')) {
            if (n >= 4) parse_fail(path, lineno, "too many box coordinates");
            try {
                coords[n++] = std::stoi(trim(num));
            } catch (const std::exception&) {
                parse_fail(path, lineno, "bad box coordinate '" + num + "'");
            }
        }
        if (n != 4) parse_fail(path, lineno, "expected 4 box coordinates");

        BBox b;
        b.cls = *cls;
        b.x1 = std::max(0, coords[0]);
        b.y1 = std::max(0, coords[1]);
        b.x2 = coords[2];
        b.y2 = coords[3];
        if (b.x2 <= b.x1) parse_fail(path, lineno, "box has x2 <= x1");
        if (b.y2 <= b.y1) parse_fail(path, lineno, "box has y2 <= y1");
        boxes.push_back(b);
    }
    return boxes;
}

}  // namespace

std::string format_boxes(const std::vector<BBox>& boxes) {
    std::ostringstream os;
    for (size_t i = 0; i < boxes.size(); ++i) {
        if (i) os << ";";
        os << to_string(boxes[i].cls) << "," << boxes[i].x1 << "," << boxes[i].y1 << ","
           << boxes[i].x2 << "," << boxes[i].y2;
    }
    return os.str();
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest: cannot open " + path);

    DatasetManifest m;
    fs::path p(path);
    m.root = p.has_parent_path() ? p.parent_path().string() : ".";

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;

        ManifestEntry e;
        e.image_path = field(t, "image", path, lineno);
        e.gaze_path = field(t, "gaze", path, lineno);
        if (e.image_path.empty()) parse_fail(path, lineno, "empty image path");
        if (e.gaze_path.empty()) parse_fail(path, lineno, "empty gaze path");
        e.boxes = parse_boxes(field(t, "boxes", path, lineno), path, lineno);

        for (const std::string& rel : {e.image_path, e.gaze_path})
            if (!fs::exists(fs::path(m.root) / rel))
                parse_fail(path, lineno, "referenced file does not exist: " + rel);
        m.entries.push_back(std::move(e));
    }
    return m;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("manifest: cannot write " + path);
    for (const ManifestEntry& e : manifest.entries)
        out << "image=" << e.image_path << " gaze=" << e.gaze_path
            << " boxes=" << format_boxes(e.boxes) << "\n";
    if (!out) throw std::runtime_error("manifest: write failed for " + path);
}

Frame load_frame(const DatasetManifest& manifest, size_t index, int target_w, int target_h) {
    const ManifestEntry& e = manifest.entries.at(index);
    fs::path id(e.image_path);
    return load_frame(manifest.root + "/" + e.image_path, manifest.root + "/" + e.gaze_path,
                      e.boxes, id.stem().string(), target_w, target_h);
}

}  // namespace cueing
