#include "cueing/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "cueing/image_ops.hpp"

namespace cueing {

bool focus_decision(const GazeMap& map, const BBox& box, double thr) {
    BBox b = box.clamped(map.w, map.h);
    if (b.empty())
        throw std::invalid_argument("focus_decision: box has zero area after clamping");
    float best = 0.0f;
    for (int y = b.y1; y < b.y2; ++y)
        for (int x = b.x1; x < b.x2; ++x) best = std::max(best, map.at(y, x));
    return static_cast<double>(best) > thr;
}

std::vector<ObjectScore> score_objects(const GazeMap& gt, const GazeMap& pred,
                                       const std::vector<BBox>& boxes, double thr) {
    std::vector<ObjectScore> out;
    out.reserve(boxes.size());
    for (const BBox& box : boxes) {
        BBox b = box.clamped(pred.w, pred.h);
        if (b.empty())
            throw std::invalid_argument("score_objects: box has zero area after clamping");
        ObjectScore s;
        float best = 0.0f;
        for (int y = b.y1; y < b.y2; ++y)
            for (int x = b.x1; x < b.x2; ++x) best = std::max(best, pred.at(y, x));
        s.score = static_cast<double>(best);
        s.pred_focused = s.score > thr;
        s.gt_focused = focus_decision(gt, box, thr);
        out.push_back(s);
    }
    return out;
}

std::optional<double> rank_auc(const std::vector<double>& scores,
                               const std::vector<bool>& labels) {
    int64_t pos = 0, neg = 0;
    for (bool l : labels) (l ? pos : neg)++;
    if (pos == 0 || neg == 0) return std::nullopt;

    // Sort once; equal scores share the midrank.
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t k = i; k <= j; ++k)
            if (labels[order[k]]) rank_sum_pos += midrank;
        i = j + 1;
    }
    double u = rank_sum_pos - static_cast<double>(pos) * (pos + 1) / 2.0;
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

ObjectLevelMetrics object_level_metrics(const std::vector<ObjectScore>& objects) {
    if (objects.empty()) throw std::invalid_argument("object_level_metrics: zero objects");

    ObjectLevelMetrics m;
    std::vector<double> scores;
    std::vector<bool> labels;
    scores.reserve(objects.size());
    labels.reserve(objects.size());
    for (const ObjectScore& o : objects) {
        if (o.gt_focused)
            (o.pred_focused ? m.tp : m.fn)++;
        else
            (o.pred_focused ? m.fp : m.tn)++;
        scores.push_back(o.score);
        labels.push_back(o.gt_focused);
    }

    const double n = static_cast<double>(m.objects());
    m.accuracy = 100.0 * static_cast<double>(m.tp + m.tn) / n;
    m.precision = m.tp + m.fp > 0 ? 100.0 * m.tp / static_cast<double>(m.tp + m.fp) : 0.0;
    m.recall = m.tp + m.fn > 0 ? 100.0 * m.tp / static_cast<double>(m.tp + m.fn) : 0.0;
    m.f1 = m.precision + m.recall > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    m.auc = rank_auc(scores, labels);
    return m;
}

PixelLevelMetrics pixel_level_metrics(const GazeMap& pred, const GazeMap& gt) {
    if (pred.h != gt.h || pred.w != gt.w)
        throw std::invalid_argument("pixel_level_metrics: dims differ");
    const size_t n = pred.numel();

    // KL on eps-shifted, sum-normalized maps; ground truth is the reference.
    double psum = 0.0, qsum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        psum += pred.data[i] + kMetricEps;
        qsum += gt.data[i] + kMetricEps;
    }
    double kl = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double p = (pred.data[i] + kMetricEps) / psum;
        double q = (gt.data[i] + kMetricEps) / qsum;
        kl += q * std::log(q / p);
    }

    // Pearson correlation of the raw maps.
    double mp = 0.0, mq = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mp += pred.data[i];
        mq += gt.data[i];
    }
    mp /= static_cast<double>(n);
    mq /= static_cast<double>(n);
    double spq = 0.0, spp = 0.0, sqq = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dp = pred.data[i] - mp;
        double dq = gt.data[i] - mq;
        spq += dp * dq;
        spp += dp * dp;
        sqq += dq * dq;
    }

    PixelLevelMetrics out;
    out.kl = kl;
    if (spp > 0.0 && sqq > 0.0) out.cc = spq / std::sqrt(spp * sqq);
    return out;
}

namespace {

// AUC over pixels: positives are ground-truth pixels above the focus
// threshold, scores are predicted values.
std::optional<double> pixel_auc(const std::vector<Frame>& frames,
                                const std::vector<GazeMap>& preds) {
    std::vector<double> scores;
    std::vector<bool> labels;
    for (size_t i = 0; i < frames.size(); ++i) {
        const GazeMap& gt = frames[i].gaze;
        const GazeMap& pr = preds[i];
        for (size_t j = 0; j < gt.numel(); ++j) {
            scores.push_back(pr.data[j]);
            labels.push_back(static_cast<double>(gt.data[j]) > kFocusThreshold);
        }
    }
    return rank_auc(scores, labels);
}

void parallel_frames(size_t count, int threads, const std::function<void(size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    int n = std::min<int>(threads, static_cast<int>(count));
    for (int t = 0; t < n; ++t)
        pool.emplace_back([&] {
            for (size_t i = next++; i < count; i = next++) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace

MetricReport evaluate_maps(const std::vector<Frame>& frames, const std::vector<GazeMap>& preds,
                           AucVariant auc_variant) {
    if (frames.size() != preds.size())
        throw std::invalid_argument("evaluate: frame/prediction count mismatch");
    if (frames.empty()) throw std::invalid_argument("evaluate: empty dataset");

    MetricReport rep;
    std::vector<ObjectScore> all_objects;
    double kl_sum = 0.0, cc_sum = 0.0;
    int64_t cc_frames = 0;

    for (size_t i = 0; i < frames.size(); ++i) {
        FrameMetrics fm;
        fm.id = frames[i].id;
        fm.pixel = pixel_level_metrics(preds[i], frames[i].gaze);
        kl_sum += fm.pixel.kl;
        if (fm.pixel.cc) {
            cc_sum += *fm.pixel.cc;
            ++cc_frames;
        } else {
            ++rep.frames_cc_undefined;
        }
        if (!frames[i].boxes.empty()) {
            auto scored = score_objects(frames[i].gaze, preds[i], frames[i].boxes);
            fm.n_objects = static_cast<int64_t>(scored.size());
            fm.objects = object_level_metrics(scored);
            all_objects.insert(all_objects.end(), scored.begin(), scored.end());
        }
        rep.per_frame.push_back(std::move(fm));
    }

    rep.frames = static_cast<int64_t>(frames.size());
    rep.objects = static_cast<int64_t>(all_objects.size());
    rep.kl_mean = kl_sum / static_cast<double>(frames.size());
    if (cc_frames > 0) rep.cc_mean = cc_sum / static_cast<double>(cc_frames);
    if (!all_objects.empty()) {
        rep.object_level = object_level_metrics(all_objects);
        if (auc_variant == AucVariant::PixelRoc) rep.object_level.auc = pixel_auc(frames, preds);
    }
    return rep;
}

MetricReport evaluate(const CueingModel& model, const DatasetManifest& manifest,
                      const EvalParams& params) {
    if (manifest.entries.empty()) throw std::invalid_argument("evaluate: empty dataset");
    const ModelConfig& cfg = model.config();
    double sigma = params.sigma >= 0.0 ? params.sigma : default_render_sigma(cfg.width);

    std::vector<Frame> frames(manifest.entries.size());
    std::vector<GazeMap> preds(manifest.entries.size());
    parallel_frames(manifest.entries.size(), params.threads, [&](size_t i) {
        frames[i] = load_frame(manifest, i, cfg.width, cfg.height);
        auto points = model.forward(frames[i].image);
        preds[i] = upsample_points(points, cfg.tokens, cfg.height, cfg.width, sigma,
                                   params.interp);
    });
    return evaluate_maps(frames, preds, params.auc_variant);
}

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(9);
    os << v;
    return os.str();
}

}  // namespace

std::string format_report(const MetricReport& r) {
    std::ostringstream os;
    os << "frames=" << r.frames << "\n";
    os << "objects=" << r.objects << "\n";
    os << "accuracy_pct=" << fmt_double(r.object_level.accuracy) << "\n";
    os << "precision_pct=" << fmt_double(r.object_level.precision) << "\n";
    os << "recall_pct=" << fmt_double(r.object_level.recall) << "\n";
    os << "f1_pct=" << fmt_double(r.object_level.f1) << "\n";
    os << "auc=" << (r.object_level.auc ? fmt_double(*r.object_level.auc) : "undefined") << "\n";
    os << "kl=" << fmt_double(r.kl_mean) << "\n";
    os << "cc=" << (r.cc_mean ? fmt_double(*r.cc_mean) : "undefined") << "\n";
    os << "tp=" << r.object_level.tp << "\n";
    os << "fp=" << r.object_level.fp << "\n";
    os << "tn=" << r.object_level.tn << "\n";
    os << "fn=" << r.object_level.fn << "\n";
    os << "frames_cc_undefined=" << r.frames_cc_undefined << "\n";
    return os.str();
}

std::string format_frame_records(const MetricReport& r) {
    std::ostringstream os;
    for (const FrameMetrics& f : r.per_frame) {
        nlohmann::json j;
        j["id"] = f.id;
        j["kl"] = f.pixel.kl;
        if (f.pixel.cc)
            j["cc"] = *f.pixel.cc;
        else
            j["cc"] = nullptr;
        j["objects"] = f.n_objects;
        if (f.n_objects > 0) {
            j["tp"] = f.objects.tp;
            j["fp"] = f.objects.fp;
            j["tn"] = f.objects.tn;
            j["fn"] = f.objects.fn;
        }
        os << j.dump() << "\n";
    }
    return os.str();
}

void write_report(const MetricReport& report, const std::string& report_path,
                  const std::string& frames_path) {
    std::ofstream rep(report_path);
    if (!rep) throw std::runtime_error("report: cannot write " + report_path);
    rep << format_report(report);
    std::ofstream fr(frames_path);
    if (!fr) throw std::runtime_error("report: cannot write " + frames_path);
    fr << format_frame_records(report);
}

}  // namespace cueing
