#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cueing/manifest.hpp"
#include "cueing/model.hpp"
#include "cueing/render.hpp"
#include "cueing/types.hpp"

namespace cueing {

inline constexpr double kFocusThreshold = 0.5;
inline constexpr double kMetricEps = 1e-7;

// True iff the maximum map value strictly inside the box exceeds thr.
bool focus_decision(const GazeMap& map, const BBox& box, double thr = kFocusThreshold);

struct ObjectScore {
    double score = 0.0;  // max predicted gaze inside the box
    bool gt_focused = false;
    bool pred_focused = false;
};

struct ObjectLevelMetrics {
    int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy = 0.0;   // percent
    double precision = 0.0;  // percent
    double recall = 0.0;     // percent
    double f1 = 0.0;         // percent
    std::optional<double> auc;  // absent when ground truth is single-class
    int64_t objects() const { return tp + fp + tn + fn; }
};

// Confusion metrics plus rank-based (Mann-Whitney) AUC over per-object scores,
// ties counting 1/2. Throws on zero objects.
ObjectLevelMetrics object_level_metrics(const std::vector<ObjectScore>& objects);

// Labels + scores for every box of one frame from its ground-truth and
// predicted maps; degenerate boxes raise.
std::vector<ObjectScore> score_objects(const GazeMap& gt, const GazeMap& pred,
                                       const std::vector<BBox>& boxes,
                                       double thr = kFocusThreshold);

struct PixelLevelMetrics {
    double kl = 0.0;               // nats, ground truth as reference
    std::optional<double> cc;      // absent when either map is constant
};

// KL of eps-regularized, sum-normalized maps; CC is the Pearson correlation of
// the raw maps.
PixelLevelMetrics pixel_level_metrics(const GazeMap& pred, const GazeMap& gt);

enum class AucVariant { ObjectRoc, PixelRoc };

struct FrameMetrics {
    std::string id;
    PixelLevelMetrics pixel;
    ObjectLevelMetrics objects;
    int64_t n_objects = 0;
};

struct MetricReport {
    ObjectLevelMetrics object_level;     // pooled over all objects
    double kl_mean = 0.0;                // averaged over frames
    std::optional<double> cc_mean;       // frames with undefined CC skipped
    int64_t frames = 0;
    int64_t objects = 0;
    int64_t frames_cc_undefined = 0;
    std::vector<FrameMetrics> per_frame;
};

struct EvalParams {
    double sigma = -1.0;  // < 0 means default_render_sigma(width)
    Interp interp = Interp::Bilinear;
    AucVariant auc_variant = AucVariant::ObjectRoc;
    int threads = 1;
};

// Runs the model over every frame, renders predictions, and aggregates
// object-level (pooled) and pixel-level (per-frame averaged) metrics.
MetricReport evaluate(const CueingModel& model, const DatasetManifest& manifest,
                      const EvalParams& params = {});

// Aggregation core, exposed for fixture tests: frames paired with already
// rendered prediction maps.
MetricReport evaluate_maps(const std::vector<Frame>& frames,
                           const std::vector<GazeMap>& pred_maps,
                           AucVariant auc_variant = AucVariant::ObjectRoc);

// Flat key=value text report.
std::string format_report(const MetricReport& report);
// One JSON record per frame.
std::string format_frame_records(const MetricReport& report);

void write_report(const MetricReport& report, const std::string& report_path,
                  const std::string& frames_path);

// Rank-based AUC helper (ties 1/2); absent when labels are single-class.
std::optional<double> rank_auc(const std::vector<double>& scores,
                               const std::vector<bool>& labels);

}  // namespace cueing
