#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "owd/etf.hpp"
#include "owd/geometry.hpp"
#include "owd/head.hpp"
#include "owd/sim.hpp"

namespace owd {

/// class_id of unknown-labeled detections.
inline constexpr int kUnknownClass = -1;

struct Detection {
    int image_id = 0;
    Box box;
    int class_id = kUnknownClass;
    double score = 0.0;
};

struct InferenceConfig {
    double score_threshold = 0.10;
    double nms_iou = 0.6;
};

/// Greedy per-class suppression, descending score; unknown is its own class.
std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold);

/// Full inference on one scene: forward, unknown-logit substitution (calibrated
/// when use_calibration, raw logsumexp otherwise), joint probabilities,
/// per-class NMS, score threshold.
std::vector<Detection> infer_scene(const HeadParams& params, const EtfFrame& frame,
                                   const Scene& scene, const InferenceConfig& config,
                                   bool use_calibration);

/// VOC-style AP for one class with all-point interpolation; detections may
/// span many images. gt_by_image maps image_id to that image's gt boxes.
/// Returns AP in [0,1]; caller must not pass an empty gt set.
double average_precision(std::vector<Detection> class_detections,
                         const std::map<int, std::vector<Box>>& gt_by_image,
                         double iou_threshold = 0.5);

struct UnknownRecall {
    double value = 0.0;  // percentage
    bool defined = false;
};

/// Fraction of unknown gt boxes matched by unknown-labeled detections at
/// IoU >= threshold, as a percentage. No unknown gt => value 0, defined false.
UnknownRecall unknown_recall(std::span<const Detection> detections,
                             const std::map<int, std::vector<Box>>& unknown_gt_by_image,
                             double iou_threshold = 0.5);

/// Harmonic mean of two percentages; 0 when both are 0.
double h_score(double known_map, double u_recall);

/// Mean head score of GT-matched proposals from task i's classes under the
/// sub-head of task j's classes. scenes_by_task[i] holds scenes whose known
/// objects come from task i+1's slice.
Mat energy_heatmap(const HeadParams& params, const World& world,
                   const std::vector<std::vector<Scene>>& scenes_by_task, double iou_threshold = 0.5);

struct ProjectedPoint {
    double x = 0.0;
    double y = 0.0;
    std::string label;
};

/// Projection onto the top two principal components (deterministic sign:
/// first nonzero loading positive). Rank-deficient input zeroes the second
/// component. Requires at least two points.
std::vector<ProjectedPoint> pca_project(const std::vector<Vec>& features,
                                        const std::vector<std::string>& labels);

struct ScorePairSummary {
    double mean_s_known = 0.0;
    double mean_s_unknown = 0.0;
    int count = 0;
};

struct PerClassScore {
    int class_id = -1;
    ScorePairSummary summary;
};

struct EvalReport {
    int task = 0;
    double previous_map = 0.0;  // percentages; 0 when no previous classes
    double current_map = 0.0;
    double known_map = 0.0;
    UnknownRecall u_recall;
    double h = 0.0;
    bool h_defined = false;
    Mat heatmap;  // tasks-seen x tasks-seen mean head scores
    std::vector<PerClassScore> per_class_scores;
    ScorePairSummary known_scores;    // GT-matched known proposals
    ScorePairSummary unknown_scores;  // proposals on held-out unknown objects
};

/// Full per-task evaluation over freshly generated test scenes (deterministic
/// given the world's master seed). Optionally also returns the raw detections
/// and a 2-D projection of every test proposal's feature, labeled
/// known/unknown/background by oracle matching.
EvalReport evaluate_task(const World& world, int task, const HeadParams& params,
                         const EtfFrame& frame, const InferenceConfig& config,
                         bool use_calibration, std::vector<Detection>* out_detections = nullptr,
                         std::vector<ProjectedPoint>* out_projection = nullptr);

}  // namespace owd
