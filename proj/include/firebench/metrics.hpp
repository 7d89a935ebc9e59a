#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "firebench/annotations.hpp"

namespace firebench
{

/// Intersection over union of two positive-area boxes, in [0,1].
double iou(const BoundingBox& a, const BoundingBox& b) noexcept;

struct ClassCounts
{
    int class_id = 0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    /// Object detection has no enumerable negatives; kept for completeness.
    static constexpr std::size_t tn = 0;
};

struct DetectionOutcome
{
    bool true_positive = false;
    /// Index into the ground-truth list when true_positive.
    std::optional<std::size_t> matched_gt;
    double iou = 0.0;
};

/// Outcome of matching one image. `outcomes` is parallel to the detection
/// list as given (input order), `gt_matched` parallel to the ground truth.
struct MatchResult
{
    std::vector<DetectionOutcome> outcomes;
    std::vector<bool> gt_matched;
    /// Sorted by class id; only classes that occur in gt or detections.
    std::vector<ClassCounts> per_class;

    const ClassCounts* counts_for(int class_id) const noexcept;
};

/// Greedy class-aware matching. Detections are visited by descending
/// confidence (ties keep input order); each takes the unmatched same-class
/// ground truth with the highest IoU, provided IoU >= threshold.
MatchResult match_detections(std::span<const GroundTruthInstance> gt,
                             std::span<const Detection> dets,
                             double iou_threshold);

double precision(std::size_t tp, std::size_t fp);
double recall(std::size_t tp, std::size_t fn);

struct PRPoint
{
    double recall = 0.0;
    double precision = 0.0;
    /// Confidence of the detection that produced this point; the anchor uses 1.
    double confidence = 1.0;
    bool operator==(const PRPoint&) const = default;
};

struct PRCurve
{
    int class_id = 0;
    std::size_t n_ground_truth = 0;
    /// First point is always the (r=0, p=1) anchor.
    std::vector<PRPoint> points;
};

enum class ApMethod
{
    Envelope, ///< all-points monotone envelope, exact rectangle integration
    Coco101,  ///< envelope sampled at 101 recall levels
};

const char* to_string(ApMethod method) noexcept;
ApMethod parse_ap_method(const std::string& text);

struct APResult
{
    int class_id = 0;
    std::string class_name;
    double ap = 0.0;
    ApMethod method = ApMethod::Envelope;
    PRCurve curve;
};

struct EvalOptions
{
    double iou_threshold = 0.5;
    ApMethod method = ApMethod::Envelope;
    /// Drop classes without ground truth (with a warning) instead of scoring them 0.
    bool exclude_empty_classes = true;
    /// Worker threads for per-image matching; 0 or 1 runs sequentially.
    unsigned threads = 1;
};

struct EvalReport
{
    double iou_threshold = 0.5;
    ApMethod method = ApMethod::Envelope;
    std::vector<APResult> per_class;
    double map = 0.0;
    std::vector<std::string> warnings;

    const APResult* find(const std::string& class_name) const noexcept;
};

/// Precision/recall over all detections of one class pooled across images.
/// Throws NoPositives when the class has no ground truth.
PRCurve pr_curve(std::span<const ImageRecord> images, int class_id, double iou_threshold);

/// Monotone envelope of a curve's precision: each value replaced by the
/// maximum precision at any later (higher or equal recall) point.
std::vector<double> precision_envelope(const PRCurve& curve);

APResult average_precision(const PRCurve& curve, ApMethod method = ApMethod::Envelope);

double mean_ap(std::span<const APResult> aps);
double mean_ap(std::span<const double> aps);

EvalReport evaluate(std::span<const ImageRecord> images, const ClassTable& classes, const EvalOptions& options = {});

} // namespace firebench
