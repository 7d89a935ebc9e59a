#include "firebench/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

#include "firebench/error.hpp"

namespace firebench
{

double iou(const BoundingBox& a, const BoundingBox& b) noexcept
{
    const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
    const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
    if (iw <= 0.0 || ih <= 0.0)
        return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0)
        return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

const ClassCounts* MatchResult::counts_for(int class_id) const noexcept
{
    auto it = std::lower_bound(per_class.begin(), per_class.end(), class_id,
                               [](const ClassCounts& c, int id) { return c.class_id < id; });
    return (it != per_class.end() && it->class_id == class_id) ? &*it : nullptr;
}

MatchResult match_detections(std::span<const GroundTruthInstance> gt, std::span<const Detection> dets,
                             double iou_threshold)
{
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
        throw Error(ErrorKind::Precondition, "iou threshold must lie in (0,1]");

    MatchResult result;
    result.outcomes.resize(dets.size());
    result.gt_matched.assign(gt.size(), false);

    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });

    for (std::size_t d : order) {
        const Detection& det = dets[d];
        double best = -1.0;
        std::size_t best_gt = 0;
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (result.gt_matched[g] || gt[g].class_id != det.class_id)
                continue;
            const double overlap = iou(det.box, gt[g].box);
            if (overlap > best) {
                best = overlap;
                best_gt = g;
            }
        }
        DetectionOutcome& out = result.outcomes[d];
        if (best >= iou_threshold) {
            out.true_positive = true;
            out.matched_gt = best_gt;
            out.iou = best;
            result.gt_matched[best_gt] = true;
        } else {
            out.iou = std::max(best, 0.0);
        }
    }

    auto counts = [&](int id) -> ClassCounts& {
        auto it = std::lower_bound(result.per_class.begin(), result.per_class.end(), id,
                                   [](const ClassCounts& c, int v) { return c.class_id < v; });
        if (it == result.per_class.end() || it->class_id != id)
            it = result.per_class.insert(it, ClassCounts{id});
        return *it;
    };
    for (std::size_t d = 0; d < dets.size(); ++d) {
        ClassCounts& c = counts(dets[d].class_id);
        (result.outcomes[d].true_positive ? c.tp : c.fp) += 1;
    }
    for (std::size_t g = 0; g < gt.size(); ++g) {
        ClassCounts& c = counts(gt[g].class_id);
        if (!result.gt_matched[g])
            c.fn += 1;
    }
    return result;
}

double precision(std::size_t tp, std::size_t fp)
{
    if (tp + fp == 0)
        throw Error(ErrorKind::Precondition, "precision undefined with no predictions (tp + fp = 0)");
    return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double recall(std::size_t tp, std::size_t fn)
{
    if (tp + fn == 0)
        throw Error(ErrorKind::NoPositives, "recall undefined with no ground truth (tp + fn = 0)");
    return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

const char* to_string(ApMethod method) noexcept
{
    return method == ApMethod::Coco101 ? "coco101" : "envelope";
}

ApMethod parse_ap_method(const std::string& text)
{
    if (text == "envelope")
        return ApMethod::Envelope;
    if (text == "coco101")
        return ApMethod::Coco101;
    throw Error(ErrorKind::Parse, "unknown AP method '" + text + "' (expected envelope or coco101)");
}

const APResult* EvalReport::find(const std::string& class_name) const noexcept
{
    for (const auto& r : per_class)
        if (r.class_name == class_name)
            return &r;
    return nullptr;
}

namespace
{

struct RankedDetection
{
    double confidence;
    const std::string* image_id;
    std::size_t index;
    bool true_positive;
};

std::size_t count_ground_truth(std::span<const ImageRecord> images, int class_id)
{
    std::size_t n = 0;
    for (const auto& img : images)
        n += static_cast<std::size_t>(std::count_if(img.ground_truth.begin(), img.ground_truth.end(),
                                                    [&](const GroundTruthInstance& g) { return g.class_id == class_id; }));
    return n;
}

// Reduction over already-matched images; always walks images in dataset order.
PRCurve curve_from_matches(std::span<const ImageRecord> images, std::span<const MatchResult> matches, int class_id)
{
    PRCurve curve;
    curve.class_id = class_id;
    curve.n_ground_truth = count_ground_truth(images, class_id);
    if (curve.n_ground_truth == 0)
        throw Error(ErrorKind::NoPositives, "class " + std::to_string(class_id) + " has no ground-truth instances");

    std::vector<RankedDetection> ranked;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& dets = images[i].detections;
        for (std::size_t d = 0; d < dets.size(); ++d) {
            if (dets[d].class_id == class_id)
                ranked.push_back({dets[d].confidence, &images[i].image_id, d, matches[i].outcomes[d].true_positive});
        }
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedDetection& a, const RankedDetection& b) {
        if (a.confidence != b.confidence)
            return a.confidence > b.confidence;
        if (*a.image_id != *b.image_id)
            return *a.image_id < *b.image_id;
        return a.index < b.index;
    });

    curve.points.reserve(ranked.size() + 1);
    curve.points.push_back({0.0, 1.0, 1.0});
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (const auto& r : ranked) {
        (r.true_positive ? tp : fp) += 1;
        curve.points.push_back({recall(tp, curve.n_ground_truth - tp), precision(tp, fp), r.confidence});
    }
    return curve;
}

std::vector<MatchResult> match_all(std::span<const ImageRecord> images, double iou_threshold, unsigned threads)
{
    std::vector<MatchResult> matches(images.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            matches[i] = match_detections(images[i].ground_truth, images[i].detections, iou_threshold);
    };

    if (threads <= 1 || images.size() < 2) {
        work(0, images.size());
        return matches;
    }

    // Validate once up front so worker threads never throw.
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
        throw Error(ErrorKind::Precondition, "iou threshold must lie in (0,1]");

    const std::size_t n_workers = std::min<std::size_t>(threads, images.size());
    const std::size_t chunk = (images.size() + n_workers - 1) / n_workers;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(images.size(), begin + chunk);
        if (begin < end)
            pool.emplace_back(work, begin, end);
    }
    pool.clear();
    return matches;
}

} // namespace

PRCurve pr_curve(std::span<const ImageRecord> images, int class_id, double iou_threshold)
{
    auto matches = match_all(images, iou_threshold, 1);
    return curve_from_matches(images, matches, class_id);
}

std::vector<double> precision_envelope(const PRCurve& curve)
{
    std::vector<double> env(curve.points.size());
    double running = 0.0;
    for (std::size_t i = curve.points.size(); i-- > 0;) {
        running = std::max(running, curve.points[i].precision);
        env[i] = running;
    }
    return env;
}

APResult average_precision(const PRCurve& curve, ApMethod method)
{
    APResult result;
    result.class_id = curve.class_id;
    result.method = method;
    result.curve = curve;

    const auto& pts = curve.points;
    const auto env = precision_envelope(curve);

    if (method == ApMethod::Envelope) {
        double area = 0.0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            area += (pts[i].recall - pts[i - 1].recall) * env[i];
        result.ap = std::clamp(area, 0.0, 1.0);
        return result;
    }

    // 101-point sampling skips the synthetic anchor so a class with no
    // detections scores 0 rather than 1/101.
    double sum = 0.0;
    std::size_t first = 1;
    for (int s = 0; s <= 100; ++s) {
        const double level = s / 100.0;
        while (first < pts.size() && pts[first].recall < level)
            ++first;
        if (first < pts.size())
            sum += env[first];
    }
    result.ap = std::clamp(sum / 101.0, 0.0, 1.0);
    return result;
}

double mean_ap(std::span<const double> aps)
{
    if (aps.empty())
        throw Error(ErrorKind::Precondition, "mean AP of an empty class list");
    double sum = 0.0;
    for (double v : aps)
        sum += v;
    return sum / static_cast<double>(aps.size());
}

double mean_ap(std::span<const APResult> aps)
{
    std::vector<double> values;
    values.reserve(aps.size());
    for (const auto& a : aps)
        values.push_back(a.ap);
    return mean_ap(std::span<const double>(values));
}

EvalReport evaluate(std::span<const ImageRecord> images, const ClassTable& classes, const EvalOptions& options)
{
    EvalReport report;
    report.iou_threshold = options.iou_threshold;
    report.method = options.method;

    const auto matches = match_all(images, options.iou_threshold, options.threads);

    for (const auto& cls : classes.classes()) {
        if (count_ground_truth(images, cls.id) == 0) {
            if (options.exclude_empty_classes) {
                report.warnings.push_back("class '" + cls.name + "' has no ground truth; excluded from mAP");
                continue;
            }
            APResult empty;
            empty.class_id = cls.id;
            empty.class_name = cls.name;
            empty.method = options.method;
            empty.curve.class_id = cls.id;
            empty.curve.points.push_back({0.0, 1.0, 1.0});
            report.warnings.push_back("class '" + cls.name + "' has no ground truth; scored 0");
            report.per_class.push_back(std::move(empty));
            continue;
        }
        APResult r = average_precision(curve_from_matches(images, matches, cls.id), options.method);
        r.class_name = cls.name;
        report.per_class.push_back(std::move(r));
    }

    if (report.per_class.empty())
        throw Error(ErrorKind::NoPositives, "no class has ground truth; mAP undefined");
    report.map = mean_ap(std::span<const APResult>(report.per_class));
    return report;
}

} // namespace firebench
