#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mks/boxgeom.hpp"

namespace mks {

struct DetectionRecord {
    std::string image_id;
    int class_id = 0;
    AABox box{0.5, 0.5, 1.0, 1.0};
    double confidence = 1.0;
};

/// Ground truths share the record layout; confidence is ignored.
using GroundTruthRecord = DetectionRecord;

struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
    friend bool operator==(const Counts&, const Counts&) = default;
};

struct RatePair {
    double precision = 0.0;
    double recall = 0.0;
    bool precision_defined = true; // TP + FP > 0
    bool recall_defined = true;    // TP + FN > 0
};

RatePair precision_recall(const Counts& c) noexcept;

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
    double confidence = 0.0;
};

/// Matching outcome for one class.
struct ClassMatch {
    Counts counts;
    std::size_t num_gt = 0;
    /// Detections of this class in rank order (confidence descending, ties by
    /// input order) with their TP flag.
    std::vector<std::size_t> ranked;
    std::vector<bool> is_tp;
};

/// Greedy protocol: per class, detections by descending confidence each claim
/// the highest-IoU still-unclaimed ground truth of the same image whose IoU is
/// at least the threshold; otherwise they are false positives.
std::map<int, ClassMatch> match_detections(std::span<const DetectionRecord> dets,
                                           std::span<const GroundTruthRecord> gts, double iou_threshold = 0.5);

std::map<int, Counts> confusion_counts(std::span<const DetectionRecord> dets, std::span<const GroundTruthRecord> gts,
                                       double iou_threshold = 0.5);

/// Cumulative precision/recall after each ranked detection.
std::vector<PrPoint> pr_curve(const ClassMatch& m, std::span<const DetectionRecord> dets);

enum class ApInterpolation { AllPoints, ElevenPoint };

/// Area under the precision envelope. Points must have non-decreasing recall.
/// An empty curve scores 0.
double average_precision(std::span<const PrPoint> curve, ApInterpolation mode = ApInterpolation::AllPoints);

double mean_ap(std::span<const double> per_class_ap);

struct ClassReport {
    int class_id = 0;
    Counts counts;
    std::size_t num_gt = 0;
    RatePair rates;
    double ap = 0.0;
    bool has_ground_truth = true; // classes without ground truth are reported but excluded from mAP
    std::vector<PrPoint> curve;
};

struct EvalReport {
    std::vector<ClassReport> per_class; // sorted by class id
    double map = 0.0;
    double iou_threshold = 0.5;
    ApInterpolation interpolation = ApInterpolation::AllPoints;
};

EvalReport evaluate(std::span<const DetectionRecord> dets, std::span<const GroundTruthRecord> gts,
                    double iou_threshold = 0.5, ApInterpolation mode = ApInterpolation::AllPoints);

} // namespace mks
