#include "mks/evalmetrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

namespace mks {

RatePair precision_recall(const Counts& c) noexcept {
    RatePair r;
    const std::size_t pd = c.tp + c.fp;
    const std::size_t rd = c.tp + c.fn;
    r.precision_defined = pd > 0;
    r.recall_defined = rd > 0;
    r.precision = pd > 0 ? static_cast<double>(c.tp) / static_cast<double>(pd) : 0.0;
    r.recall = rd > 0 ? static_cast<double>(c.tp) / static_cast<double>(rd) : 0.0;
    return r;
}

std::map<int, ClassMatch> match_detections(std::span<const DetectionRecord> dets,
                                           std::span<const GroundTruthRecord> gts, double iou_threshold) {
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
        throw std::invalid_argument("IoU threshold must lie in (0, 1)");
    for (const auto& d : dets)
        if (!(d.confidence >= 0.0 && d.confidence <= 1.0))
            throw std::invalid_argument("detection confidence outside [0, 1] for image '" + d.image_id + "'");

    std::map<int, ClassMatch> out;
    std::map<int, std::vector<std::size_t>> gt_by_class;
    for (std::size_t g = 0; g < gts.size(); ++g) {
        gt_by_class[gts[g].class_id].push_back(g);
        out[gts[g].class_id].num_gt += 1;
    }
    std::map<int, std::vector<std::size_t>> det_by_class;
    for (std::size_t d = 0; d < dets.size(); ++d) det_by_class[dets[d].class_id].push_back(d);

    for (auto& [cls, idx] : det_by_class) {
        ClassMatch& cm = out[cls];
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });
        const auto& cand = gt_by_class[cls];
        std::vector<bool> claimed(cand.size(), false);
        cm.ranked = idx;
        cm.is_tp.assign(idx.size(), false);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const DetectionRecord& d = dets[idx[r]];
            double best = -1.0;
            std::size_t best_k = cand.size();
            for (std::size_t k = 0; k < cand.size(); ++k) {
                if (claimed[k] || gts[cand[k]].image_id != d.image_id) continue;
                const double v = iou(d.box, gts[cand[k]].box);
                if (v >= iou_threshold && v > best) {
                    best = v;
                    best_k = k;
                }
            }
            if (best_k < cand.size()) {
                claimed[best_k] = true;
                cm.is_tp[r] = true;
                ++cm.counts.tp;
            } else {
                ++cm.counts.fp;
            }
        }
    }
    for (auto& [cls, cm] : out) cm.counts.fn = cm.num_gt - cm.counts.tp;
    return out;
}

std::map<int, Counts> confusion_counts(std::span<const DetectionRecord> dets, std::span<const GroundTruthRecord> gts,
                                       double iou_threshold) {
    std::map<int, Counts> out;
    for (const auto& [cls, cm] : match_detections(dets, gts, iou_threshold)) out[cls] = cm.counts;
    return out;
}

std::vector<PrPoint> pr_curve(const ClassMatch& m, std::span<const DetectionRecord> dets) {
    std::vector<PrPoint> curve;
    curve.reserve(m.ranked.size());
    std::size_t tp = 0, fp = 0;
    for (std::size_t r = 0; r < m.ranked.size(); ++r) {
        (m.is_tp[r] ? tp : fp) += 1;
        PrPoint p;
        p.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        p.recall = m.num_gt > 0 ? static_cast<double>(tp) / static_cast<double>(m.num_gt) : 0.0;
        p.confidence = dets[m.ranked[r]].confidence;
        curve.push_back(p);
    }
    return curve;
}

double average_precision(std::span<const PrPoint> curve, ApInterpolation mode) {
    if (curve.empty()) return 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i)
        if (curve[i].recall < curve[i - 1].recall)
            throw std::invalid_argument("average_precision: recall must be non-decreasing");

    if (mode == ApInterpolation::ElevenPoint) {
        double acc = 0.0;
        for (int t = 0; t <= 10; ++t) {
            const double level = t / 10.0;
            double best = 0.0;
            for (const auto& p : curve)
                if (p.recall >= level) best = std::max(best, p.precision);
            acc += best;
        }
        return acc / 11.0;
    }

    std::vector<double> rec{0.0}, prec{0.0};
    for (const auto& p : curve) {
        rec.push_back(p.recall);
        prec.push_back(p.precision);
    }
    rec.push_back(1.0);
    prec.push_back(0.0);
    for (std::size_t i = prec.size() - 1; i > 0; --i) prec[i - 1] = std::max(prec[i - 1], prec[i]);
    double ap = 0.0;
    for (std::size_t i = 0; i + 1 < rec.size(); ++i)
        if (rec[i + 1] != rec[i]) ap += (rec[i + 1] - rec[i]) * prec[i + 1];
    return ap;
}

double mean_ap(std::span<const double> per_class_ap) {
    if (per_class_ap.empty()) return 0.0;
    return std::accumulate(per_class_ap.begin(), per_class_ap.end(), 0.0) / static_cast<double>(per_class_ap.size());
}

EvalReport evaluate(std::span<const DetectionRecord> dets, std::span<const GroundTruthRecord> gts,
                    double iou_threshold, ApInterpolation mode) {
    EvalReport rep;
    rep.iou_threshold = iou_threshold;
    rep.interpolation = mode;
    std::vector<double> aps;
    for (const auto& [cls, cm] : match_detections(dets, gts, iou_threshold)) {
        ClassReport cr;
        cr.class_id = cls;
        cr.counts = cm.counts;
        cr.num_gt = cm.num_gt;
        cr.rates = precision_recall(cm.counts);
        cr.curve = pr_curve(cm, dets);
        cr.ap = average_precision(cr.curve, mode);
        cr.has_ground_truth = cm.num_gt > 0;
        if (cr.has_ground_truth) aps.push_back(cr.ap);
        rep.per_class.push_back(std::move(cr));
    }
    rep.map = mean_ap(aps);
    return rep;
}

} // namespace mks
