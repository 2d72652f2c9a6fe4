#include "commands.hpp"
#include "mks/evalmetrics.hpp"
#include "mks/records_io.hpp"

namespace mks::cli {
namespace {

struct EvalOptions {
    CommonOptions common;
    std::string dets, gts;
    double iou_thresh = 0.5;
    std::string interp = "all";
    bool curves = false;
};

Json rate(double v, bool defined) { return defined ? real(v) : Json(nullptr); }

int run_eval(const EvalOptions& o) {
    const auto dets = read_detections(o.dets);
    const auto gts = read_detections(o.gts);
    const ApInterpolation mode = o.interp == "11" ? ApInterpolation::ElevenPoint : ApInterpolation::AllPoints;
    const EvalReport er = evaluate(dets, gts, o.iou_thresh, mode);

    Json cfg = {{"dets", path_echo(o.dets)}, {"gts", path_echo(o.gts)}, {"iou_thresh", o.iou_thresh},
                {"interp", o.interp}, {"curves", o.curves}};
    Report rep("eval", cfg);
    if (o.curves) {
        rep.set_columns({"class", "rank", "confidence", "recall", "precision"});
        for (const auto& c : er.per_class)
            for (std::size_t r = 0; r < c.curve.size(); ++r)
                rep.add_row({c.class_id, r, real(c.curve[r].confidence), real(c.curve[r].recall),
                             real(c.curve[r].precision)});
    } else {
        rep.set_columns({"class", "num_gt", "tp", "fp", "fn", "precision", "recall", "ap", "in_map"});
        for (const auto& c : er.per_class)
            rep.add_row({c.class_id, c.num_gt, c.counts.tp, c.counts.fp, c.counts.fn,
                         rate(c.rates.precision, c.rates.precision_defined), rate(c.rates.recall, c.rates.recall_defined),
                         real(c.ap), c.has_ground_truth});
    }
    std::size_t in_map = 0;
    for (const auto& c : er.per_class) in_map += c.has_ground_truth ? 1 : 0;
    rep.summary() = {{"detections", dets.size()}, {"ground_truths", gts.size()}, {"classes", er.per_class.size()},
                     {"classes_in_map", in_map},  {"map", real(er.map)}};
    rep.write(o.common.format, o.common.out);
    return 0;
}

} // namespace

void register_eval_commands(CLI::App& app, const ExitCode& code) {
    auto eo = std::make_shared<EvalOptions>();
    auto* sub = app.add_subcommand("eval", "Precision, recall, AP and mAP of scored detections");
    sub->add_option("--dets", eo->dets, "Detections: image_id class_id cx cy w h confidence")->required();
    sub->add_option("--gts", eo->gts, "Ground truths: image_id class_id cx cy w h")->required();
    sub->add_option("--iou-thresh", eo->iou_thresh, "IoU threshold for a true positive")
        ->check(CLI::Range(0.0, 1.0))->capture_default_str();
    sub->add_option("--interp", eo->interp, "AP interpolation: all points or 11-point")
        ->check(CLI::IsMember({"all", "11"}))->capture_default_str();
    sub->add_flag("--curves", eo->curves, "Emit the PR curves instead of the per-class table");
    add_common(*sub, eo->common, false);
    sub->callback([eo, code] { *code = run_eval(*eo); });
}

} // namespace mks::cli
