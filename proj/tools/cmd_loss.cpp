#include <random>
#include <sstream>

#include "commands.hpp"
#include "mks/gradcheck.hpp"
#include "mks/records_io.hpp"
#include "mks/siou.hpp"

namespace mks::cli {
namespace {

std::vector<LossKind> parse_kinds(const std::string& list) {
    std::vector<LossKind> kinds;
    std::stringstream ss(list);
    for (std::string tok; std::getline(ss, tok, ',');) {
        try {
            kinds.push_back(parse_loss_kind(tok));
        } catch (const std::invalid_argument& e) {
            throw CLI::ValidationError("--kinds", e.what());
        }
    }
    if (kinds.empty()) throw CLI::ValidationError("--kinds", "empty list");
    return kinds;
}


struct LossCompareOptions {
    CommonOptions common;
    std::string boxes;
    std::string kinds = "giou,diou,ciou,siou,mks";
    double theta = ShapeExponent::kDefault;
    std::optional<double> negative_iou;
};

int run_loss_compare(const LossCompareOptions& o) {
    const auto kinds = parse_kinds(o.kinds);
    const ShapeExponent theta(o.theta);
    const auto pairs = read_box_pairs(o.boxes);

    Json cfg = {{"boxes", path_echo(o.boxes)}, {"kinds", o.kinds}, {"theta", o.theta}};
    cfg["negative_iou"] = o.negative_iou ? Json(*o.negative_iou) : Json("collapsed");
    Report rep("loss-compare", cfg);
    rep.set_columns({"pair", "kind", "iou", "angle", "distance", "shape", "iou_cost", "loss", "d_cx", "d_cy", "d_w",
                     "d_h", "singular"});
    std::size_t singular = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& [p, g] = pairs[i];
        const LossBreakdown lb = mks_loss(p, g, o.negative_iou.value_or(1.0 - iou(p, g)), theta);
        if (detect_singularities(p, g) != kNone) ++singular;
        for (LossKind k : kinds) {
            GradientOptions go;
            go.theta = theta;
            go.negative_iou = o.negative_iou;
            const LossGradient grad = loss_gradient(k, p, g, go);
            rep.add_row({i, std::string(to_string(k)), real(lb.iou), real(lb.angle_cost), real(lb.distance_cost),
                         real(lb.shape_cost), real(lb.iou_cost), real(grad.value), real(grad.total[0]),
                         real(grad.total[1]), real(grad.total[2]), real(grad.total[3]),
                         singularity_names(grad.singular)});
        }
    }
    rep.summary() = {{"pairs", pairs.size()}, {"kinds", kinds.size()}, {"singular_pairs", singular}};
    rep.write(o.common.format, o.common.out);
    return 0;
}

struct GradcheckOptions {
    CommonOptions common;
    std::size_t trials = 1000;
    std::string kinds = "mks";
    double theta = ShapeExponent::kDefault;
    double step = 1e-5;
    double tol = 1e-4;
    double margin = 1e-3;
    std::optional<double> negative_iou;
};

BoxPair random_pair(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(0.0, 10.0), size(0.5, 4.0), off(-3.0, 3.0);
    const AABox p(pos(rng), pos(rng), size(rng), size(rng));
    const AABox g(p.cx() + off(rng), p.cy() + off(rng), size(rng), size(rng));
    return {p, g};
}

int run_gradcheck(const GradcheckOptions& o) {
    const auto kinds = parse_kinds(o.kinds);
    Json cfg = {{"trials", o.trials}, {"kinds", o.kinds}, {"theta", o.theta}, {"step", o.step},
                {"tol", o.tol},       {"margin", o.margin}, {"seed", o.common.seed}};
    cfg["negative_iou"] = o.negative_iou ? Json(*o.negative_iou) : Json("coupled");
    Report rep("gradcheck", cfg);
    rep.set_columns({"trial", "kind", "status", "singular", "max_rel_error", "angle", "distance", "shape",
                     "iou_cost", "total"});

    GradientOptions go;
    go.theta = ShapeExponent(o.theta);
    go.negative_iou = o.negative_iou;
    go.singular_margin = o.margin;
    FdOptions fd;
    fd.step = o.step;
    fd.tol = o.tol;

    std::mt19937_64 rng(o.common.seed);
    std::size_t checked = 0, excluded = 0, failed = 0;
    double worst = 0.0;
    Json by_flag = Json::object();
    for (std::size_t t = 0; t < o.trials; ++t) {
        const auto [p, g] = random_pair(rng);
        const std::uint32_t flags = detect_singularities(p, g, o.margin);
        for (LossKind k : kinds) {
            if (flags != kNone) {
                ++excluded;
                const std::string names = singularity_names(flags);
                by_flag[names] = by_flag.value(names, 0) + 1;
                rep.add_row({t, std::string(to_string(k)), "excluded", names, nullptr, nullptr, nullptr, nullptr,
                             nullptr, nullptr});
                continue;
            }
            const LossFdReport r = check_loss_gradient(k, p, g, go, fd);
            ++checked;
            if (!r.passed) ++failed;
            worst = std::max(worst, r.max_rel_error);
            rep.add_row({t, std::string(to_string(k)), r.passed ? "pass" : "fail", "none", real(r.max_rel_error),
                         real(r.angle.max_rel_error), real(r.distance.max_rel_error), real(r.shape.max_rel_error),
                         real(r.iou_cost.max_rel_error), real(r.total.max_rel_error)});
        }
    }
    rep.summary() = {{"checked", checked}, {"excluded", excluded}, {"failed", failed},
                     {"max_rel_error", real(worst)}, {"excluded_by_flag", by_flag}, {"passed", failed == 0}};
    rep.write(o.common.format, o.common.out);
    return failed == 0 ? 0 : kExitCheckFailed;
}

} // namespace

void register_loss_commands(CLI::App& app, const ExitCode& code) {
    auto lc = std::make_shared<LossCompareOptions>();
    auto* sub = app.add_subcommand("loss-compare", "Per-pair loss values and gradients for several loss kinds");
    sub->add_option("--boxes", lc->boxes, "Box-pair file: pcx pcy pw ph gcx gcy gw gh")->required();
    sub->add_option("--kinds", lc->kinds, "Comma-separated kinds (giou,diou,ciou,siou,mks)")->capture_default_str();
    sub->add_option("--theta", lc->theta, "Shape-cost exponent")->capture_default_str();
    sub->add_option("--negative-iou", lc->negative_iou, "Fixed negative-IoU factor for mks (default 1 - IoU)");
    add_common(*sub, lc->common, false);
    sub->callback([lc, code] { *code = run_loss_compare(*lc); });

    auto gc = std::make_shared<GradcheckOptions>();
    sub = app.add_subcommand("gradcheck", "Analytic loss gradients against central finite differences");
    sub->add_option("--trials", gc->trials, "Random box pairs")->capture_default_str();
    sub->add_option("--kinds", gc->kinds, "Comma-separated kinds")->capture_default_str();
    sub->add_option("--theta", gc->theta, "Shape-cost exponent")->capture_default_str();
    sub->add_option("--step", gc->step, "Finite-difference step")->capture_default_str();
    sub->add_option("--tol", gc->tol, "Relative error tolerance")->capture_default_str();
    sub->add_option("--margin", gc->margin, "Singularity detection margin")->capture_default_str();
    sub->add_option("--negative-iou", gc->negative_iou, "Hold the mks factor constant at this value");
    add_common(*sub, gc->common);
    sub->callback([gc, code] { *code = run_gradcheck(*gc); });
}

} // namespace mks::cli
