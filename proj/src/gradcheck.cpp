#include "mks/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mks {

FdReport finite_diff_check(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                           std::span<const double> analytic, const FdOptions& opts) {
    if (x.size() != analytic.size()) throw std::invalid_argument("finite_diff_check: gradient size mismatch");
    if (!(opts.step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
    FdReport r;
    r.coordinates = x.size();
    std::vector<double> probe(x.begin(), x.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + opts.step;
        const double up = f(probe);
        probe[i] = orig - opts.step;
        const double down = f(probe);
        probe[i] = orig;
        const double numeric = (up - down) / (2.0 * opts.step);
        const double abs_err = std::abs(numeric - analytic[i]);
        const double rel_err =
            abs_err / std::max({std::abs(numeric), std::abs(analytic[i]), opts.rel_floor});
        r.max_abs_error = std::max(r.max_abs_error, abs_err);
        if (rel_err > r.max_rel_error || !std::isfinite(rel_err)) {
            r.max_rel_error = rel_err;
            r.worst_index = i;
        }
    }
    r.passed = std::isfinite(r.max_rel_error) && r.max_rel_error < opts.tol;
    return r;
}

FdReport finite_diff_check(const std::function<double(const FeatureTensor&)>& f, const FeatureTensor& x,
                           const FeatureTensor& analytic, const FdOptions& opts) {
    if (!(x.shape() == analytic.shape())) throw std::invalid_argument("finite_diff_check: gradient shape mismatch");
    const Shape4 shape = x.shape();
    auto flat = [&](std::span<const double> v) {
        return f(FeatureTensor(shape, std::vector<double>(v.begin(), v.end())));
    };
    return finite_diff_check(flat, x.data(), analytic.data(), opts);
}

LossFdReport check_loss_gradient(LossKind kind, const AABox& p, const AABox& g, const GradientOptions& gopts,
                                 const FdOptions& fd) {
    const LossGradient grad = loss_gradient(kind, p, g, gopts);
    const auto x = p.params();
    auto at = [](std::span<const double> v) { return AABox(v[0], v[1], v[2], v[3]); };
    const std::optional<double> factor = kind == LossKind::MKS ? gopts.negative_iou : std::nullopt;
    const ShapeExponent theta = gopts.theta;

    LossFdReport r;
    r.angle = finite_diff_check([&](std::span<const double> v) { return angle_cost(at(v), g); }, x, grad.angle, fd);
    r.distance = finite_diff_check(
        [&](std::span<const double> v) {
            const AABox b = at(v);
            return distance_cost(b, g, angle_cost(b, g));
        },
        x, grad.distance, fd);
    r.shape = finite_diff_check([&](std::span<const double> v) { return shape_cost(at(v), g, theta); }, x,
                                grad.shape, fd);
    r.iou_cost = finite_diff_check([&](std::span<const double> v) { return 1.0 - iou(at(v), g); }, x,
                                   grad.iou_cost, fd);
    r.total = finite_diff_check([&](std::span<const double> v) { return loss_value(kind, at(v), g, theta, factor); },
                                x, grad.total, fd);
    for (const FdReport* c : {&r.angle, &r.distance, &r.shape, &r.iou_cost, &r.total}) {
        r.max_rel_error = std::max(r.max_rel_error, c->max_rel_error);
        r.passed = r.passed && c->passed;
    }
    return r;
}

} // namespace mks
