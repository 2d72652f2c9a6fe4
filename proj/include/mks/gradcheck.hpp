#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "mks/siou.hpp"
#include "mks/tensor.hpp"

namespace mks {

struct FdReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t coordinates = 0;
    bool passed = true;
};

struct FdOptions {
    double step = 1e-5;
    double tol = 1e-4;
    /// Relative error is |a - n| / max(|a|, |n|, rel_floor); the floor keeps
    /// near-zero partials from dominating.
    double rel_floor = 1e-6;
};

/// Central differences of `f` at `x`, coordinate by coordinate, compared
/// with `analytic`.
FdReport finite_diff_check(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                           std::span<const double> analytic, const FdOptions& opts = {});

FdReport finite_diff_check(const std::function<double(const FeatureTensor&)>& f, const FeatureTensor& x,
                           const FeatureTensor& analytic, const FdOptions& opts = {});

/// Every component of loss_gradient against central differences of the
/// matching value function.
struct LossFdReport {
    FdReport angle, distance, shape, iou_cost, total;
    double max_rel_error = 0.0;
    bool passed = true;
};

LossFdReport check_loss_gradient(LossKind kind, const AABox& p, const AABox& g, const GradientOptions& gopts = {},
                                 const FdOptions& fd = {});

} // namespace mks
