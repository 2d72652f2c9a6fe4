#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "mks/boxgeom.hpp"

namespace mks {

/// Exponent of the shape cost. Values below 1 make the cost non-smooth at
/// equal sizes and are rejected.
class ShapeExponent {
public:
    static constexpr double kDefault = 4.0;

    constexpr ShapeExponent() = default;
    explicit ShapeExponent(double theta);

    double value() const noexcept { return theta_; }

private:
    double theta_ = kDefault;
};

struct LossBreakdown {
    double angle_cost = 0.0;    // Λ in [0,1]
    double distance_cost = 0.0; // Δ in [0,2)
    double shape_cost = 0.0;    // Ω in [0,2)
    double iou_cost = 0.0;      // 1 - IoU
    double negative_iou = 0.0;  // factor multiplying iou_cost
    double total = 0.0;
    double gamma_dist = 2.0;    // 2 - Λ
    double iou = 0.0;
};

/// Centers closer than this are treated as coincident; the angle cost is 0.
inline constexpr double kCoincidentCenters = 1e-9;
/// Upper clamp of sin(alpha) before arcsin.
inline constexpr double kAngleClamp = 1.0 - 1e-7;

double angle_cost(const AABox& p, const AABox& g) noexcept;
double distance_cost(const AABox& p, const AABox& g, double lambda) noexcept;
double shape_cost(const AABox& p, const AABox& g, ShapeExponent theta = {}) noexcept;

/// negative_iou * (1 - IoU) + (Δ + Ω) / 2.
LossBreakdown mks_loss(const AABox& p, const AABox& g, double negative_iou, ShapeExponent theta = {});

enum class LossKind { GIoU, DIoU, CIoU, SIoU, MKS };

LossKind parse_loss_kind(std::string_view name);
std::string_view to_string(LossKind kind) noexcept;

/// Published baselines. SIoU is the additive form 1 - IoU + (Δ + Ω)/2.
/// MKS is not a baseline and is rejected; use mks_loss.
double baseline_loss(LossKind kind, const AABox& p, const AABox& g, ShapeExponent theta = {});

/// Value of any kind. For MKS the negative-IoU factor defaults to the
/// collapsed form 1 - IoU(p, g).
double loss_value(LossKind kind, const AABox& p, const AABox& g, ShapeExponent theta = {},
                  std::optional<double> negative_iou = std::nullopt);

// ---------------------------------------------------------------------------
// Gradients with respect to the predicted box (cx, cy, w, h).

enum Singularity : std::uint32_t {
    kNone = 0,
    kIdentical = 1u << 0,        // p == g
    kCoincidentCenter = 1u << 1, // centers (nearly) coincide
    kAxisAligned = 1u << 2,      // |dx| or |dy| near 0: kink of the angle cost
    kEqualWidth = 1u << 3,       // kink of |w - w_g| and max(w, w_g)
    kEqualHeight = 1u << 4,
    kEdgeContact = 1u << 5,      // two box edges (nearly) coincide: overlap/hull kinks
};

std::string singularity_names(std::uint32_t flags);

/// Flags the configurations where one of the cost terms has a kink within
/// `margin` (in box coordinate units). A center separation below
/// 10 * margin is reported as coincident.
std::uint32_t detect_singularities(const AABox& p, const AABox& g, double margin = 1e-3) noexcept;

using Grad4 = std::array<double, 4>;

struct LossGradient {
    double value = 0.0;
    Grad4 total{};
    Grad4 angle{};
    Grad4 distance{}; // through the angle cost as well
    Grad4 shape{};
    Grad4 iou_cost{};
    std::uint32_t singular = kNone;
    bool differentiable() const noexcept { return singular == kNone; }
};

struct GradientOptions {
    ShapeExponent theta{};
    /// MKS only. When set, the factor is held constant; otherwise it is the
    /// collapsed 1 - IoU(p, g) and is differentiated along with the rest.
    std::optional<double> negative_iou;
    double singular_margin = 1e-3;
};

/// Analytic gradient (forward-mode). At p == g every gradient is reported as
/// the zero vector; at other flagged points the one-sided derivative is
/// returned. Never NaN.
LossGradient loss_gradient(LossKind kind, const AABox& p, const AABox& g, const GradientOptions& opts = {});

} // namespace mks
