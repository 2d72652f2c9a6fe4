#include "mks/siou.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mks/dual.hpp"

namespace mks {

ShapeExponent::ShapeExponent(double theta) : theta_(theta) {
    if (!std::isfinite(theta) || theta < 1.0)
        throw std::invalid_argument("shape exponent must be finite and >= 1, got " + std::to_string(theta));
}

namespace {

using D4 = Dual<4>;

template <class T>
struct BoxT {
    T cx, cy, w, h;
    T x1() const { return cx - 0.5 * w; }
    T x2() const { return cx + 0.5 * w; }
    T y1() const { return cy - 0.5 * h; }
    T y2() const { return cy + 0.5 * h; }
    T area() const { return (x2() - x1()) * (y2() - y1()); }
};

BoxT<double> lift(const AABox& b) { return {b.cx(), b.cy(), b.w(), b.h()}; }

BoxT<D4> seed(const AABox& b) {
    return {D4(b.cx(), 0), D4(b.cy(), 1), D4(b.w(), 2), D4(b.h(), 3)};
}

BoxT<D4> constant(const AABox& b) { return {D4(b.cx()), D4(b.cy()), D4(b.w()), D4(b.h())}; }

template <class T>
struct Geometry {
    T iou, inter, uni, enc_w, enc_h, dx, dy;
};

template <class T>
Geometry<T> geometry(const BoxT<T>& p, const BoxT<T>& g) {
    using std::max;
    using std::min;
    Geometry<T> r;
    const T iw = min(p.x2(), g.x2()) - max(p.x1(), g.x1());
    const T ih = min(p.y2(), g.y2()) - max(p.y1(), g.y1());
    if (value_of(iw) <= 0.0 || value_of(ih) <= 0.0) {
        r.inter = T(0.0);
        r.uni = p.area() + g.area();
        r.iou = T(0.0);
    } else {
        r.inter = iw * ih;
        r.uni = p.area() + g.area() - r.inter;
        r.iou = r.inter / r.uni;
    }
    r.enc_w = max(p.x2(), g.x2()) - min(p.x1(), g.x1());
    r.enc_h = max(p.y2(), g.y2()) - min(p.y1(), g.y1());
    r.dx = g.cx - p.cx;
    r.dy = g.cy - p.cy;
    return r;
}

template <class T>
T angle_cost_t(const BoxT<T>& p, const BoxT<T>& g) {
    using std::abs;
    using std::asin;
    using std::clamp;
    using std::cos;
    using std::sqrt;
    const T dx = g.cx - p.cx;
    const T dy = g.cy - p.cy;
    const T sigma2 = dx * dx + dy * dy;
    if (std::sqrt(value_of(sigma2)) < kCoincidentCenters) return T(0.0);
    const T x = clamp(abs(dy) / sqrt(sigma2), 0.0, kAngleClamp);
    return cos(2.0 * (asin(x) - std::numbers::pi / 4.0));
}

template <class T>
T distance_cost_t(const Geometry<T>& geo, const T& lambda) {
    using std::exp;
    const T gamma = 2.0 - lambda;
    const T rx = (geo.dx / geo.enc_w) * (geo.dx / geo.enc_w);
    const T ry = (geo.dy / geo.enc_h) * (geo.dy / geo.enc_h);
    return 2.0 - exp(-(gamma * rx)) - exp(-(gamma * ry));
}

template <class T>
T shape_cost_t(const BoxT<T>& p, const BoxT<T>& g, double theta) {
    using std::abs;
    using std::exp;
    using std::max;
    using std::pow;
    const T ww = abs(p.w - g.w) / max(p.w, g.w);
    const T wh = abs(p.h - g.h) / max(p.h, g.h);
    return pow(1.0 - exp(-ww), theta) + pow(1.0 - exp(-wh), theta);
}

template <class T>
struct Components {
    T angle, distance, shape, iou_cost;
    Geometry<T> geo;
};

template <class T>
Components<T> components(const BoxT<T>& p, const BoxT<T>& g, double theta) {
    Components<T> c;
    c.geo = geometry(p, g);
    c.angle = angle_cost_t(p, g);
    c.distance = distance_cost_t(c.geo, c.angle);
    c.shape = shape_cost_t(p, g, theta);
    c.iou_cost = 1.0 - c.geo.iou;
    return c;
}

template <class T>
T baseline_t(LossKind kind, const Components<T>& c, const BoxT<T>& p, const BoxT<T>& g) {
    using std::atan;
    const auto& geo = c.geo;
    switch (kind) {
    case LossKind::GIoU: {
        const T hull = geo.enc_w * geo.enc_h;
        return c.iou_cost + (hull - geo.uni) / hull;
    }
    case LossKind::DIoU: {
        const T diag2 = geo.enc_w * geo.enc_w + geo.enc_h * geo.enc_h;
        return c.iou_cost + (geo.dx * geo.dx + geo.dy * geo.dy) / diag2;
    }
    case LossKind::CIoU: {
        const T diag2 = geo.enc_w * geo.enc_w + geo.enc_h * geo.enc_h;
        const T da = atan(g.w / g.h) - atan(p.w / p.h);
        const T v = (4.0 / (std::numbers::pi * std::numbers::pi)) * da * da;
        T penalty = (geo.dx * geo.dx + geo.dy * geo.dy) / diag2;
        if (value_of(v) > 0.0) penalty = penalty + v * v / (c.iou_cost + v);
        return c.iou_cost + penalty;
    }
    case LossKind::SIoU:
        return c.iou_cost + 0.5 * (c.distance + c.shape);
    case LossKind::MKS:
        break;
    }
    throw std::invalid_argument("baseline_loss: MKS is not a baseline kind");
}

Grad4 grad_of(const D4& x) { return x.d; }

} // namespace

double angle_cost(const AABox& p, const AABox& g) noexcept { return angle_cost_t(lift(p), lift(g)); }

double distance_cost(const AABox& p, const AABox& g, double lambda) noexcept {
    return distance_cost_t(geometry(lift(p), lift(g)), lambda);
}

double shape_cost(const AABox& p, const AABox& g, ShapeExponent theta) noexcept {
    return shape_cost_t(lift(p), lift(g), theta.value());
}

LossBreakdown mks_loss(const AABox& p, const AABox& g, double negative_iou, ShapeExponent theta) {
    if (!std::isfinite(negative_iou)) throw std::invalid_argument("mks_loss: non-finite negative IoU");
    LossBreakdown b;
    b.angle_cost = angle_cost(p, g);
    b.gamma_dist = 2.0 - b.angle_cost;
    b.distance_cost = distance_cost(p, g, b.angle_cost);
    b.shape_cost = shape_cost(p, g, theta);
    b.iou = iou(p, g);
    b.iou_cost = 1.0 - b.iou;
    b.negative_iou = negative_iou;
    b.total = negative_iou * b.iou_cost + 0.5 * (b.distance_cost + b.shape_cost);
    return b;
}

LossKind parse_loss_kind(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (s == "giou") return LossKind::GIoU;
    if (s == "diou") return LossKind::DIoU;
    if (s == "ciou") return LossKind::CIoU;
    if (s == "siou" || s == "siou-standard") return LossKind::SIoU;
    if (s == "mks") return LossKind::MKS;
    throw std::invalid_argument("unknown loss kind '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) noexcept {
    switch (kind) {
    case LossKind::GIoU: return "giou";
    case LossKind::DIoU: return "diou";
    case LossKind::CIoU: return "ciou";
    case LossKind::SIoU: return "siou";
    case LossKind::MKS: return "mks";
    }
    return "?";
}

double baseline_loss(LossKind kind, const AABox& p, const AABox& g, ShapeExponent theta) {
    const auto bp = lift(p);
    const auto bg = lift(g);
    const auto c = components(bp, bg, theta.value());
    // Reuse the boxgeom IoU so the identity case is exactly zero.
    auto cc = c;
    cc.iou_cost = 1.0 - iou(p, g);
    return baseline_t(kind, cc, bp, bg);
}

double loss_value(LossKind kind, const AABox& p, const AABox& g, ShapeExponent theta,
                  std::optional<double> negative_iou) {
    if (kind == LossKind::MKS) return mks_loss(p, g, negative_iou.value_or(1.0 - iou(p, g)), theta).total;
    return baseline_loss(kind, p, g, theta);
}

std::string singularity_names(std::uint32_t flags) {
    if (flags == kNone) return "none";
    static constexpr std::pair<std::uint32_t, const char*> names[] = {
        {kIdentical, "identical"},     {kCoincidentCenter, "coincident_center"},
        {kAxisAligned, "axis_aligned"}, {kEqualWidth, "equal_width"},
        {kEqualHeight, "equal_height"}, {kEdgeContact, "edge_contact"},
    };
    std::string out;
    for (const auto& [bit, name] : names) {
        if (!(flags & bit)) continue;
        if (!out.empty()) out += '|';
        out += name;
    }
    return out;
}

std::uint32_t detect_singularities(const AABox& p, const AABox& g, double margin) noexcept {
    std::uint32_t f = kNone;
    if (p == g) f |= kIdentical;
    const double dx = g.cx() - p.cx();
    const double dy = g.cy() - p.cy();
    if (std::hypot(dx, dy) < 10.0 * margin) f |= kCoincidentCenter;
    if (std::abs(dx) < margin || std::abs(dy) < margin) f |= kAxisAligned;
    if (std::abs(p.w() - g.w()) < margin) f |= kEqualWidth;
    if (std::abs(p.h() - g.h()) < margin) f |= kEqualHeight;
    const double xs_p[] = {p.x1(), p.x2()};
    const double xs_g[] = {g.x1(), g.x2()};
    const double ys_p[] = {p.y1(), p.y2()};
    const double ys_g[] = {g.y1(), g.y2()};
    for (double a : xs_p)
        for (double b : xs_g)
            if (std::abs(a - b) < margin) f |= kEdgeContact;
    for (double a : ys_p)
        for (double b : ys_g)
            if (std::abs(a - b) < margin) f |= kEdgeContact;
    return f;
}

LossGradient loss_gradient(LossKind kind, const AABox& p, const AABox& g, const GradientOptions& opts) {
    LossGradient out;
    out.singular = detect_singularities(p, g, opts.singular_margin);
    out.value = loss_value(kind, p, g, opts.theta,
                           kind == LossKind::MKS ? opts.negative_iou : std::nullopt);
    if (out.singular & kIdentical) return out; // zero subgradient everywhere

    const auto bp = seed(p);
    const auto bg = constant(g);
    const auto c = components(bp, bg, opts.theta.value());
    out.angle = grad_of(c.angle);
    out.distance = grad_of(c.distance);
    out.shape = grad_of(c.shape);
    out.iou_cost = grad_of(c.iou_cost);

    D4 total;
    if (kind == LossKind::MKS) {
        const D4 factor = opts.negative_iou ? D4(*opts.negative_iou) : c.iou_cost;
        total = factor * c.iou_cost + 0.5 * (c.distance + c.shape);
    } else {
        total = baseline_t(kind, c, bp, bg);
    }
    out.total = grad_of(total);
    for (auto* gvec : {&out.total, &out.angle, &out.distance, &out.shape, &out.iou_cost})
        for (double& v : *gvec)
            if (!std::isfinite(v)) v = 0.0;
    return out;
}

} // namespace mks
