#include "mks/boxgeom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mks {

AABox::AABox(double cx, double cy, double w, double h) : cx_(cx), cy_(cy), w_(w), h_(h) {
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(w) || !std::isfinite(h))
        throw std::invalid_argument("AABox: non-finite coordinate");
    if (!(w > 0.0) || !(h > 0.0))
        throw std::invalid_argument("AABox: width and height must be positive (got w=" +
                                    std::to_string(w) + ", h=" + std::to_string(h) + ")");
}

AABox AABox::from_corners(double x1, double y1, double x2, double y2) {
    return {0.5 * (x1 + x2), 0.5 * (y1 + y2), x2 - x1, y2 - y1};
}

double intersection_area(const AABox& a, const AABox& b) noexcept {
    const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
    const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    return iw * ih;
}

double iou(const AABox& p, const AABox& g) noexcept {
    const double inter = intersection_area(p, g);
    if (inter == 0.0) return 0.0;
    const double uni = p.area() + g.area() - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

EnclosureGeom enclosure_geom(const AABox& p, const AABox& g) noexcept {
    EnclosureGeom e;
    e.iou = iou(p, g);
    e.c_w_enc = std::max(p.x2(), g.x2()) - std::min(p.x1(), g.x1());
    e.c_h_enc = std::max(p.y2(), g.y2()) - std::min(p.y1(), g.y1());
    const double dx = g.cx() - p.cx();
    const double dy = g.cy() - p.cy();
    e.sigma = std::hypot(dx, dy);
    e.c_h_angle = std::max(g.cy(), p.cy()) - std::min(g.cy(), p.cy());
    return e;
}

} // namespace mks
