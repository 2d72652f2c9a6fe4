#pragma once

#include <array>

namespace mks {

/// Axis-aligned box in center-size form. Construction rejects non-finite
/// values and non-positive sizes, so every live AABox has positive area.
class AABox {
public:
    AABox(double cx, double cy, double w, double h);

    double cx() const noexcept { return cx_; }
    double cy() const noexcept { return cy_; }
    double w() const noexcept { return w_; }
    double h() const noexcept { return h_; }

    // Corner view.
    double x1() const noexcept { return cx_ - 0.5 * w_; }
    double x2() const noexcept { return cx_ + 0.5 * w_; }
    double y1() const noexcept { return cy_ - 0.5 * h_; }
    double y2() const noexcept { return cy_ + 0.5 * h_; }

    /// Area from the corner view, so that the self-intersection of a box
    /// reproduces it bit for bit.
    double area() const noexcept { return (x2() - x1()) * (y2() - y1()); }

    std::array<double, 4> params() const noexcept { return {cx_, cy_, w_, h_}; }
    static AABox from_params(const std::array<double, 4>& p) { return {p[0], p[1], p[2], p[3]}; }
    static AABox from_corners(double x1, double y1, double x2, double y2);

    friend bool operator==(const AABox&, const AABox&) = default;

private:
    double cx_, cy_, w_, h_;
};

struct EnclosureGeom {
    double iou = 0.0;
    double c_w_enc = 0.0;   // width of smallest enclosing box
    double c_h_enc = 0.0;   // height of smallest enclosing box
    double sigma = 0.0;     // center-to-center distance
    double c_h_angle = 0.0; // |cy_g - cy_p|
};

double intersection_area(const AABox& a, const AABox& b) noexcept;
double iou(const AABox& p, const AABox& g) noexcept;
EnclosureGeom enclosure_geom(const AABox& p, const AABox& g) noexcept;

} // namespace mks
