#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "mks/siou.hpp"

using namespace mks;

namespace {

// Frozen with 30-digit arithmetic.
constexpr double kDelta = 0.210321366371260450837;
constexpr double kMks = 0.839854560736650633582;
constexpr double kSiou = 0.962303540328487368276;
constexpr double kGiou = 1.07936507936507936508;
constexpr double kDiou = 0.968253968253968253968;
constexpr double kOmega = 0.0239686508210136113188;

const AABox P(1, 1, 2, 2);
const AABox G(2, 2, 2, 2);

// Angle cost written with atan2 instead of arcsin.
double angle_oracle(const AABox& p, const AABox& g) {
    const double alpha = std::atan2(std::abs(g.cy() - p.cy()), std::abs(g.cx() - p.cx()));
    const double s = std::sin(alpha - std::numbers::pi / 4);
    return 1.0 - 2.0 * s * s;
}

// Complete-IoU loss from the published definition.
double ciou_oracle(const AABox& p, const AABox& g) {
    const double ix = std::max(0.0, std::min(p.x2(), g.x2()) - std::max(p.x1(), g.x1()));
    const double iy = std::max(0.0, std::min(p.y2(), g.y2()) - std::max(p.y1(), g.y1()));
    const double inter = ix * iy;
    const double u = p.w() * p.h() + g.w() * g.h() - inter;
    const double io = inter / u;
    const double cw = std::max(p.x2(), g.x2()) - std::min(p.x1(), g.x1());
    const double ch = std::max(p.y2(), g.y2()) - std::min(p.y1(), g.y1());
    const double rho2 = std::pow(p.cx() - g.cx(), 2) + std::pow(p.cy() - g.cy(), 2);
    const double v = 4.0 / (std::numbers::pi * std::numbers::pi) *
                     std::pow(std::atan(g.w() / g.h()) - std::atan(p.w() / p.h()), 2);
    const double alpha = v / ((1.0 - io) + v);
    return 1.0 - io + rho2 / (cw * cw + ch * ch) + alpha * v;
}

double central(const std::function<double(const AABox&)>& f, const AABox& p, int k, double h = 1e-6) {
    auto a = p.params(), b = p.params();
    a[k] += h;
    b[k] -= h;
    return (f(AABox::from_params(a)) - f(AABox::from_params(b))) / (2 * h);
}

} // namespace

TEST_CASE("shape exponent validation") {
    CHECK(ShapeExponent{}.value() == 4.0);
    CHECK(ShapeExponent(1.0).value() == 1.0);
    CHECK_THROWS_AS(ShapeExponent(0.5), std::invalid_argument);
    CHECK_THROWS_AS(ShapeExponent(NAN), std::invalid_argument);
}

TEST_CASE("angle cost examples") {
    CHECK(angle_cost(AABox(0, 0, 1, 1), AABox(1, 0, 1, 1)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(angle_cost(AABox(0, 0, 1, 1), AABox(1, 1, 1, 1)) == doctest::Approx(1.0).epsilon(1e-15));
    // The arcsin clamp leaves the vertical case at 2c*sqrt(1 - c^2) instead of 0.
    const double vertical = angle_cost(AABox(0, 0, 1, 1), AABox(0, 1, 1, 1));
    const double c = kAngleClamp;
    CHECK(vertical == doctest::Approx(2.0 * c * std::sqrt(1.0 - c * c)).epsilon(1e-6));
    CHECK(vertical < 1e-3);
    CHECK(angle_cost(P, P) == 0.0);
}

TEST_CASE("angle cost agrees with the atan2 form") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-5.0, 5.0);
    for (int t = 0; t < 500; ++t) {
        const AABox p(d(rng), d(rng), 1, 1), g(d(rng), d(rng), 2, 1);
        const double v = angle_cost(p, g);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(v == doctest::Approx(angle_oracle(p, g)).epsilon(1e-6));
    }
}

TEST_CASE("distance cost") {
    CHECK(distance_cost(P, AABox(1, 1, 4, 3), 0.0) == 0.0);
    CHECK(distance_cost(P, G, angle_cost(P, G)) == doctest::Approx(kDelta).epsilon(1e-14));

    // Receding diagonally: increasing, and bounded by 2 - 2 exp(-gamma) < 2
    // because the offset never exceeds the hull size.
    double prev = 0.0;
    for (double d = 0.5; d < 1e4; d *= 1.7) {
        const AABox g(1 + d, 1 + d, 2, 2);
        const double v = distance_cost(P, g, angle_cost(P, g));
        CHECK(v > prev);
        CHECK(v < 2.0 - 2.0 * std::exp(-1.0) + 1e-12);
        prev = v;
    }
    // Along an axis the angle cost is zero, gamma = 2, and the bound is 1 - exp(-2).
    const AABox far(1e6, 1, 2, 2);
    CHECK(distance_cost(P, far, angle_cost(P, far)) == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-5));
}

TEST_CASE("shape cost") {
    CHECK(shape_cost(P, AABox(7, -3, 2, 2)) == 0.0);
    const AABox a(0, 0, 1, 3), b(0, 0, 2, 3);
    CHECK(shape_cost(a, b) == doctest::Approx(kOmega).epsilon(1e-14));
    CHECK(shape_cost(a, b) == shape_cost(b, a));
    CHECK(shape_cost(a, b, ShapeExponent(1.0)) == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-15));
    // Larger theta shrinks the cost for ratios below 1.
    CHECK(shape_cost(a, b, ShapeExponent(6.0)) < shape_cost(a, b, ShapeExponent(2.0)));
}

TEST_CASE("mks loss worked pair") {
    const LossBreakdown lb = mks_loss(P, G, 6.0 / 7.0);
    CHECK(lb.iou == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
    CHECK(lb.angle_cost == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(lb.gamma_dist == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(lb.distance_cost == doctest::Approx(kDelta).epsilon(1e-14));
    CHECK(lb.shape_cost == 0.0);
    CHECK(lb.iou_cost == doctest::Approx(6.0 / 7.0).epsilon(1e-15));
    CHECK(lb.total == doctest::Approx(kMks).epsilon(1e-14));
    CHECK(loss_value(LossKind::MKS, P, G) == doctest::Approx(kMks).epsilon(1e-14));
}

TEST_CASE("mks loss vanishes at p == g for any factor") {
    for (double f : {0.0, 0.3, 1.0, 7.0}) {
        const LossBreakdown lb = mks_loss(G, G, f);
        CHECK(lb.total == 0.0);
        CHECK(lb.angle_cost == 0.0);
        CHECK(lb.distance_cost == 0.0);
        CHECK(lb.shape_cost == 0.0);
        CHECK(lb.iou_cost == 0.0);
    }
}

TEST_CASE("mks loss of far disjoint equal boxes") {
    const AABox g(1e5, 1e5, 2, 2);
    const LossBreakdown lb = mks_loss(P, g, 0.8);
    CHECK(lb.iou_cost == 1.0);
    CHECK(lb.shape_cost == 0.0);
    CHECK(lb.total == doctest::Approx(0.8 + lb.distance_cost / 2).epsilon(1e-15));
}

TEST_CASE("mks loss rejects non-finite factor") {
    CHECK_THROWS_AS(mks_loss(P, G, NAN), std::invalid_argument);
}

TEST_CASE("baseline losses on the worked pair") {
    CHECK(baseline_loss(LossKind::GIoU, P, G) == doctest::Approx(kGiou).epsilon(1e-14));
    CHECK(baseline_loss(LossKind::DIoU, P, G) == doctest::Approx(kDiou).epsilon(1e-14));
    CHECK(baseline_loss(LossKind::CIoU, P, G) == doctest::Approx(kDiou).epsilon(1e-14)); // equal aspect
    CHECK(baseline_loss(LossKind::SIoU, P, G) == doctest::Approx(kSiou).epsilon(1e-14));
    CHECK_THROWS_AS(baseline_loss(LossKind::MKS, P, G), std::invalid_argument);
}

TEST_CASE("ciou matches the published definition") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> pos(0, 4), size(0.5, 3);
    for (int t = 0; t < 200; ++t) {
        const AABox p(pos(rng), pos(rng), size(rng), size(rng)), g(pos(rng), pos(rng), size(rng), size(rng));
        CHECK(baseline_loss(LossKind::CIoU, p, g) == doctest::Approx(ciou_oracle(p, g)).epsilon(1e-12));
    }
}

TEST_CASE("every kind is zero at p == g") {
    for (auto k : {LossKind::GIoU, LossKind::DIoU, LossKind::CIoU, LossKind::SIoU, LossKind::MKS})
        CHECK(loss_value(k, G, G) == 0.0);
}

TEST_CASE("giou penalty is positive for disjoint boxes") {
    const AABox g(5, 1, 2, 2);
    CHECK(baseline_loss(LossKind::GIoU, P, g) > 1.0);
}

TEST_CASE("loss kind names round-trip") {
    for (auto k : {LossKind::GIoU, LossKind::DIoU, LossKind::CIoU, LossKind::SIoU, LossKind::MKS})
        CHECK(parse_loss_kind(to_string(k)) == k);
    CHECK(parse_loss_kind("GIoU") == LossKind::GIoU);
    CHECK_THROWS_AS(parse_loss_kind("focal"), std::invalid_argument);
}

TEST_CASE("total is non-negative and zero only at p == g") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> pos(0, 3), size(0.2, 3);
    for (int t = 0; t < 2000; ++t) {
        const AABox p(pos(rng), pos(rng), size(rng), size(rng)), g(pos(rng), pos(rng), size(rng), size(rng));
        for (auto k : {LossKind::GIoU, LossKind::DIoU, LossKind::CIoU, LossKind::SIoU, LossKind::MKS})
            CHECK(loss_value(k, p, g) > 0.0);
    }
}

TEST_CASE("singularity detection") {
    CHECK(((detect_singularities(P, P)) & kIdentical) != 0);
    CHECK(((detect_singularities(P, AABox(1, 1, 3, 4))) & kCoincidentCenter) != 0);
    CHECK(((detect_singularities(P, AABox(2, 1.0000001, 2, 3))) & kAxisAligned) != 0);
    CHECK(((detect_singularities(P, G)) & kEqualWidth) != 0);
    CHECK(detect_singularities(AABox(0, 0, 1, 1), AABox(0.9, 0.7, 0.9, 3)) == kNone);
    CHECK(singularity_names(kNone) == "none");
    CHECK(singularity_names(kEqualWidth | kEdgeContact) == "equal_width|edge_contact");
}

TEST_CASE("gradient at p == g is the zero vector") {
    const LossGradient lg = loss_gradient(LossKind::MKS, G, G);
    CHECK(((lg.singular) & kIdentical) != 0);
    for (double v : lg.total) CHECK(v == 0.0);
    for (double v : lg.iou_cost) CHECK(v == 0.0);
}

TEST_CASE("moving p away along x increases the distance cost") {
    const AABox g(0, 0, 2, 2);
    const AABox p(-1.5, 0.3, 1.7, 2.2);
    const LossGradient lg = loss_gradient(LossKind::MKS, p, g);
    CHECK(lg.distance[0] < 0.0); // p is left of g: moving cx left increases the offset
    const LossGradient rg = loss_gradient(LossKind::MKS, AABox(1.5, 0.3, 1.7, 2.2), g);
    CHECK(rg.distance[0] > 0.0);
}

TEST_CASE("analytic gradients match central differences") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> pos(0, 6), size(0.5, 3), off(-2, 2);
    int checked = 0;
    for (int t = 0; t < 300; ++t) {
        const AABox p(pos(rng), pos(rng), size(rng), size(rng));
        const AABox g(p.cx() + off(rng), p.cy() + off(rng), size(rng), size(rng));
        if (detect_singularities(p, g) != kNone) continue;
        ++checked;
        for (auto k : {LossKind::GIoU, LossKind::DIoU, LossKind::CIoU, LossKind::SIoU, LossKind::MKS}) {
            const LossGradient lg = loss_gradient(k, p, g);
            for (int c = 0; c < 4; ++c) {
                const double fd = central([&](const AABox& b) { return loss_value(k, b, g); }, p, c);
                CHECK(lg.total[c] == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
            }
        }
        GradientOptions held;
        held.negative_iou = 0.37;
        const LossGradient lg = loss_gradient(LossKind::MKS, p, g, held);
        for (int c = 0; c < 4; ++c) {
            const double fd = central([&](const AABox& b) { return mks_loss(b, g, 0.37).total; }, p, c);
            CHECK(lg.total[c] == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
            const double fs = central([&](const AABox& b) { return shape_cost(b, g); }, p, c);
            CHECK(lg.shape[c] == doctest::Approx(fs).epsilon(1e-5).scale(1e-3));
        }
    }
    CHECK(checked > 250);
}
