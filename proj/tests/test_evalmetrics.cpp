#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "mks/evalmetrics.hpp"

using namespace mks;

namespace {

DetectionRecord rec(std::string img, int cls, AABox b, double conf = 1.0) { return {std::move(img), cls, b, conf}; }

// Recomputes the PR point at every distinct confidence threshold from
// scratch, then integrates the precision envelope over recall.
double brute_ap(const std::vector<DetectionRecord>& dets, const std::vector<DetectionRecord>& gts, int cls,
                double thr) {
    std::vector<DetectionRecord> cd, cg;
    for (const auto& d : dets)
        if (d.class_id == cls) cd.push_back(d);
    for (const auto& g : gts)
        if (g.class_id == cls) cg.push_back(g);
    std::set<double, std::greater<>> thresholds;
    for (const auto& d : cd) thresholds.insert(d.confidence);

    std::vector<std::pair<double, double>> pts; // (recall, precision)
    for (double t : thresholds) {
        std::vector<DetectionRecord> kept;
        for (const auto& d : cd)
            if (d.confidence >= t) kept.push_back(d);
        std::stable_sort(kept.begin(), kept.end(),
                         [](const auto& a, const auto& b) { return a.confidence > b.confidence; });
        std::vector<bool> used(cg.size(), false);
        std::size_t tp = 0;
        for (const auto& d : kept) {
            double best = -1;
            std::size_t arg = cg.size();
            for (std::size_t k = 0; k < cg.size(); ++k) {
                if (used[k] || cg[k].image_id != d.image_id) continue;
                const double v = iou(d.box, cg[k].box);
                if (v >= thr && v > best) {
                    best = v;
                    arg = k;
                }
            }
            if (arg < cg.size()) {
                used[arg] = true;
                ++tp;
            }
        }
        pts.emplace_back(static_cast<double>(tp) / static_cast<double>(cg.size()),
                         static_cast<double>(tp) / static_cast<double>(kept.size()));
    }
    std::set<double> recalls;
    for (const auto& p : pts) recalls.insert(p.first);
    double ap = 0, prev = 0;
    for (double r : recalls) {
        double best = 0;
        for (const auto& p : pts)
            if (p.first >= r) best = std::max(best, p.second);
        if (r > prev) ap += (r - prev) * best;
        prev = r;
    }
    return ap;
}

struct Scenario {
    std::vector<DetectionRecord> dets, gts;
};

Scenario random_scenario(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> ncls(1, 5), ngt(1, 12), ndet(0, 50), img(0, 2), jitter_kind(0, 3);
    std::uniform_real_distribution<double> pos(0, 20), size(1, 5), jit(-0.6, 0.6), conf(0, 1);
    Scenario s;
    const int classes = ncls(rng);
    std::uniform_int_distribution<int> cls(0, classes - 1);
    const int g = ngt(rng);
    for (int k = 0; k < g; ++k)
        s.gts.push_back(rec("im" + std::to_string(img(rng)), cls(rng), AABox(pos(rng), pos(rng), size(rng), size(rng))));
    std::set<double> seen;
    const int d = ndet(rng);
    for (int k = 0; k < d; ++k) {
        double c;
        do c = conf(rng);
        while (!seen.insert(c).second);
        if (jitter_kind(rng) > 0) {
            const auto& t = s.gts[std::uniform_int_distribution<std::size_t>(0, s.gts.size() - 1)(rng)];
            s.dets.push_back(rec(t.image_id, jitter_kind(rng) == 3 ? cls(rng) : t.class_id,
                                 AABox(t.box.cx() + jit(rng), t.box.cy() + jit(rng), t.box.w(), t.box.h()), c));
        } else {
            s.dets.push_back(rec("im" + std::to_string(img(rng)), cls(rng),
                                 AABox(pos(rng), pos(rng), size(rng), size(rng)), c));
        }
    }
    return s;
}

} // namespace

TEST_CASE("confusion count examples") {
    const AABox b(5, 5, 2, 2);
    const std::vector<DetectionRecord> gts{rec("a", 0, b), rec("a", 1, AABox(9, 9, 2, 2))};
    const std::vector<DetectionRecord> perfect{rec("a", 0, b, 0.9), rec("a", 1, AABox(9, 9, 2, 2), 0.8)};
    for (const auto& [cls, c] : confusion_counts(perfect, gts)) {
        CHECK(c.fp == 0);
        CHECK(c.fn == 0);
    }
    const auto lonely = confusion_counts(std::vector{rec("a", 3, b)}, std::vector<DetectionRecord>{});
    CHECK(lonely.at(3) == Counts{0, 1, 0});

    const std::vector<DetectionRecord> dup{rec("a", 0, b, 0.9), rec("a", 0, AABox(5.1, 5, 2, 2), 0.8)};
    CHECK(confusion_counts(dup, std::vector{rec("a", 0, b)}).at(0) == Counts{1, 1, 0});

    // Other image, same box: not a match.
    CHECK(confusion_counts(std::vector{rec("b", 0, b)}, std::vector{rec("a", 0, b)}).at(0) == Counts{0, 1, 1});
    CHECK_THROWS_AS(confusion_counts(dup, gts, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(confusion_counts(dup, gts, 1.0), std::invalid_argument);
}

TEST_CASE("threshold is inclusive") {
    // IoU exactly 0.5: boxes [0,2]x[0,1] and [0,1]x[0,1]... area 1 vs 2 -> 0.5.
    const AABox g(1, 0.5, 2, 1), d(0.5, 0.5, 1, 1);
    REQUIRE(iou(d, g) == 0.5);
    CHECK(confusion_counts(std::vector{rec("a", 0, d)}, std::vector{rec("a", 0, g)}).at(0).tp == 1);
}

TEST_CASE("precision and recall") {
    CHECK(precision_recall({3, 1, 0}).precision == 0.75);
    CHECK(precision_recall({3, 0, 2}).recall == 0.6);
    const RatePair z = precision_recall({0, 0, 0});
    CHECK(z.precision == 0.0);
    CHECK(z.recall == 0.0);
    CHECK_FALSE(z.precision_defined);
    CHECK_FALSE(z.recall_defined);
}

TEST_CASE("average precision examples") {
    const AABox g1(1, 1, 2, 2), g2(10, 10, 2, 2), far(30, 30, 2, 2);
    const std::vector<DetectionRecord> gts{rec("a", 0, g1), rec("a", 0, g2)};
    const EvalReport both = evaluate(std::vector{rec("a", 0, g1, 0.9), rec("a", 0, g2, 0.8)}, gts);
    CHECK(both.per_class.at(0).ap == 1.0);

    const EvalReport tft =
        evaluate(std::vector{rec("a", 0, g1, 0.9), rec("a", 0, far, 0.8), rec("a", 0, g2, 0.7)}, gts);
    // 1/2 + (1/2)(2/3) rounds to the double just below 5/6.
    CHECK(tft.per_class.at(0).ap == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(tft.map == tft.per_class.at(0).ap);

    CHECK(average_precision(std::vector<PrPoint>{}) == 0.0);
    const std::vector<double> aps{1.0, 0.5};
    CHECK(mean_ap(aps) == 0.75);
    const std::vector<PrPoint> backwards{{0.5, 1, 0.9}, {0.2, 1, 0.8}};
    CHECK_THROWS_AS(average_precision(backwards), std::invalid_argument);
}

TEST_CASE("eleven-point interpolation") {
    // Curve with recall 0.5 at precision 1 and recall 1 at precision 2/3.
    const std::vector<PrPoint> c{{0.5, 1.0, 0.9}, {0.5, 0.5, 0.8}, {1.0, 2.0 / 3.0, 0.7}};
    const double want = (6 * 1.0 + 5 * (2.0 / 3.0)) / 11.0;
    CHECK(average_precision(c, ApInterpolation::ElevenPoint) == doctest::Approx(want).epsilon(1e-15));
    CHECK(average_precision(c) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("classes without ground truth are reported but excluded from the mean") {
    const AABox b(1, 1, 2, 2);
    const EvalReport r = evaluate(std::vector{rec("a", 0, b, 0.9), rec("a", 4, b, 0.5)}, std::vector{rec("a", 0, b)});
    REQUIRE(r.per_class.size() == 2);
    CHECK(r.per_class[1].class_id == 4);
    CHECK_FALSE(r.per_class[1].has_ground_truth);
    CHECK(r.map == 1.0);
}

TEST_CASE("pipeline equals the brute-force evaluator") {
    std::mt19937_64 rng(2024);
    for (int t = 0; t < 100; ++t) {
        const Scenario s = random_scenario(rng);
        const EvalReport r = evaluate(s.dets, s.gts);
        std::vector<double> aps;
        for (const auto& c : r.per_class) {
            CHECK(c.counts.tp + c.counts.fn == c.num_gt);
            CHECK(c.ap >= 0.0);
            CHECK(c.ap <= 1.0);
            if (!c.has_ground_truth) continue;
            const double want = brute_ap(s.dets, s.gts, c.class_id, 0.5);
            CHECK(c.ap == want);
            aps.push_back(want);
        }
        double sum = 0;
        for (double a : aps) sum += a;
        CHECK(r.map == (aps.empty() ? 0.0 : sum / static_cast<double>(aps.size())));
    }
}

TEST_CASE("AP depends only on the ranking") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 30; ++t) {
        Scenario s = random_scenario(rng);
        const EvalReport a = evaluate(s.dets, s.gts);
        for (auto& d : s.dets) d.confidence = std::pow(d.confidence, 3.0) * 0.5;
        const EvalReport b = evaluate(s.dets, s.gts);
        REQUIRE(a.per_class.size() == b.per_class.size());
        for (std::size_t k = 0; k < a.per_class.size(); ++k) CHECK(a.per_class[k].ap == b.per_class[k].ap);
    }
}

TEST_CASE("low false positives never help, top true positives never hurt") {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 30; ++t) {
        Scenario s = random_scenario(rng);
        const EvalReport base = evaluate(s.dets, s.gts);
        const int cls = s.gts[0].class_id;
        double ap0 = 0;
        for (const auto& c : base.per_class)
            if (c.class_id == cls) ap0 = c.ap;

        auto low = s.dets;
        low.push_back(rec("nowhere", cls, AABox(100, 100, 1, 1), 0.0));
        const EvalReport l = evaluate(low, s.gts);
        for (const auto& c : l.per_class)
            if (c.class_id == cls) CHECK(c.ap <= ap0);

        // A perfect detection of a fresh ground truth at the top rank.
        auto gts = s.gts;
        gts.push_back(rec("fresh", cls, AABox(50, 50, 2, 2)));
        const EvalReport before = evaluate(s.dets, gts);
        auto top = s.dets;
        top.push_back(rec("fresh", cls, AABox(50, 50, 2, 2), 1.0));
        const EvalReport after = evaluate(top, gts);
        double b0 = 0, a0 = 0;
        for (const auto& c : before.per_class)
            if (c.class_id == cls) b0 = c.ap;
        for (const auto& c : after.per_class)
            if (c.class_id == cls) a0 = c.ap;
        CHECK(a0 >= b0);
    }
}

TEST_CASE("confidence ties are broken by input order") {
    const AABox g(1, 1, 2, 2);
    const std::vector<DetectionRecord> dets{rec("a", 0, AABox(1.3, 1, 2, 2), 0.5), rec("a", 0, g, 0.5)};
    const auto m = match_detections(dets, std::vector{rec("a", 0, g)});
    CHECK(m.at(0).ranked == std::vector<std::size_t>{0, 1});
    CHECK(m.at(0).is_tp == std::vector<bool>{true, false});
    CHECK_THROWS_AS(match_detections(std::vector{rec("a", 0, g, 1.5)}, std::vector{rec("a", 0, g)}),
                    std::invalid_argument);
}
