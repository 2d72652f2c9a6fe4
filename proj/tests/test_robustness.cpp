#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "doctest.h"
#include "mks/robustness.hpp"

using namespace mks;

namespace {

GrayImage ramp(std::size_t w = 64, std::size_t h = 64) {
    GrayImage img(w, h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            img.at(x, y) = 30.0 + 160.0 * static_cast<double>(x + y) / static_cast<double>(w + h - 2);
    return img;
}

double quantized_mean(const GrayImage& img) {
    const auto q = img.quantized();
    double s = 0;
    for (auto v : q) s += v;
    return s / static_cast<double>(q.size());
}

Outcome profile_scorer(double level, const GrayImage&) {
    if (level < 12.5) return Outcome::Fail;
    if (level < 28.5) return Outcome::Miss;
    if (level <= 148.5) return Outcome::Clean;
    return Outcome::Miss;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("mks_test_" + name)).string();
}

DetectionRecord rec(AABox b, double conf = 0.9) { return {"f", 0, b, conf}; }

} // namespace

TEST_CASE("grid levels are index based") {
    const auto g = grid_levels(18, 160, 10);
    REQUIRE(g.size() == 15);
    CHECK(g.front() == 18);
    CHECK(g.back() == 158);
    const auto n = grid_levels(0, 0.1, 0.001);
    CHECK(n.size() == 101);
    CHECK(n.back() == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(grid_levels(5, 5, 1).size() == 1);
    CHECK_THROWS_AS(grid_levels(0, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(grid_levels(2, 1, 1), std::invalid_argument);
}

TEST_CASE("brightness series hits every target within one gray level") {
    const GrayImage src = ramp();
    const auto series = brightness_series(src, 18, 160, 10);
    const auto levels = grid_levels(18, 160, 10);
    REQUIRE(series.size() == 15);
    for (std::size_t i = 0; i < series.size(); ++i) {
        CAPTURE(levels[i]);
        CHECK(std::abs(quantized_mean(series[i]) - levels[i]) <= 1.0);
    }
    const double m60 = quantized_mean(set_brightness(src, 60));
    CHECK(m60 >= 59.0);
    CHECK(m60 <= 61.0);
}

TEST_CASE("brightness is idempotent at the achieved mean") {
    const BrightnessResult r = adjust_brightness(ramp(), 90);
    const BrightnessResult again = adjust_brightness(r.image, r.achieved_mean);
    for (std::size_t i = 0; i < r.image.size(); ++i)
        CHECK(again.image.pixels()[i] == doctest::Approx(r.image.pixels()[i]).epsilon(1e-12));
}

TEST_CASE("brightness handles clamping and black images") {
    // Bright target forces clamping at 255; re-scaling compensates.
    const BrightnessResult hi = adjust_brightness(ramp(), 230);
    CHECK(std::abs(hi.achieved_mean - 230) <= 0.25);
    CHECK(hi.iterations > 1);
    const BrightnessResult black = adjust_brightness(GrayImage(8, 8, 0.0), 40);
    CHECK(black.additive_fallback);
    CHECK(black.achieved_mean == 40.0);
    CHECK(adjust_brightness(GrayImage(8, 8, 0.0), 0).image == GrayImage(8, 8, 0.0));
    CHECK_THROWS_AS(adjust_brightness(ramp(), 300), std::invalid_argument);
    CHECK_THROWS_AS(adjust_brightness(GrayImage(), 10), std::invalid_argument);
}

TEST_CASE("zero noise is the identity and seeds are deterministic") {
    const GrayImage src = ramp();
    CHECK(add_gaussian_noise(src, 0, 0, 1) == src);
    CHECK(add_gaussian_noise(src, 0, 0.01, 9) == add_gaussian_noise(src, 0, 0.01, 9));
    CHECK_FALSE(add_gaussian_noise(src, 0, 0.01, 9) == add_gaussian_noise(src, 0, 0.01, 10));
    CHECK_THROWS_AS(add_gaussian_noise(src, 0, -1, 0), std::invalid_argument);
}

TEST_CASE("psnr values") {
    CHECK(psnr_from_mse(0.01) == 20.0);
    CHECK(psnr_from_mse(0.001) == 30.0);
    CHECK(std::isinf(psnr_from_mse(0.0)));
    const GrayImage a = ramp();
    CHECK(std::isinf(psnr(a, a)));
    CHECK_THROWS_AS(mse(a, ramp(32, 64)), std::invalid_argument);

    GrayImage b = a;
    b.at(0, 0) += 255.0;
    CHECK(mse(a, b) == doctest::Approx(1.0 / 4096.0).epsilon(1e-14));
}

TEST_CASE("noise variance shows up as mean squared error") {
    const GrayImage gray(1024, 1024, 127.5);
    const GrayImage noisy = add_gaussian_noise(gray, 0, 0.01, 42);
    const double m = mse(gray, noisy);
    CHECK(m == doctest::Approx(0.01).epsilon(0.1));
    CHECK(psnr(gray, noisy) == doctest::Approx(20.0).epsilon(0.025));
}

TEST_CASE("psnr decreases strictly with noise variance") {
    const GrayImage gray(128, 128, 127.5);
    double prev = std::numeric_limits<double>::infinity();
    for (double var : grid_levels(0.001, 0.1, 0.001)) {
        const double p = psnr(gray, add_gaussian_noise(gray, 0, var, 5));
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("sweep with a constant scorer yields one band") {
    const SweepReport r =
        sweep(ramp(16, 16), SweepConfig::brightness_defaults(), [](double, const GrayImage&) { return Outcome::Clean; });
    CHECK(r.samples.size() == 15);
    REQUIRE(r.bands.size() == 1);
    CHECK(r.bands[0].lo == 18);
    CHECK(r.bands[0].hi == 158);
}

TEST_CASE("sweep reproduces the reference band profile") {
    SweepConfig cfg;
    cfg.lo = 4;
    cfg.hi = 164;
    const SweepReport r = sweep(ramp(16, 16), cfg, profile_scorer);
    REQUIRE(r.bands.size() == 4);
    const Outcome want[] = {Outcome::Fail, Outcome::Miss, Outcome::Clean, Outcome::Miss};
    const double lo[] = {4, 13, 29, 149}, hi[] = {12, 28, 148, 164};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(r.bands[i].band == want[i]);
        CHECK(r.bands[i].lo == lo[i]);
        CHECK(r.bands[i].hi == hi[i]);
    }
    CHECK(r.samples.size() == 44);
    for (std::size_t i = 1; i < r.samples.size(); ++i) CHECK(r.samples[i - 1].level < r.samples[i].level);
}

TEST_CASE("refinement localizes a threshold to the fine step") {
    for (double t : {47.0, 100.0, 101.3}) {
        CAPTURE(t);
        SweepConfig cfg;
        const SweepReport r = sweep(ramp(16, 16), cfg, [t](double level, const GrayImage&) {
            return level >= t ? Outcome::Clean : Outcome::Fail;
        });
        REQUIRE(r.bands.size() == 2);
        CHECK(r.bands[1].lo >= t);
        CHECK(r.bands[1].lo - t < cfg.fine_step);
        CHECK(r.bands[1].lo - r.bands[0].hi == doctest::Approx(cfg.fine_step));
        CHECK(r.bands[0].lo == cfg.lo);
    }
}

TEST_CASE("fine samples never widen the coarse bands") {
    SweepConfig cfg;
    cfg.lo = 4;
    cfg.hi = 164;
    const SweepReport r = sweep(ramp(16, 16), cfg, profile_scorer);
    std::vector<SweepSample> coarse;
    for (const auto& s : r.samples)
        if (!s.fine) coarse.push_back(s);
    const auto cb = assemble_bands(coarse);
    REQUIRE(cb.size() == r.bands.size());
    for (std::size_t i = 0; i < cb.size(); ++i) {
        CHECK(cb[i].band == r.bands[i].band);
        CHECK(r.bands[i].lo <= cb[i].lo);
        CHECK(r.bands[i].hi >= cb[i].hi);
        CHECK(r.bands[i].hi - r.bands[i].lo >= cb[i].hi - cb[i].lo);
    }
    CHECK(r.bands.front().lo == cfg.lo);
    CHECK(r.bands.back().hi == 164);
}

TEST_CASE("non-monotone outcomes are reported as they are") {
    SweepConfig cfg;
    const SweepReport r = sweep(ramp(16, 16), cfg, [](double level, const GrayImage&) {
        return (level > 60 && level < 80) ? Outcome::Miss : Outcome::Clean;
    });
    REQUIRE(r.bands.size() == 3);
    CHECK(r.bands[0].band == Outcome::Clean);
    CHECK(r.bands[1].band == Outcome::Miss);
    CHECK(r.bands[1].lo == 61);
    CHECK(r.bands[1].hi == 79);
    CHECK(r.bands[2].band == Outcome::Clean);
}

TEST_CASE("noise sweep degrades with a fixed seed") {
    SweepConfig cfg = SweepConfig::noise_defaults();
    cfg.hi = 0.01;
    const GrayImage src = ramp(16, 16);
    auto scorer = [](double, const GrayImage&) { return Outcome::Clean; };
    const SweepReport a = sweep(src, cfg, scorer), b = sweep(src, cfg, scorer);
    REQUIRE(a.samples.size() == 11);
    CHECK(std::isinf(a.samples[0].psnr_db));
    for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].psnr_db == b.samples[i].psnr_db);
    cfg.joint_noise = false;
    CHECK(degrade(src, cfg, 0.0) == src);
}

TEST_CASE("sweep configuration validation") {
    SweepConfig cfg;
    cfg.fine_step = cfg.coarse_step;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SweepConfig{};
    cfg.hi = 300;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK(parse_outcome("miss") == Outcome::Miss);
    CHECK(to_string(Outcome::Fail) == "fail");
    CHECK_THROWS(parse_outcome("maybe"));
    CHECK(parse_sweep_mode("noise") == SweepMode::Noise);
}

TEST_CASE("outcome classification") {
    const AABox a(10, 10, 4, 4), b(30, 30, 4, 4), far(80, 80, 4, 4);
    const std::vector<GroundTruthRecord> gts{rec(a), rec(b)};
    CHECK(classify_outcome(std::vector{rec(a), rec(b)}, gts) == Outcome::Clean);
    CHECK(classify_outcome(std::vector{rec(a)}, gts) == Outcome::Miss);
    CHECK(classify_outcome(std::vector{rec(a), rec(b), rec(far)}, gts) == Outcome::Miss);
    CHECK(classify_outcome(std::vector{rec(far)}, gts) == Outcome::Fail);
    CHECK(classify_outcome(std::vector<DetectionRecord>{}, gts) == Outcome::Fail);
    CHECK(classify_outcome(std::vector<DetectionRecord>{}, std::vector<GroundTruthRecord>{}) == Outcome::Clean);
    CHECK(classify_outcome(std::vector{rec(far)}, std::vector<GroundTruthRecord>{}) == Outcome::Miss);
}

TEST_CASE("pgm round trip") {
    GrayImage img(5, 3);
    for (std::size_t i = 0; i < img.size(); ++i) img.pixels()[i] = static_cast<double>(i * 17);
    const std::string path = temp_path("rt.pgm");
    write_pgm(path, img);
    CHECK(read_pgm(path) == img);
    std::filesystem::remove(path);
}

TEST_CASE("pgm with comments and other maxvals") {
    const std::string p8 = temp_path("m15.pgm");
    {
        std::ofstream os(p8, std::ios::binary);
        os << "P5\n# comment\n3 1\n# another\n15\n";
        const unsigned char px[] = {0, 5, 15};
        os.write(reinterpret_cast<const char*>(px), 3);
    }
    const GrayImage a = read_pgm(p8);
    CHECK(a.width() == 3);
    CHECK(a.pixels()[0] == 0.0);
    CHECK(a.pixels()[1] == doctest::Approx(85.0));
    CHECK(a.pixels()[2] == doctest::Approx(255.0));

    const std::string p16 = temp_path("m1000.pgm");
    {
        std::ofstream os(p16, std::ios::binary);
        os << "P5 2 1 1000\n";
        const unsigned char px[] = {0x01, 0xF4, 0x03, 0xE8}; // 500, 1000
        os.write(reinterpret_cast<const char*>(px), 4);
    }
    const GrayImage b = read_pgm(p16);
    CHECK(b.pixels()[0] == doctest::Approx(127.5));
    CHECK(b.pixels()[1] == doctest::Approx(255.0));

    const std::string bad = temp_path("bad.pgm");
    {
        std::ofstream os(bad, std::ios::binary);
        os << "P2\n1 1\n255\n0\n";
    }
    CHECK_THROWS(read_pgm(bad));
    {
        std::ofstream os(bad, std::ios::binary);
        os << "P5\n4 4\n255\n";
    }
    CHECK_THROWS(read_pgm(bad));
    CHECK_THROWS(read_pgm(temp_path("does_not_exist.pgm")));
    for (const auto& p : {p8, p16, bad}) std::filesystem::remove(p);
}

TEST_CASE("mask histograms") {
    const GrayImage flat(10, 10, 128.0);
    const Histogram h = mask_histogram(flat, MaskRegion::rectangle(10, 10, 0, 0, 10, 10));
    CHECK(h[128] == 100);
    CHECK(std::accumulate(h.begin(), h.end(), std::uint64_t{0}) == 100);

    GrayImage two(10, 10, 20.0);
    for (std::size_t y = 0; y < 10; ++y)
        for (std::size_t x = 5; x < 10; ++x) two.at(x, y) = 200.0;
    const Histogram r = mask_histogram(two, MaskRegion::rectangle(10, 10, 3, 2, 4, 5));
    CHECK(r[20] == 10);
    CHECK(r[200] == 10);
    CHECK(std::accumulate(r.begin(), r.end(), std::uint64_t{0}) == 20);

    GrayImage mimg(10, 10, 0.0);
    mimg.at(7, 7) = 1.0;
    mimg.at(1, 1) = 255.0;
    const MaskRegion m = MaskRegion::from_image(mimg);
    CHECK(m.area() == 2);
    const Histogram f = mask_histogram(two, m);
    CHECK(f[20] == 1);
    CHECK(f[200] == 1);

    CHECK_THROWS_AS(MaskRegion::rectangle(10, 10, 8, 0, 3, 1), std::invalid_argument);
    CHECK_THROWS_AS(mask_histogram(flat, MaskRegion::rectangle(10, 10, 0, 0, 0, 0)), std::invalid_argument);
    CHECK_THROWS_AS(mask_histogram(flat, MaskRegion::rectangle(5, 5, 0, 0, 1, 1)), std::invalid_argument);
}
