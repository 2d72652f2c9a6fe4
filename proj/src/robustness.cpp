#include "mks/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include "mks/simd/kernels.hpp"

namespace mks {

GrayImage::GrayImage(std::size_t width, std::size_t height, double fill)
    : width_(width), height_(height), pixels_(width * height, fill) {}

GrayImage::GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != width * height) throw std::invalid_argument("GrayImage: pixel count does not match size");
    for (double v : pixels_)
        if (!std::isfinite(v)) throw std::invalid_argument("GrayImage: non-finite pixel");
}

double GrayImage::mean() const noexcept {
    if (pixels_.empty()) return 0.0;
    return simd::kernels().sum(pixels_.data(), pixels_.size()) / static_cast<double>(pixels_.size());
}

std::vector<std::uint8_t> GrayImage::quantized() const {
    std::vector<std::uint8_t> q(pixels_.size());
    for (std::size_t i = 0; i < pixels_.size(); ++i)
        q[i] = static_cast<std::uint8_t>(std::clamp(std::round(pixels_[i]), 0.0, 255.0));
    return q;
}

// ---------------------------------------------------------------------------
// PGM

namespace {

std::string next_token(std::istream& is) {
    std::string tok;
    int ch;
    while ((ch = is.get()) != EOF) {
        if (ch == '#') {
            while ((ch = is.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

std::size_t parse_dim(const std::string& tok, const std::string& path) {
    try {
        std::size_t pos = 0;
        const unsigned long v = std::stoul(tok, &pos);
        if (pos != tok.size() || v == 0) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(path + ": bad PGM header field '" + tok + "'");
    }
}

} // namespace

GrayImage read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    if (next_token(is) != "P5") throw std::runtime_error(path + ": not a binary PGM (P5)");
    const std::size_t w = parse_dim(next_token(is), path);
    const std::size_t h = parse_dim(next_token(is), path);
    const std::size_t maxval = parse_dim(next_token(is), path);
    if (maxval > 65535) throw std::runtime_error(path + ": maxval out of range");
    // next_token consumed exactly one whitespace byte after maxval.
    const std::size_t bytes_per = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(w * h * bytes_per);
    if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
        throw std::runtime_error(path + ": truncated pixel data");
    std::vector<double> px(w * h);
    const double rescale = 255.0 / static_cast<double>(maxval);
    for (std::size_t i = 0; i < px.size(); ++i) {
        const unsigned v = bytes_per == 1 ? raw[i] : (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
        px[i] = maxval == 255 ? static_cast<double>(v) : static_cast<double>(v) * rescale;
    }
    return {w, h, std::move(px)};
}

void write_pgm(const std::string& path, const GrayImage& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
    const auto q = img.quantized();
    os.write(reinterpret_cast<const char*>(q.data()), static_cast<std::streamsize>(q.size()));
    if (!os) throw std::runtime_error(path + ": write failed");
}

// ---------------------------------------------------------------------------
// Brightness

namespace {

constexpr int kMaxScaleRounds = 8;
constexpr double kMeanSlack = 0.25; // leaves room for rounding on output

void scale_clamped(std::span<const double> src, double s, std::span<double> dst) {
    simd::kernels().scale(s, src.data(), dst.data(), src.size());
    for (double& v : dst) v = std::clamp(v, 0.0, 255.0);
}

} // namespace

BrightnessResult adjust_brightness(const GrayImage& img, double target_gray) {
    if (!(target_gray >= 0.0 && target_gray <= 255.0))
        throw std::invalid_argument("brightness target must lie in [0, 255]");
    if (img.size() == 0) throw std::invalid_argument("brightness: empty image");
    BrightnessResult r;
    r.image = img;
    const double m0 = img.mean();
    if (m0 == 0.0) {
        if (target_gray == 0.0) return r;
        std::fill(r.image.pixels().begin(), r.image.pixels().end(), target_gray);
        r.achieved_mean = r.image.mean();
        r.additive_fallback = true;
        return r;
    }

    double s = target_gray / m0;
    double m = m0;
    for (int round = 0; round < kMaxScaleRounds; ++round) {
        scale_clamped(img.pixels(), s, r.image.pixels());
        m = r.image.mean();
        ++r.iterations;
        if (std::abs(m - target_gray) <= kMeanSlack || m == 0.0) break;
        s *= target_gray / m;
    }
    if (std::abs(m - target_gray) > kMeanSlack) {
        r.additive_fallback = true;
        for (int round = 0; round < kMaxScaleRounds && std::abs(m - target_gray) > kMeanSlack; ++round) {
            const double offset = target_gray - m;
            for (double& v : r.image.pixels()) v = std::clamp(v + offset, 0.0, 255.0);
            m = r.image.mean();
            ++r.iterations;
        }
    }
    r.achieved_mean = m;
    return r;
}

GrayImage set_brightness(const GrayImage& img, double target_gray) { return adjust_brightness(img, target_gray).image; }

std::vector<double> grid_levels(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) throw std::invalid_argument("grid: need step > 0 and hi >= lo");
    std::vector<double> out;
    const double span = (hi - lo) / step;
    const auto count = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
    for (std::size_t k = 0; k < count; ++k) out.push_back(lo + static_cast<double>(k) * step);
    return out;
}

std::vector<GrayImage> brightness_series(const GrayImage& img, double lo, double hi, double step) {
    std::vector<GrayImage> out;
    for (double level : grid_levels(lo, hi, step)) out.push_back(set_brightness(img, level));
    return out;
}

// ---------------------------------------------------------------------------
// Noise and PSNR

GrayImage add_gaussian_noise(const GrayImage& img, double mean, double var, std::uint64_t seed) {
    if (!(var >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument("noise: var must be >= 0, mean finite");
    GrayImage out = img;
    if (var == 0.0 && mean == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sd = std::sqrt(var);
    for (double& v : out.pixels()) {
        const double z = gauss(rng);
        const double u = std::clamp(v / 255.0 + mean + sd * z, 0.0, 1.0);
        v = u * 255.0;
    }
    return out;
}

double psnr_from_mse(double m) noexcept {
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(m);
}

double mse(const GrayImage& a, const GrayImage& b) {
    if (a.width() != b.width() || a.height() != b.height())
        throw std::invalid_argument("mse: image dimensions differ");
    if (a.size() == 0) throw std::invalid_argument("mse: empty images");
    const double ssd = simd::kernels().sq_diff_sum(a.pixels().data(), b.pixels().data(), a.size());
    return ssd / (255.0 * 255.0) / static_cast<double>(a.size());
}

double psnr(const GrayImage& a, const GrayImage& b) { return psnr_from_mse(mse(a, b)); }

// ---------------------------------------------------------------------------
// Sweeps

std::string_view to_string(Outcome o) noexcept {
    switch (o) {
    case Outcome::Clean: return "clean";
    case Outcome::Miss: return "miss";
    case Outcome::Fail: return "fail";
    }
    return "?";
}

Outcome parse_outcome(std::string_view s) {
    if (s == "clean") return Outcome::Clean;
    if (s == "miss") return Outcome::Miss;
    if (s == "fail") return Outcome::Fail;
    throw std::invalid_argument("unknown outcome '" + std::string(s) + "' (expected clean|miss|fail)");
}

std::string_view to_string(SweepMode m) noexcept { return m == SweepMode::Brightness ? "brightness" : "noise"; }

SweepMode parse_sweep_mode(std::string_view s) {
    if (s == "brightness") return SweepMode::Brightness;
    if (s == "noise") return SweepMode::Noise;
    throw std::invalid_argument("unknown sweep mode '" + std::string(s) + "' (expected brightness|noise)");
}

SweepConfig SweepConfig::brightness_defaults() { return {}; }

SweepConfig SweepConfig::noise_defaults() {
    SweepConfig c;
    c.mode = SweepMode::Noise;
    c.lo = 0.0;
    c.hi = 0.1;
    c.coarse_step = 0.001;
    c.fine_step = 0.0001;
    return c;
}

void SweepConfig::validate() const {
    if (!(coarse_step > 0.0) || !(fine_step > 0.0) || !(fine_step < coarse_step))
        throw std::invalid_argument("sweep: need 0 < fine_step < coarse_step");
    if (!(hi >= lo)) throw std::invalid_argument("sweep: range must satisfy lo <= hi");
    if (mode == SweepMode::Brightness && (lo < 0.0 || hi > 255.0))
        throw std::invalid_argument("sweep: brightness range must lie within [0, 255]");
    if (mode == SweepMode::Noise && lo < 0.0) throw std::invalid_argument("sweep: noise levels must be >= 0");
}

GrayImage degrade(const GrayImage& img, const SweepConfig& cfg, double level) {
    if (cfg.mode == SweepMode::Brightness) return set_brightness(img, level);
    const double mean = cfg.joint_noise ? level : cfg.fixed_mean;
    return add_gaussian_noise(img, mean, level, cfg.seed);
}

std::vector<RobustnessBand> assemble_bands(std::span<const SweepSample> samples) {
    std::vector<RobustnessBand> bands;
    for (const auto& s : samples) {
        if (!bands.empty() && bands.back().band == s.outcome) {
            bands.back().hi = s.level;
        } else {
            bands.push_back({s.outcome, s.level, s.level});
        }
    }
    return bands;
}

SweepReport sweep(const GrayImage& img, const SweepConfig& cfg, const Scorer& scorer) {
    cfg.validate();
    SweepReport rep;
    auto evaluate = [&](double level, bool fine) {
        const GrayImage degraded = degrade(img, cfg, level);
        rep.samples.push_back({level, psnr(img, degraded), scorer(level, degraded), fine});
    };

    for (double level : grid_levels(cfg.lo, cfg.hi, cfg.coarse_step)) evaluate(level, false);

    const std::vector<SweepSample> coarse = rep.samples;
    for (std::size_t i = 0; i + 1 < coarse.size(); ++i) {
        if (coarse[i].outcome == coarse[i + 1].outcome) continue;
        const double a = coarse[i].level;
        const double b = coarse[i + 1].level;
        for (std::size_t k = 1;; ++k) {
            const double level = a + static_cast<double>(k) * cfg.fine_step;
            if (level > b - 0.5 * cfg.fine_step) break;
            evaluate(level, true);
        }
    }
    std::stable_sort(rep.samples.begin(), rep.samples.end(),
                     [](const SweepSample& x, const SweepSample& y) { return x.level < y.level; });
    rep.bands = assemble_bands(rep.samples);
    return rep;
}

Outcome classify_outcome(std::span<const DetectionRecord> dets, std::span<const GroundTruthRecord> gts,
                         double iou_threshold) {
    Counts total;
    for (const auto& [cls, c] : confusion_counts(dets, gts, iou_threshold)) {
        total.tp += c.tp;
        total.fp += c.fp;
        total.fn += c.fn;
    }
    if (gts.empty()) return total.fp == 0 ? Outcome::Clean : Outcome::Miss;
    if (total.tp == 0) return Outcome::Fail;
    if (total.fn > 0 || total.fp > 0) return Outcome::Miss;
    return Outcome::Clean;
}

// ---------------------------------------------------------------------------
// Masks

MaskRegion MaskRegion::rectangle(std::size_t width, std::size_t height, std::size_t x, std::size_t y, std::size_t w,
                                 std::size_t h) {
    if (x + w > width || y + h > height) throw std::invalid_argument("mask rectangle exceeds image bounds");
    MaskRegion m{width, height, std::vector<bool>(width * height, false)};
    for (std::size_t r = y; r < y + h; ++r)
        for (std::size_t c = x; c < x + w; ++c) m.inside[r * width + c] = true;
    return m;
}

MaskRegion MaskRegion::from_image(const GrayImage& mask) {
    MaskRegion m{mask.width(), mask.height(), std::vector<bool>(mask.size(), false)};
    const auto px = mask.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) m.inside[i] = px[i] > 0.0;
    return m;
}

std::size_t MaskRegion::area() const noexcept {
    return static_cast<std::size_t>(std::count(inside.begin(), inside.end(), true));
}

Histogram mask_histogram(const GrayImage& img, const MaskRegion& mask) {
    if (mask.width != img.width() || mask.height != img.height())
        throw std::invalid_argument("mask dimensions differ from the image");
    if (mask.area() == 0) throw std::invalid_argument("mask region is empty");
    Histogram hist{};
    const auto q = img.quantized();
    for (std::size_t i = 0; i < q.size(); ++i)
        if (mask.inside[i]) ++hist[q[i]];
    return hist;
}

} // namespace mks
