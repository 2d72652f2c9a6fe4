#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mks/evalmetrics.hpp"

namespace mks {

/// Luminance image with real-valued pixels on the 0..255 scale. Values are
/// kept unquantized until written out.
class GrayImage {
public:
    GrayImage() = default;
    GrayImage(std::size_t width, std::size_t height, double fill = 0.0);
    GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return pixels_.size(); }

    double at(std::size_t x, std::size_t y) const noexcept { return pixels_[y * width_ + x]; }
    double& at(std::size_t x, std::size_t y) noexcept { return pixels_[y * width_ + x]; }

    std::span<const double> pixels() const noexcept { return pixels_; }
    std::span<double> pixels() noexcept { return pixels_; }

    double mean() const noexcept;
    /// Rounded and clamped to 0..255.
    std::vector<std::uint8_t> quantized() const;

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    std::size_t width_ = 0, height_ = 0;
    std::vector<double> pixels_;
};

/// Binary P5 PGM. maxval other than 255 is rescaled to 0..255 on read.
GrayImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const GrayImage& img);

struct BrightnessResult {
    GrayImage image;
    double achieved_mean = 0.0;
    int iterations = 0;
    bool additive_fallback = false; // multiplicative scaling could not reach the target
};

/// Rescales luminance so the mean becomes `target_gray` (0..255). Clamping at
/// 0/255 is compensated by re-scaling (at most 8 rounds); an all-black image or
/// a target out of multiplicative reach falls back to an additive offset.
BrightnessResult adjust_brightness(const GrayImage& img, double target_gray);
GrayImage set_brightness(const GrayImage& img, double target_gray);

/// Evenly spaced levels lo, lo + step, ... <= hi (index-based, no drift).
std::vector<double> grid_levels(double lo, double hi, double step);

/// One image per grid level.
std::vector<GrayImage> brightness_series(const GrayImage& img, double lo, double hi, double step);

/// Adds N(mean, var) noise on the [0,1] scale, clamps, and maps back to
/// 0..255. Deterministic for a fixed seed.
GrayImage add_gaussian_noise(const GrayImage& img, double mean, double var, std::uint64_t seed);

/// PSNR for a mean squared error on the [0,1] scale; +inf when mse == 0.
double psnr_from_mse(double mse) noexcept;
/// Mean squared error on the [0,1] scale.
double mse(const GrayImage& a, const GrayImage& b);
double psnr(const GrayImage& a, const GrayImage& b);

enum class Outcome { Clean, Miss, Fail };

std::string_view to_string(Outcome o) noexcept;
Outcome parse_outcome(std::string_view s);

enum class SweepMode { Brightness, Noise };

std::string_view to_string(SweepMode m) noexcept;
SweepMode parse_sweep_mode(std::string_view s);

struct SweepConfig {
    SweepMode mode = SweepMode::Brightness;
    double lo = 18.0;
    double hi = 160.0;
    double coarse_step = 10.0;
    double fine_step = 1.0;
    /// Noise mode: mean and var move together on the level grid unless a
    /// fixed value is given for one of them.
    bool joint_noise = true;
    double fixed_mean = 0.0;
    std::uint64_t seed = 42;

    static SweepConfig brightness_defaults();
    static SweepConfig noise_defaults();
    void validate() const;
};

struct SweepSample {
    double level = 0.0;
    double psnr_db = 0.0; // of the degraded image against the source
    Outcome outcome = Outcome::Clean;
    bool fine = false;    // produced by the refinement pass
};

struct RobustnessBand {
    Outcome band = Outcome::Clean;
    double lo = 0.0; // first sampled level in the band
    double hi = 0.0; // last sampled level in the band
};

struct SweepReport {
    std::vector<SweepSample> samples; // sorted by level
    std::vector<RobustnessBand> bands;
};

/// Outcome of the detector under test at a level, given the degraded image.
using Scorer = std::function<Outcome(double level, const GrayImage& degraded)>;

/// Degrades `img` to a level (brightness target or noise strength).
GrayImage degrade(const GrayImage& img, const SweepConfig& cfg, double level);

/// Coarse pass on the coarse grid, then every fine-grid level strictly between
/// each pair of adjacent coarse samples whose outcomes differ. Bands are the
/// maximal runs of equal outcome over all samples.
SweepReport sweep(const GrayImage& img, const SweepConfig& cfg, const Scorer& scorer);

std::vector<RobustnessBand> assemble_bands(std::span<const SweepSample> samples);

/// fail: zero TP; miss: TP > 0 with misses; clean: no misses and no false
/// positives (at the IoU threshold).
Outcome classify_outcome(std::span<const DetectionRecord> dets, std::span<const GroundTruthRecord> gts,
                         double iou_threshold = 0.5);

/// Boolean region mask, row-major, same size as the image.
struct MaskRegion {
    std::size_t width = 0, height = 0;
    std::vector<bool> inside;

    static MaskRegion rectangle(std::size_t width, std::size_t height, std::size_t x, std::size_t y, std::size_t w,
                                std::size_t h);
    static MaskRegion from_image(const GrayImage& mask); // nonzero pixels are inside
    std::size_t area() const noexcept;
};

using Histogram = std::array<std::uint64_t, 256>;

/// 256-bin histogram of quantized luminance inside the mask.
Histogram mask_histogram(const GrayImage& img, const MaskRegion& mask);

} // namespace mks
