#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "commands.hpp"
#include "mks/records_io.hpp"
#include "mks/robustness.hpp"

namespace mks::cli {
namespace {

struct ImageSource {
    std::string path;
    std::size_t width = 64, height = 64;

    /// The PGM at `path`, or a smooth diagonal ramp (gray 30..190).
    GrayImage load() const {
        if (!path.empty()) return read_pgm(path);
        if (width < 2 || height < 2) throw CLI::ValidationError("--width/--height", "synthetic image needs >= 2x2");
        GrayImage img(width, height);
        const double span = static_cast<double>(width + height - 2);
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) img.at(x, y) = 30.0 + 160.0 * static_cast<double>(x + y) / span;
        return img;
    }
    void echo(Json& cfg) const {
        if (path.empty()) {
            cfg["image"] = "synthetic";
            cfg["width"] = width;
            cfg["height"] = height;
        } else {
            cfg["image"] = path_echo(path);
        }
    }
};

void add_image(CLI::App& sub, ImageSource& src) {
    sub.add_option("--image", src.path, "Binary PGM input (default: synthetic ramp)");
    sub.add_option("--width", src.width, "Synthetic image width")->capture_default_str();
    sub.add_option("--height", src.height, "Synthetic image height")->capture_default_str();
}

std::string level_text(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct DegradeOptions {
    std::string mode = "brightness";
    std::string range; // default per mode
    std::optional<double> fixed_mean;

    SweepConfig config(double fine_step_override = 0.0) const {
        SweepConfig c = parse_sweep_mode(mode) == SweepMode::Brightness ? SweepConfig::brightness_defaults()
                                                                        : SweepConfig::noise_defaults();
        if (!range.empty()) {
            const Range r = parse_range(range);
            c.lo = r.lo;
            c.hi = r.hi;
            c.coarse_step = r.step;
        }
        if (fine_step_override > 0.0) c.fine_step = fine_step_override;
        if (fixed_mean) {
            c.joint_noise = false;
            c.fixed_mean = *fixed_mean;
        }
        return c;
    }
    void echo(Json& cfg, const SweepConfig& c) const {
        cfg["mode"] = mode;
        cfg["range"] = level_text(c.lo) + ":" + level_text(c.hi) + ":" + level_text(c.coarse_step);
        if (c.mode == SweepMode::Noise) cfg["noise_mean"] = c.joint_noise ? Json("joint") : Json(c.fixed_mean);
    }
};

void add_degrade(CLI::App& sub, DegradeOptions& d) {
    sub.add_option("--mode", d.mode, "Degradation axis")->check(CLI::IsMember({"brightness", "noise"}))
        ->capture_default_str();
    sub.add_option("--range", d.range, "Coarse grid lo:hi:step (default 18:160:10, noise 0:0.1:0.001)");
    sub.add_option("--fixed-mean", d.fixed_mean, "Noise mode: hold the mean fixed and sweep only the variance");
}

// ---------------------------------------------------------------------------

struct SweepOptions {
    CommonOptions common;
    ImageSource image;
    DegradeOptions degrade;
    double fine_step = 0.0;
    std::string outcomes, detections, gts, profile;
    double iou_thresh = 0.5;
};

bool same_level(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

Scorer make_scorer(const SweepOptions& o) {
    const int sources = !o.outcomes.empty() + !o.detections.empty() + !o.profile.empty();
    if (sources != 1) throw CLI::ValidationError("sweep", "give exactly one of --outcomes, --detections, --profile");

    if (!o.outcomes.empty()) {
        auto table = std::make_shared<std::vector<std::pair<double, Outcome>>>(read_outcomes(o.outcomes));
        return [table](double level, const GrayImage&) {
            for (const auto& [l, out] : *table)
                if (same_level(l, level)) return out;
            throw std::runtime_error("outcome file has no entry for level " + level_text(level));
        };
    }
    if (!o.detections.empty()) {
        if (o.gts.empty()) throw CLI::ValidationError("--gts", "required with --detections");
        auto runs = std::make_shared<std::vector<LevelDetections>>(read_level_detections(o.detections));
        auto truth = std::make_shared<std::vector<GroundTruthRecord>>(read_detections(o.gts));
        for (auto& g : *truth) g.image_id = "frame";
        for (auto& run : *runs)
            for (auto& d : run.detections) d.image_id = "frame";
        const double thr = o.iou_thresh;
        return [runs, truth, thr](double level, const GrayImage&) {
            for (const auto& run : *runs)
                if (same_level(run.level, level)) return classify_outcome(run.detections, *truth, thr);
            throw std::runtime_error("detection file has no run for level " + level_text(level));
        };
    }
    if (o.profile == "reference") {
        return [](double level, const GrayImage&) {
            if (level < 12.5) return Outcome::Fail;
            if (level < 28.5) return Outcome::Miss;
            if (level <= 148.5) return Outcome::Clean;
            return Outcome::Miss;
        };
    }
    if (o.profile.rfind("threshold:", 0) == 0) {
        const double t = std::stod(o.profile.substr(10));
        return [t](double level, const GrayImage&) { return level >= t ? Outcome::Clean : Outcome::Fail; };
    }
    throw CLI::ValidationError("--profile", "expected 'reference' or 'threshold:X'");
}

int run_sweep(const SweepOptions& o) {
    SweepConfig cfg = o.degrade.config(o.fine_step);
    cfg.seed = o.common.seed;
    const Scorer scorer = make_scorer(o);
    const GrayImage img = o.image.load();
    const SweepReport sr = sweep(img, cfg, scorer);

    Json echo = Json::object();
    o.image.echo(echo);
    o.degrade.echo(echo, cfg);
    echo["fine_step"] = cfg.fine_step;
    if (!o.outcomes.empty()) echo["outcomes"] = path_echo(o.outcomes);
    if (!o.detections.empty()) {
        echo["detections"] = path_echo(o.detections);
        echo["gts"] = path_echo(o.gts);
        echo["iou_thresh"] = o.iou_thresh;
    }
    if (!o.profile.empty()) echo["profile"] = o.profile;
    echo["seed"] = cfg.seed;
    Report rep("sweep", echo);
    rep.set_columns({"level", "psnr_db", "outcome", "pass"});
    std::size_t fine = 0;
    for (const auto& s : sr.samples) {
        fine += s.fine ? 1 : 0;
        rep.add_row({real(s.level), real(s.psnr_db), std::string(to_string(s.outcome)), s.fine ? "fine" : "coarse"});
    }
    Json bands = Json::array();
    for (const auto& b : sr.bands) bands.push_back({{"band", to_string(b.band)}, {"lo", real(b.lo)}, {"hi", real(b.hi)}});
    rep.summary() = {{"samples", sr.samples.size()}, {"fine_samples", fine}, {"bands", bands}};
    rep.write(o.common.format, o.common.out);
    return 0;
}

// ---------------------------------------------------------------------------

struct SeriesOptions {
    CommonOptions common;
    ImageSource image;
    DegradeOptions degrade;
    std::string out_dir;
    std::string prefix = "level_";
};

double quantized_mean(const GrayImage& img) {
    double s = 0.0;
    for (auto v : img.quantized()) s += v;
    return s / static_cast<double>(img.size());
}

int run_gen_series(const SeriesOptions& o) {
    SweepConfig cfg = o.degrade.config();
    cfg.seed = o.common.seed;
    cfg.validate();
    const GrayImage img = o.image.load();
    std::filesystem::create_directories(o.out_dir);

    Json echo = Json::object();
    o.image.echo(echo);
    o.degrade.echo(echo, cfg);
    echo["out_dir"] = path_echo(o.out_dir);
    echo["prefix"] = o.prefix;
    echo["seed"] = cfg.seed;
    Report rep("gen-series", echo);
    rep.set_columns({"level", "file", "mean", "psnr_db", "within_target"});

    std::size_t off_target = 0;
    const auto levels = grid_levels(cfg.lo, cfg.hi, cfg.coarse_step);
    for (double level : levels) {
        const GrayImage out = degrade(img, cfg, level);
        const std::string name = o.prefix + level_text(level) + ".pgm";
        write_pgm((std::filesystem::path(o.out_dir) / name).string(), out);
        const double m = quantized_mean(out);
        Json within = nullptr;
        if (cfg.mode == SweepMode::Brightness) {
            const bool ok = std::abs(m - level) <= 1.0;
            off_target += ok ? 0 : 1;
            within = ok;
        }
        rep.add_row({real(level), name, real(m), real(psnr(img, out)), within});
    }
    rep.summary() = {{"images", levels.size()}, {"off_target", off_target}, {"passed", off_target == 0}};
    rep.write(o.common.format, o.common.out);
    return off_target == 0 ? 0 : kExitCheckFailed;
}

// ---------------------------------------------------------------------------

struct HistogramOptions {
    CommonOptions common;
    ImageSource image;
    std::string mask;
    std::vector<std::size_t> rect;
    bool all_bins = false;
};

int run_histogram(const HistogramOptions& o) {
    const GrayImage img = o.image.load();
    if (!o.mask.empty() && !o.rect.empty()) throw CLI::ValidationError("histogram", "--mask and --rect are exclusive");
    MaskRegion region;
    Json echo = Json::object();
    o.image.echo(echo);
    if (!o.mask.empty()) {
        region = MaskRegion::from_image(read_pgm(o.mask));
        echo["mask"] = path_echo(o.mask);
    } else if (!o.rect.empty()) {
        if (o.rect.size() != 4) throw CLI::ValidationError("--rect", "expected x,y,w,h");
        region = MaskRegion::rectangle(img.width(), img.height(), o.rect[0], o.rect[1], o.rect[2], o.rect[3]);
        echo["rect"] = o.rect;
    } else {
        region = MaskRegion::rectangle(img.width(), img.height(), 0, 0, img.width(), img.height());
        echo["mask"] = "full";
    }
    echo["all_bins"] = o.all_bins;
    const Histogram hist = mask_histogram(img, region);

    Report rep("histogram", echo);
    rep.set_columns({"bin", "count"});
    std::uint64_t total = 0, weighted = 0;
    std::size_t nonzero = 0;
    for (std::size_t b = 0; b < hist.size(); ++b) {
        total += hist[b];
        weighted += hist[b] * b;
        nonzero += hist[b] ? 1 : 0;
        if (hist[b] || o.all_bins) rep.add_row({b, hist[b]});
    }
    const bool consistent = total == region.area();
    rep.summary() = {{"area", region.area()},
                     {"total", total},
                     {"nonzero_bins", nonzero},
                     {"mean", real(static_cast<double>(weighted) / static_cast<double>(total))},
                     {"passed", consistent}};
    rep.write(o.common.format, o.common.out);
    return consistent ? 0 : kExitCheckFailed;
}

} // namespace

void register_image_commands(CLI::App& app, const ExitCode& code) {
    auto so = std::make_shared<SweepOptions>();
    auto* sub = app.add_subcommand("sweep", "Coarse-to-fine degradation sweep with outcome bands");
    add_image(*sub, so->image);
    add_degrade(*sub, so->degrade);
    sub->add_option("--fine-step", so->fine_step, "Refinement step (default 1, noise 0.0001)");
    sub->add_option("--outcomes", so->outcomes, "Per-level outcomes: level clean|miss|fail");
    sub->add_option("--detections", so->detections, "Per-level detections: level class_id cx cy w h [confidence]");
    sub->add_option("--gts", so->gts, "Ground truths for --detections: image_id class_id cx cy w h");
    sub->add_option("--profile", so->profile, "Built-in scorer: reference | threshold:X");
    sub->add_option("--iou-thresh", so->iou_thresh, "IoU threshold for --detections")
        ->check(CLI::Range(0.0, 1.0))->capture_default_str();
    add_common(*sub, so->common);
    sub->callback([so, code] { *code = run_sweep(*so); });

    auto go = std::make_shared<SeriesOptions>();
    sub = app.add_subcommand("gen-series", "Write one degraded PGM per grid level");
    add_image(*sub, go->image);
    add_degrade(*sub, go->degrade);
    sub->add_option("--out-dir", go->out_dir, "Directory for the images")->required();
    sub->add_option("--prefix", go->prefix, "File name prefix")->capture_default_str();
    add_common(*sub, go->common);
    sub->callback([go, code] { *code = run_gen_series(*go); });

    auto ho = std::make_shared<HistogramOptions>();
    sub = app.add_subcommand("histogram", "256-bin luminance histogram of a masked region");
    add_image(*sub, ho->image);
    sub->add_option("--mask", ho->mask, "PGM mask; nonzero pixels are inside");
    sub->add_option("--rect", ho->rect, "Rectangle x,y,w,h")->delimiter(',');
    sub->add_flag("--all-bins", ho->all_bins, "Emit empty bins too");
    add_common(*sub, ho->common, false);
    sub->callback([ho, code] { *code = run_histogram(*ho); });
}

} // namespace mks::cli
