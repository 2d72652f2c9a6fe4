#include <algorithm>
#include <cmath>
#include <random>

#include "commands.hpp"
#include "mks/attention.hpp"
#include "mks/fuse.hpp"

namespace mks::cli {
namespace {

double max_abs_diff(const FeatureTensor& a, const FeatureTensor& b) {
    if (!(a.shape() == b.shape())) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

struct FuseOptions {
    CommonOptions common;
    std::size_t trials = 100;
    std::size_t block_trials = 50;
    double tol = 1e-5;
};

int run_fuse_check(const FuseOptions& o) {
    Json cfg = {{"trials", o.trials}, {"block_trials", o.block_trials}, {"tol", o.tol}, {"seed", o.common.seed}};
    Report rep("fuse-check", cfg);
    rep.set_columns({"trial", "kind", "n", "in_c", "out_c", "kernel", "stride", "pad", "h", "w", "max_abs_diff",
                     "identity_exact", "pass"});

    std::mt19937_64 rng(o.common.seed);
    auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    std::size_t failures = 0;
    double worst = 0.0;

    for (std::size_t t = 0; t < o.trials; ++t) {
        const std::size_t k = 2 * pick(0, 2) + 1;
        const std::size_t in_c = pick(1, 6), out_c = pick(1, 6), n = pick(1, 2);
        const std::size_t stride = pick(1, 2), pad = pick(0, k / 2);
        const std::size_t h = pick(k, 12), w = pick(k, 12);
        Conv2DParams conv = Conv2DParams::random(out_c, in_c, k, k, rng);
        conv.stride_h = conv.stride_w = stride;
        conv.pad_h = conv.pad_w = pad;
        const BNParams bn = BNParams::random(out_c, rng);
        const FeatureTensor x = FeatureTensor::uniform({n, in_c, h, w}, rng);

        const double diff = max_abs_diff(batchnorm(conv2d(x, conv), bn), conv2d(x, fold_bn(conv, bn).conv));
        const BNParams ident = BNParams::identity(out_c);
        const bool exact = batchnorm(conv2d(x, conv), ident) == conv2d(x, fold_bn(conv, ident).conv);
        const bool pass = diff < o.tol && exact;
        failures += pass ? 0 : 1;
        worst = std::max(worst, diff);
        rep.add_row({t, "conv", n, in_c, out_c, k, stride, pad, h, w, real(diff), exact, pass});
    }
    for (std::size_t t = 0; t < o.block_trials; ++t) {
        const std::size_t k = 2 * pick(0, 1) + 1;
        const std::size_t in_c = 2 * pick(1, 3), out_c = pick(1, 6);
        const std::size_t h = pick(k, 10), w = pick(k, 10);
        const FusionBlockParams p = FusionBlockParams::random(in_c, out_c, k, rng);
        const FeatureTensor x = FeatureTensor::uniform({1, in_c, h, w}, rng);
        const double diff = max_abs_diff(fusion_block(x, p), fusion_block(x, reparameterize(p)));
        const bool pass = diff < o.tol;
        failures += pass ? 0 : 1;
        worst = std::max(worst, diff);
        rep.add_row({t, "block", 1, in_c, out_c, k, 1, k / 2, h, w, real(diff), nullptr, pass});
    }
    rep.summary() = {{"checks", o.trials + o.block_trials}, {"failures", failures}, {"max_abs_diff", real(worst)},
                     {"passed", failures == 0}};
    rep.write(o.common.format, o.common.out);
    return failures == 0 ? 0 : kExitCheckFailed;
}

struct AttnOptions {
    CommonOptions common;
    std::string input, params, output;
    std::vector<std::size_t> shape{1, 16, 8, 8};
    std::size_t reduction = 16;
};

int run_attn_demo(const AttnOptions& o) {
    std::mt19937_64 rng(o.common.seed);
    FeatureTensor x;
    Json cfg = Json::object();
    if (!o.input.empty()) {
        const auto blobs = read_tensor_blobs(o.input);
        if (blobs.empty()) throw std::runtime_error(o.input + ": no tensor blob");
        x = blobs.front();
        cfg["input"] = path_echo(o.input);
    } else {
        if (o.shape.size() != 4) throw CLI::ValidationError("--shape", "expected n,c,h,w");
        x = FeatureTensor::uniform({o.shape[0], o.shape[1], o.shape[2], o.shape[3]}, rng);
        cfg["shape"] = o.shape;
    }
    ChannelAttnParams cp;
    SpatialAttnParams sp;
    if (!o.params.empty()) {
        attention_params_from_blobs(read_tensor_blobs(o.params), o.reduction, cp, sp);
        cfg["params"] = path_echo(o.params);
    } else {
        cp = ChannelAttnParams::random(x.shape().c, o.reduction, rng);
        sp = SpatialAttnParams::random(rng);
    }
    cfg["reduction"] = o.reduction;
    cfg["seed"] = o.common.seed;
    if (!o.output.empty()) cfg["output"] = path_echo(o.output);

    const CbamResult r = cbam(x, cp, sp);
    const FeatureTensor par = parallel_attention(x, cp, sp);

    Report rep("attn-demo", cfg);
    rep.set_columns({"tensor", "shape", "min", "max", "mean"});
    auto stats = [&](const char* name, const FeatureTensor& t) {
        const auto d = t.data();
        const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
        double s = 0.0;
        for (double v : d) s += v;
        rep.add_row({name, to_string(t.shape()), real(*lo), real(*hi), real(s / static_cast<double>(d.size()))});
    };
    stats("input", x);
    stats("channel_weights", r.channel_weights);
    stats("spatial_map", r.spatial_map);
    stats("cascade", r.output);
    stats("parallel", par);

    auto in_open_unit = [](const FeatureTensor& t) {
        return std::all_of(t.data().begin(), t.data().end(), [](double v) { return v > 0.0 && v < 1.0; });
    };
    const bool shape_ok = r.output.shape() == x.shape();
    const bool weights_ok = in_open_unit(r.channel_weights) && in_open_unit(r.spatial_map);
    if (!o.output.empty()) {
        const std::vector<FeatureTensor> blobs{r.output, r.channel_weights, r.spatial_map, par};
        write_tensor_blobs(o.output, blobs);
    }
    rep.summary() = {{"shape_preserved", shape_ok},
                     {"weights_in_open_unit", weights_ok},
                     {"cascade_vs_parallel_max_diff", real(max_abs_diff(r.output, par))},
                     {"passed", shape_ok && weights_ok}};
    rep.write(o.common.format, o.common.out);
    return shape_ok && weights_ok ? 0 : kExitCheckFailed;
}

} // namespace

void register_tensor_commands(CLI::App& app, const ExitCode& code) {
    auto fo = std::make_shared<FuseOptions>();
    auto* sub = app.add_subcommand("fuse-check", "Batch-norm folding and block reparameterization equivalence");
    sub->add_option("--trials", fo->trials, "Random conv + BN triples")->capture_default_str();
    sub->add_option("--block-trials", fo->block_trials, "Random fusion blocks")->capture_default_str();
    sub->add_option("--tol", fo->tol, "Max absolute difference")->capture_default_str();
    add_common(*sub, fo->common);
    sub->callback([fo, code] { *code = run_fuse_check(*fo); });

    auto ao = std::make_shared<AttnOptions>();
    sub = app.add_subcommand("attn-demo", "Channel-then-spatial attention on a tensor blob");
    sub->add_option("--input", ao->input, "Tensor blob file (first blob is used)");
    sub->add_option("--shape", ao->shape, "Random input shape n,c,h,w when no --input")->delimiter(',');
    sub->add_option("--params", ao->params, "Attention parameter blobs (default: random)");
    sub->add_option("--reduction", ao->reduction, "Channel reduction ratio")->capture_default_str();
    sub->add_option("--output", ao->output, "Write output, channel weights, spatial map and parallel output blobs");
    add_common(*sub, ao->common);
    sub->callback([ao, code] { *code = run_attn_demo(*ao); });
}

} // namespace mks::cli
