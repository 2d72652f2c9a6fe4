#include "mks/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mks {

namespace {

constexpr std::size_t kSpatialKernel = 7;

std::vector<double> uniform_vec(std::size_t n, std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// MLP(v) for a single descriptor vector of length c.
std::vector<double> shared_mlp(const ChannelAttnParams& p, const std::vector<double>& v) {
    const std::size_t c = p.channels;
    const std::size_t hdim = p.hidden();
    std::vector<double> hid(hdim);
    for (std::size_t k = 0; k < hdim; ++k) {
        double acc = p.b1[k];
        for (std::size_t j = 0; j < c; ++j) acc += p.w1[k * c + j] * v[j];
        hid[k] = std::max(acc, 0.0);
    }
    std::vector<double> out(c);
    for (std::size_t j = 0; j < c; ++j) {
        double acc = p.b2[j];
        for (std::size_t k = 0; k < hdim; ++k) acc += p.w2[j * hdim + k] * hid[k];
        out[j] = acc;
    }
    return out;
}

} // namespace

SpatialAttnParams SpatialAttnParams::zeros() {
    return {Conv2DParams::zeros(1, 2, kSpatialKernel, kSpatialKernel)};
}

SpatialAttnParams SpatialAttnParams::random(std::mt19937_64& rng, double scale) {
    return {Conv2DParams::random(1, 2, kSpatialKernel, kSpatialKernel, rng, scale)};
}

void SpatialAttnParams::validate() const {
    if (conv.out_channels() != 1 || conv.in_channels() != 2 || conv.kernel_h() != kSpatialKernel ||
        conv.kernel_w() != kSpatialKernel)
        throw std::invalid_argument("spatial attention needs a 2 -> 1 7x7 convolution");
    if (conv.stride_h != 1 || conv.stride_w != 1 || conv.pad_h != 3 || conv.pad_w != 3)
        throw std::invalid_argument("spatial attention convolution must be stride 1, padding 3");
    if (conv.bias.size() != 1) throw std::invalid_argument("spatial attention bias must have one entry");
}

std::size_t ChannelAttnParams::hidden() const noexcept {
    if (channels == 0) return 0;
    const std::size_t r = std::clamp<std::size_t>(reduction_ratio, 1, channels);
    return std::max<std::size_t>(1, channels / r);
}

ChannelAttnParams ChannelAttnParams::zeros(std::size_t channels, std::size_t reduction_ratio) {
    if (channels == 0) throw std::invalid_argument("channel attention needs at least one channel");
    if (reduction_ratio == 0) throw std::invalid_argument("reduction ratio must be >= 1");
    ChannelAttnParams p;
    p.channels = channels;
    p.reduction_ratio = reduction_ratio;
    const std::size_t h = p.hidden();
    p.w1.assign(h * channels, 0.0);
    p.b1.assign(h, 0.0);
    p.w2.assign(channels * h, 0.0);
    p.b2.assign(channels, 0.0);
    return p;
}

ChannelAttnParams ChannelAttnParams::random(std::size_t channels, std::size_t reduction_ratio, std::mt19937_64& rng,
                                            double scale) {
    ChannelAttnParams p = zeros(channels, reduction_ratio);
    p.w1 = uniform_vec(p.w1.size(), rng, scale);
    p.b1 = uniform_vec(p.b1.size(), rng, scale);
    p.w2 = uniform_vec(p.w2.size(), rng, scale);
    p.b2 = uniform_vec(p.b2.size(), rng, scale);
    return p;
}

void ChannelAttnParams::validate() const {
    const std::size_t h = hidden();
    if (channels == 0 || reduction_ratio == 0 || w1.size() != h * channels || b1.size() != h ||
        w2.size() != channels * h || b2.size() != channels)
        throw std::invalid_argument("channel attention parameters are inconsistent with c=" +
                                    std::to_string(channels) + ", r=" + std::to_string(reduction_ratio));
}

FeatureTensor channel_attention_map(const FeatureTensor& x, const ChannelAttnParams& p) {
    p.validate();
    const Shape4& s = x.shape();
    if (s.c != p.channels)
        throw std::invalid_argument("channel attention: tensor has " + std::to_string(s.c) + " channels, params " +
                                    std::to_string(p.channels));
    const PoolPair pooled = channel_pool(x);
    FeatureTensor weights({s.n, s.c, 1, 1});
    std::vector<double> avg(s.c), mx(s.c);
    for (std::size_t b = 0; b < s.n; ++b) {
        for (std::size_t ch = 0; ch < s.c; ++ch) {
            avg[ch] = pooled.avg.at(b, ch, 0, 0);
            mx[ch] = pooled.max.at(b, ch, 0, 0);
        }
        const auto ma = shared_mlp(p, avg);
        const auto mm = shared_mlp(p, mx);
        for (std::size_t ch = 0; ch < s.c; ++ch) weights.at(b, ch, 0, 0) = logistic(ma[ch] + mm[ch]);
    }
    return weights;
}

FeatureTensor apply_channel(const FeatureTensor& x, const ChannelAttnParams& p) {
    return hadamard(x, channel_attention_map(x, p));
}

FeatureTensor spatial_attention_map(const FeatureTensor& x, const SpatialAttnParams& p) {
    p.validate();
    const PoolPair pooled = spatial_pool(x);
    return sigmoid(conv2d(concat_channels(pooled.avg, pooled.max), p.conv));
}

FeatureTensor apply_spatial(const FeatureTensor& x, const SpatialAttnParams& p) {
    return hadamard(x, spatial_attention_map(x, p));
}

CbamResult cbam(const FeatureTensor& x, const ChannelAttnParams& cp, const SpatialAttnParams& sp) {
    CbamResult r;
    r.channel_weights = channel_attention_map(x, cp);
    const FeatureTensor refined = hadamard(x, r.channel_weights);
    r.spatial_map = spatial_attention_map(refined, sp);
    r.output = hadamard(refined, r.spatial_map);
    return r;
}

FeatureTensor parallel_attention(const FeatureTensor& x, const ChannelAttnParams& cp, const SpatialAttnParams& sp) {
    return add(apply_channel(x, cp), apply_spatial(x, sp));
}

std::vector<FeatureTensor> attention_params_to_blobs(const ChannelAttnParams& cp, const SpatialAttnParams& sp) {
    cp.validate();
    sp.validate();
    const std::size_t c = cp.channels;
    const std::size_t h = cp.hidden();
    return {
        sp.conv.weights,
        FeatureTensor({1, 1, 1, 1}, sp.conv.bias),
        FeatureTensor({1, 1, h, c}, cp.w1),
        FeatureTensor({1, 1, 1, h}, cp.b1),
        FeatureTensor({1, 1, c, h}, cp.w2),
        FeatureTensor({1, 1, 1, c}, cp.b2),
    };
}

void attention_params_from_blobs(const std::vector<FeatureTensor>& blobs, std::size_t reduction_ratio,
                                 ChannelAttnParams& cp, SpatialAttnParams& sp) {
    if (blobs.size() != 6) throw std::invalid_argument("attention params: expected 6 blobs");
    auto vec = [](const FeatureTensor& t) { return std::vector<double>(t.data().begin(), t.data().end()); };
    sp = SpatialAttnParams::zeros();
    if (!(blobs[0].shape() == sp.conv.weights.shape())) throw std::invalid_argument("attention params: bad conv shape");
    sp.conv.weights = blobs[0];
    sp.conv.bias = vec(blobs[1]);
    const std::size_t c = blobs[5].shape().w;
    cp = ChannelAttnParams::zeros(c, reduction_ratio);
    cp.w1 = vec(blobs[2]);
    cp.b1 = vec(blobs[3]);
    cp.w2 = vec(blobs[4]);
    cp.b2 = vec(blobs[5]);
    cp.validate();
    sp.validate();
}

} // namespace mks
