#include "mks/fuse.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mks/simd/kernels.hpp"

namespace mks {

void BNParams::validate() const {
    const std::size_t c = mean.size();
    if (var.size() != c || gamma.size() != c || beta.size() != c)
        throw std::invalid_argument("BNParams: per-channel arrays differ in length");
    if (!(eps >= 0.0)) throw std::invalid_argument("BNParams: eps must be non-negative");
    for (std::size_t i = 0; i < c; ++i) {
        if (!(var[i] >= 0.0)) throw std::invalid_argument("BNParams: negative variance");
        if (var[i] + eps <= 0.0) throw std::invalid_argument("BNParams: var + eps must be positive");
    }
}

BNParams BNParams::identity(std::size_t channels, double eps) {
    return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0), std::vector<double>(channels, 1.0),
            std::vector<double>(channels, 0.0), eps};
}

BNParams BNParams::random(std::size_t channels, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    std::uniform_real_distribution<double> pos(0.1, 2.0);
    BNParams bn;
    bn.eps = 1e-5;
    for (std::size_t i = 0; i < channels; ++i) {
        bn.mean.push_back(sym(rng));
        bn.var.push_back(pos(rng));
        bn.gamma.push_back(pos(rng) * (sym(rng) < 0 ? -1.0 : 1.0));
        bn.beta.push_back(sym(rng));
    }
    return bn;
}

FeatureTensor batchnorm(const FeatureTensor& x, const BNParams& bn) {
    bn.validate();
    const Shape4& s = x.shape();
    if (bn.channels() != s.c)
        throw std::invalid_argument("batchnorm: tensor has " + std::to_string(s.c) + " channels, BN has " +
                                    std::to_string(bn.channels()));
    const auto& k = simd::kernels();
    FeatureTensor out(s);
    for (std::size_t b = 0; b < s.n; ++b)
        for (std::size_t ch = 0; ch < s.c; ++ch)
            k.normalize(x.plane(b, ch), bn.mean[ch], std::sqrt(bn.var[ch] + bn.eps), bn.gamma[ch], bn.beta[ch],
                        out.plane(b, ch), s.plane());
    return out;
}

FusedConv fold_bn(const Conv2DParams& conv, const BNParams& bn) {
    bn.validate();
    if (bn.channels() != conv.out_channels())
        throw std::invalid_argument("fold_bn: BN channels " + std::to_string(bn.channels()) + " != conv out channels " +
                                    std::to_string(conv.out_channels()));
    FusedConv f{conv};
    const std::size_t per_out = conv.in_channels() * conv.kernel_h() * conv.kernel_w();
    auto w = f.conv.weights.data();
    for (std::size_t oc = 0; oc < conv.out_channels(); ++oc) {
        const double factor = bn.gamma[oc] / std::sqrt(bn.var[oc] + bn.eps);
        for (std::size_t i = 0; i < per_out; ++i) w[oc * per_out + i] *= factor;
        f.conv.bias[oc] = (conv.bias[oc] - bn.mean[oc]) * factor + bn.beta[oc];
    }
    return f;
}

FusionBlockParams FusionBlockParams::random(std::size_t channels, std::size_t out_channels, std::size_t kernel,
                                            std::mt19937_64& rng) {
    if (channels == 0 || channels % 2 != 0) throw std::invalid_argument("fusion block needs an even channel count");
    const std::size_t half = channels / 2;
    FusionBlockParams p;
    p.branch_a = Conv2DParams::random(half, half, kernel, kernel, rng);
    p.branch_b = Conv2DParams::random(half, half, kernel, kernel, rng);
    p.bn_a = BNParams::random(half, rng);
    p.bn_b = BNParams::random(half, rng);
    p.merge = Conv2DParams::random(out_channels, channels, 1, 1, rng);
    p.bn_merge = BNParams::random(out_channels, rng);
    return p;
}

namespace {

struct Halves {
    FeatureTensor a, b;
};

Halves split(const FeatureTensor& x) {
    const std::size_t c = x.shape().c;
    if (c == 0 || c % 2 != 0)
        throw std::invalid_argument("fusion_block: channel count " + std::to_string(c) + " is not even");
    return {slice_channels(x, 0, c / 2), slice_channels(x, c / 2, c / 2)};
}

} // namespace

FeatureTensor fusion_block(const FeatureTensor& x, const FusionBlockParams& p) {
    const Halves h = split(x);
    const FeatureTensor ya = batchnorm(conv2d(h.a, p.branch_a), p.bn_a);
    const FeatureTensor yb = batchnorm(conv2d(h.b, p.branch_b), p.bn_b);
    return batchnorm(conv2d(concat_channels(ya, yb), p.merge), p.bn_merge);
}

FusedFusionBlock reparameterize(const FusionBlockParams& p) {
    return {fold_bn(p.branch_a, p.bn_a).conv, fold_bn(p.branch_b, p.bn_b).conv, fold_bn(p.merge, p.bn_merge).conv};
}

FeatureTensor fusion_block(const FeatureTensor& x, const FusedFusionBlock& p) {
    const Halves h = split(x);
    return conv2d(concat_channels(conv2d(h.a, p.branch_a), conv2d(h.b, p.branch_b)), p.merge);
}

} // namespace mks
