#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "mks/fuse.hpp"

using namespace mks;

namespace {

double max_diff(const FeatureTensor& a, const FeatureTensor& b) {
    REQUIRE(a.shape() == b.shape());
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

} // namespace

TEST_CASE("batchnorm matches the formula") {
    std::mt19937_64 rng(1);
    const BNParams bn = BNParams::random(3, rng);
    const FeatureTensor x = FeatureTensor::uniform({2, 3, 4, 4}, rng);
    const FeatureTensor y = batchnorm(x, bn);
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < 16; ++i) {
                const double want = (x.plane(b, c)[i] - bn.mean[c]) / std::sqrt(bn.var[c] + bn.eps) * bn.gamma[c] + bn.beta[c];
                CHECK(y.plane(b, c)[i] == doctest::Approx(want).epsilon(1e-15));
            }
}

TEST_CASE("batchnorm parameter validation") {
    BNParams bn = BNParams::identity(2);
    CHECK_NOTHROW(bn.validate());
    bn.var[1] = 0.0; // var + eps = 0
    CHECK_THROWS_AS(bn.validate(), std::invalid_argument);
    bn.eps = 1e-5;
    CHECK_NOTHROW(bn.validate());
    bn.var[0] = -1.0;
    CHECK_THROWS_AS(bn.validate(), std::invalid_argument);
    bn = BNParams::identity(2);
    bn.gamma.pop_back();
    CHECK_THROWS_AS(bn.validate(), std::invalid_argument);
    CHECK_THROWS_AS(batchnorm(FeatureTensor({1, 3, 2, 2}), BNParams::identity(2)), std::invalid_argument);
    std::mt19937_64 rng(0);
    CHECK_THROWS_AS(fold_bn(Conv2DParams::random(3, 1, 1, 1, rng), BNParams::identity(2)), std::invalid_argument);
}

TEST_CASE("folding preserves outputs across conv configurations") {
    std::mt19937_64 rng(2);
    for (std::size_t k : {1, 3, 5})
        for (std::size_t stride : {1, 2})
            for (std::size_t pad = 0; pad <= k / 2; ++pad) {
                Conv2DParams conv = Conv2DParams::random(4, 3, k, k, rng);
                conv.stride_h = conv.stride_w = stride;
                conv.pad_h = conv.pad_w = pad;
                const BNParams bn = BNParams::random(4, rng);
                const FeatureTensor x = FeatureTensor::uniform({2, 3, 9, 8}, rng);
                CHECK(max_diff(batchnorm(conv2d(x, conv), bn), conv2d(x, fold_bn(conv, bn).conv)) < 1e-12);
            }
}

TEST_CASE("identity batchnorm folds bit-exactly") {
    std::mt19937_64 rng(3);
    const Conv2DParams conv = Conv2DParams::random(3, 2, 3, 3, rng);
    const FusedConv f = fold_bn(conv, BNParams::identity(3));
    CHECK(f.conv.weights == conv.weights);
    CHECK(f.conv.bias == conv.bias);
    const FeatureTensor x = FeatureTensor::uniform({1, 2, 6, 6}, rng);
    CHECK(batchnorm(conv2d(x, conv), BNParams::identity(3)) == conv2d(x, f.conv));
}

TEST_CASE("fusion block reparameterization") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        const std::size_t c = 2 * (1 + t % 3), k = t % 2 ? 3 : 1;
        const FusionBlockParams p = FusionBlockParams::random(c, 1 + t % 5, k, rng);
        const FusedFusionBlock f = reparameterize(p);
        const FeatureTensor x = FeatureTensor::uniform({1 + t % 2, c, 7, 5}, rng);
        const FeatureTensor a = fusion_block(x, p), b = fusion_block(x, f);
        CHECK(a.shape() == Shape4{x.shape().n, 1 + t % 5, 7, 5});
        CHECK(max_diff(a, b) < 1e-12);
    }
    CHECK_THROWS_AS(FusionBlockParams::random(3, 2, 1, rng), std::invalid_argument);
    const FusionBlockParams p = FusionBlockParams::random(4, 2, 1, rng);
    CHECK_THROWS_AS(fusion_block(FeatureTensor({1, 3, 4, 4}), p), std::invalid_argument);
}
