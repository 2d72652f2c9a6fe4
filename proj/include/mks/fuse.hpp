#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "mks/tensor.hpp"

namespace mks {

/// Inference-mode batch norm statistics, one entry per channel.
struct BNParams {
    std::vector<double> mean;
    std::vector<double> var;
    std::vector<double> gamma;
    std::vector<double> beta;
    double eps = 1e-5;

    std::size_t channels() const noexcept { return mean.size(); }
    void validate() const;

    /// mean 0, var 1, gamma 1, beta 0 with the given eps.
    static BNParams identity(std::size_t channels, double eps = 0.0);
    static BNParams random(std::size_t channels, std::mt19937_64& rng);
};

/// y = (x - mean) / sqrt(var + eps) * gamma + beta, per channel.
FeatureTensor batchnorm(const FeatureTensor& x, const BNParams& bn);

/// Convolution with the batch norm folded in:
///   W' = W * gamma / sqrt(var + eps),  b' = (b - mean) * gamma / sqrt(var + eps) + beta.
struct FusedConv {
    Conv2DParams conv;
};

FusedConv fold_bn(const Conv2DParams& conv, const BNParams& bn);

/// Split-transform-merge block: the input channels are split in half, each
/// half goes through its own conv + BN, the halves are concatenated and
/// merged by a 1x1 conv + BN. No activations.
struct FusionBlockParams {
    Conv2DParams branch_a, branch_b;
    BNParams bn_a, bn_b;
    Conv2DParams merge;
    BNParams bn_merge;

    static FusionBlockParams random(std::size_t channels, std::size_t out_channels, std::size_t kernel,
                                    std::mt19937_64& rng);
};

/// Same block after folding every BN into its conv.
struct FusedFusionBlock {
    Conv2DParams branch_a, branch_b, merge;
};

FeatureTensor fusion_block(const FeatureTensor& x, const FusionBlockParams& p);
FusedFusionBlock reparameterize(const FusionBlockParams& p);
FeatureTensor fusion_block(const FeatureTensor& x, const FusedFusionBlock& p);

} // namespace mks
