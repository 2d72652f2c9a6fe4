#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "mks/tensor.hpp"

namespace mks {

/// 7x7, 2 -> 1 convolution over the stacked [avg, max] channel descriptors.
struct SpatialAttnParams {
    Conv2DParams conv;

    static SpatialAttnParams zeros();
    static SpatialAttnParams random(std::mt19937_64& rng, double scale = 0.2);
    void validate() const;
};

/// Shared two-layer MLP c -> hidden -> c with ReLU between the layers.
/// hidden = c / r, with r clamped to c.
struct ChannelAttnParams {
    std::size_t channels = 0;
    std::size_t reduction_ratio = 16;
    std::vector<double> w1; // hidden x channels
    std::vector<double> b1; // hidden
    std::vector<double> w2; // channels x hidden
    std::vector<double> b2; // channels

    std::size_t hidden() const noexcept;

    static ChannelAttnParams zeros(std::size_t channels, std::size_t reduction_ratio = 16);
    static ChannelAttnParams random(std::size_t channels, std::size_t reduction_ratio, std::mt19937_64& rng,
                                    double scale = 0.5);
    void validate() const;
};

/// Channel weights sigma(MLP(avg) + MLP(max)), n x c x 1 x 1.
FeatureTensor channel_attention_map(const FeatureTensor& x, const ChannelAttnParams& p);
FeatureTensor apply_channel(const FeatureTensor& x, const ChannelAttnParams& p);

/// sigma(conv7x7([mean over channels, max over channels])), n x 1 x h x w.
FeatureTensor spatial_attention_map(const FeatureTensor& x, const SpatialAttnParams& p);
FeatureTensor apply_spatial(const FeatureTensor& x, const SpatialAttnParams& p);

struct CbamResult {
    FeatureTensor output;
    FeatureTensor channel_weights; // n x c x 1 x 1, from x
    FeatureTensor spatial_map;     // n x 1 x h x w, from the channel-refined features
};

/// Channel attention, then spatial attention on its output.
CbamResult cbam(const FeatureTensor& x, const ChannelAttnParams& cp, const SpatialAttnParams& sp);

/// Both branches computed from x and summed. Exists only for comparison with
/// the cascade.
FeatureTensor parallel_attention(const FeatureTensor& x, const ChannelAttnParams& cp, const SpatialAttnParams& sp);

/// Serialized as blobs: spatial weights (1,2,7,7), spatial bias (1,1,1,1),
/// w1 (1,1,hidden,c), b1 (1,1,1,hidden), w2 (1,1,c,hidden), b2 (1,1,1,c).
std::vector<FeatureTensor> attention_params_to_blobs(const ChannelAttnParams& cp, const SpatialAttnParams& sp);
void attention_params_from_blobs(const std::vector<FeatureTensor>& blobs, std::size_t reduction_ratio,
                                 ChannelAttnParams& cp, SpatialAttnParams& sp);

} // namespace mks
