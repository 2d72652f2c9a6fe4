#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mks {

struct Shape4 {
    std::size_t n = 0, c = 0, h = 0, w = 0;

    std::size_t size() const noexcept { return n * c * h * w; }
    std::size_t plane() const noexcept { return h * w; }
    friend bool operator==(const Shape4&, const Shape4&) = default;
};

std::string to_string(const Shape4& s);

/// Dense NCHW tensor of finite doubles.
class FeatureTensor {
public:
    FeatureTensor() = default;
    explicit FeatureTensor(Shape4 shape, double fill = 0.0);
    /// Throws std::invalid_argument when the length does not match the shape
    /// or an entry is not finite.
    FeatureTensor(Shape4 shape, std::vector<double> data);

    static FeatureTensor uniform(Shape4 shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0);

    const Shape4& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    std::size_t index(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) const noexcept {
        return ((b * shape_.c + ch) * shape_.h + y) * shape_.w + x;
    }
    double at(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) const noexcept { return data_[index(b, ch, y, x)]; }
    double& at(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) noexcept { return data_[index(b, ch, y, x)]; }

    const double* plane(std::size_t b, std::size_t ch) const noexcept { return data_.data() + (b * shape_.c + ch) * shape_.plane(); }
    double* plane(std::size_t b, std::size_t ch) noexcept { return data_.data() + (b * shape_.c + ch) * shape_.plane(); }

    friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;

private:
    Shape4 shape_{};
    std::vector<double> data_;
};

/// Cross-correlation parameters. Weights are laid out (out_c, in_c, k_h, k_w).
struct Conv2DParams {
    FeatureTensor weights;
    std::vector<double> bias;
    std::size_t stride_h = 1, stride_w = 1;
    std::size_t pad_h = 0, pad_w = 0;

    std::size_t out_channels() const noexcept { return weights.shape().n; }
    std::size_t in_channels() const noexcept { return weights.shape().c; }
    std::size_t kernel_h() const noexcept { return weights.shape().h; }
    std::size_t kernel_w() const noexcept { return weights.shape().w; }

    /// Stride 1 and "same" padding of k/2.
    static Conv2DParams zeros(std::size_t out_c, std::size_t in_c, std::size_t k_h, std::size_t k_w);
    static Conv2DParams random(std::size_t out_c, std::size_t in_c, std::size_t k_h, std::size_t k_w,
                               std::mt19937_64& rng, double scale = 0.5);
};

/// Output spatial size; throws when the kernel does not fit.
Shape4 conv2d_output_shape(const Shape4& in, const Conv2DParams& p);

/// Direct cross-correlation (no kernel flip). Each output accumulates the
/// bias first, then taps in (in_c, k_y, k_x) order.
FeatureTensor conv2d(const FeatureTensor& x, const Conv2DParams& p);

struct PoolPair {
    FeatureTensor avg;
    FeatureTensor max;
};

/// Per-channel mean/max over space: n x c x 1 x 1.
PoolPair channel_pool(const FeatureTensor& x);
/// Per-position mean/max across channels: n x 1 x h x w.
PoolPair spatial_pool(const FeatureTensor& x);

FeatureTensor sigmoid(const FeatureTensor& x);

/// Elementwise product. `m` may match x exactly, or be n x 1 x h x w
/// (broadcast over channels), or n x c x 1 x 1 (broadcast over space).
FeatureTensor hadamard(const FeatureTensor& x, const FeatureTensor& m);

FeatureTensor add(const FeatureTensor& a, const FeatureTensor& b);
FeatureTensor concat_channels(const FeatureTensor& a, const FeatureTensor& b);
FeatureTensor slice_channels(const FeatureTensor& x, std::size_t begin, std::size_t count);

// Blob serialization. Layout (little-endian):
//   magic "MKST" | u32 version=1 | u32 dtype (1 = f64, 2 = f32) | u32 rank=4 |
//   u64 dims[4] (n, c, h, w) | payload, row-major
// A file may hold several blobs back to back.
enum class BlobDType : std::uint32_t { F64 = 1, F32 = 2 };

void write_tensor_blob(std::ostream& os, const FeatureTensor& t, BlobDType dtype = BlobDType::F64);
FeatureTensor read_tensor_blob(std::istream& is);
void write_tensor_blobs(const std::string& path, std::span<const FeatureTensor> tensors, BlobDType dtype = BlobDType::F64);
std::vector<FeatureTensor> read_tensor_blobs(const std::string& path);

} // namespace mks
