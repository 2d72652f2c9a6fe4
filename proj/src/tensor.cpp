#include "mks/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "mks/simd/kernels.hpp"

namespace mks {

std::string to_string(const Shape4& s) {
    return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
           std::to_string(s.w) + ")";
}

FeatureTensor::FeatureTensor(Shape4 shape, double fill) : shape_(shape), data_(shape.size(), fill) {
    if (!std::isfinite(fill)) throw std::invalid_argument("FeatureTensor: non-finite fill value");
}

FeatureTensor::FeatureTensor(Shape4 shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size())
        throw std::invalid_argument("FeatureTensor: data length " + std::to_string(data_.size()) +
                                    " does not match shape " + to_string(shape_));
    for (double v : data_)
        if (!std::isfinite(v)) throw std::invalid_argument("FeatureTensor: non-finite entry");
}

FeatureTensor FeatureTensor::uniform(Shape4 shape, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(shape.size());
    for (double& x : v) x = dist(rng);
    return {shape, std::move(v)};
}

Conv2DParams Conv2DParams::zeros(std::size_t out_c, std::size_t in_c, std::size_t k_h, std::size_t k_w) {
    Conv2DParams p;
    p.weights = FeatureTensor({out_c, in_c, k_h, k_w});
    p.bias.assign(out_c, 0.0);
    p.pad_h = k_h / 2;
    p.pad_w = k_w / 2;
    return p;
}

Conv2DParams Conv2DParams::random(std::size_t out_c, std::size_t in_c, std::size_t k_h, std::size_t k_w,
                                  std::mt19937_64& rng, double scale) {
    Conv2DParams p = zeros(out_c, in_c, k_h, k_w);
    p.weights = FeatureTensor::uniform({out_c, in_c, k_h, k_w}, rng, -scale, scale);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (double& b : p.bias) b = dist(rng);
    return p;
}

Shape4 conv2d_output_shape(const Shape4& in, const Conv2DParams& p) {
    if (p.in_channels() != in.c)
        throw std::invalid_argument("conv2d: input has " + std::to_string(in.c) + " channels, weights expect " +
                                    std::to_string(p.in_channels()));
    if (p.bias.size() != p.out_channels()) throw std::invalid_argument("conv2d: bias length != out channels");
    if (p.stride_h == 0 || p.stride_w == 0) throw std::invalid_argument("conv2d: stride must be >= 1");
    const std::size_t ph = in.h + 2 * p.pad_h;
    const std::size_t pw = in.w + 2 * p.pad_w;
    if (p.kernel_h() == 0 || p.kernel_w() == 0 || p.kernel_h() > ph || p.kernel_w() > pw)
        throw std::invalid_argument("conv2d: kernel does not fit the padded input");
    return {in.n, p.out_channels(), (ph - p.kernel_h()) / p.stride_h + 1, (pw - p.kernel_w()) / p.stride_w + 1};
}

FeatureTensor conv2d(const FeatureTensor& x, const Conv2DParams& p) {
    const Shape4 os = conv2d_output_shape(x.shape(), p);
    const Shape4& is = x.shape();
    const auto& k = simd::kernels();
    FeatureTensor out(os);

    const auto pad_h = static_cast<std::ptrdiff_t>(p.pad_h);
    const auto pad_w = static_cast<std::ptrdiff_t>(p.pad_w);
    const auto sh = static_cast<std::ptrdiff_t>(p.stride_h);
    const auto sw = static_cast<std::ptrdiff_t>(p.stride_w);
    const auto in_h = static_cast<std::ptrdiff_t>(is.h);
    const auto in_w = static_cast<std::ptrdiff_t>(is.w);
    const auto out_w = static_cast<std::ptrdiff_t>(os.w);

    for (std::size_t b = 0; b < os.n; ++b) {
        for (std::size_t oc = 0; oc < os.c; ++oc) {
            double* dst = out.plane(b, oc);
            std::fill(dst, dst + os.plane(), p.bias[oc]);
            for (std::size_t ic = 0; ic < is.c; ++ic) {
                const double* src = x.plane(b, ic);
                for (std::size_t ky = 0; ky < p.kernel_h(); ++ky) {
                    for (std::size_t kx = 0; kx < p.kernel_w(); ++kx) {
                        const double wv = p.weights.at(oc, ic, ky, kx);
                        const auto off_x = static_cast<std::ptrdiff_t>(kx) - pad_w;
                        // ox range with 0 <= ox*sw + off_x < in_w.
                        std::ptrdiff_t ox0 = off_x >= 0 ? 0 : (-off_x + sw - 1) / sw;
                        std::ptrdiff_t ox1 = in_w - off_x <= 0 ? 0 : (in_w - off_x - 1) / sw + 1;
                        ox1 = std::min(ox1, out_w);
                        if (ox0 >= ox1) continue;
                        for (std::size_t oy = 0; oy < os.h; ++oy) {
                            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * sh +
                                                      static_cast<std::ptrdiff_t>(ky) - pad_h;
                            if (iy < 0 || iy >= in_h) continue;
                            const double* srow = src + iy * in_w;
                            double* drow = dst + static_cast<std::ptrdiff_t>(oy) * out_w;
                            if (sw == 1) {
                                k.axpy(wv, srow + ox0 + off_x, drow + ox0, static_cast<std::size_t>(ox1 - ox0));
                            } else {
                                for (std::ptrdiff_t ox = ox0; ox < ox1; ++ox) drow[ox] += wv * srow[ox * sw + off_x];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

PoolPair channel_pool(const FeatureTensor& x) {
    const Shape4& s = x.shape();
    if (s.plane() == 0) throw std::invalid_argument("channel_pool: empty spatial extent");
    const auto& k = simd::kernels();
    PoolPair r{FeatureTensor({s.n, s.c, 1, 1}), FeatureTensor({s.n, s.c, 1, 1})};
    const double count = static_cast<double>(s.plane());
    for (std::size_t b = 0; b < s.n; ++b)
        for (std::size_t ch = 0; ch < s.c; ++ch) {
            const double* src = x.plane(b, ch);
            r.avg.at(b, ch, 0, 0) = k.sum(src, s.plane()) / count;
            r.max.at(b, ch, 0, 0) = k.max(src, s.plane());
        }
    return r;
}

PoolPair spatial_pool(const FeatureTensor& x) {
    const Shape4& s = x.shape();
    if (s.c == 0) throw std::invalid_argument("spatial_pool: no channels");
    const auto& k = simd::kernels();
    PoolPair r{FeatureTensor({s.n, 1, s.h, s.w}), FeatureTensor({s.n, 1, s.h, s.w})};
    const std::size_t hw = s.plane();
    for (std::size_t b = 0; b < s.n; ++b) {
        double* avg = r.avg.plane(b, 0);
        double* mx = r.max.plane(b, 0);
        std::copy(x.plane(b, 0), x.plane(b, 0) + hw, avg);
        std::copy(x.plane(b, 0), x.plane(b, 0) + hw, mx);
        for (std::size_t ch = 1; ch < s.c; ++ch) {
            k.add(avg, x.plane(b, ch), avg, hw);
            k.vmax(mx, x.plane(b, ch), mx, hw);
        }
        const double c = static_cast<double>(s.c);
        for (std::size_t i = 0; i < hw; ++i) avg[i] /= c;
    }
    return r;
}

FeatureTensor sigmoid(const FeatureTensor& x) {
    FeatureTensor out(x.shape());
    auto src = x.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = 1.0 / (1.0 + std::exp(-src[i]));
    return out;
}

FeatureTensor hadamard(const FeatureTensor& x, const FeatureTensor& m) {
    const Shape4& s = x.shape();
    const Shape4& ms = m.shape();
    const auto& k = simd::kernels();
    FeatureTensor out(s);
    if (ms == s) {
        k.mul(x.data().data(), m.data().data(), out.data().data(), x.size());
    } else if (ms == Shape4{s.n, 1, s.h, s.w}) {
        for (std::size_t b = 0; b < s.n; ++b)
            for (std::size_t ch = 0; ch < s.c; ++ch) k.mul(x.plane(b, ch), m.plane(b, 0), out.plane(b, ch), s.plane());
    } else if (ms == Shape4{s.n, s.c, 1, 1}) {
        for (std::size_t b = 0; b < s.n; ++b)
            for (std::size_t ch = 0; ch < s.c; ++ch) k.scale(m.at(b, ch, 0, 0), x.plane(b, ch), out.plane(b, ch), s.plane());
    } else {
        throw std::invalid_argument("hadamard: cannot broadcast " + to_string(ms) + " onto " + to_string(s));
    }
    return out;
}

FeatureTensor add(const FeatureTensor& a, const FeatureTensor& b) {
    if (!(a.shape() == b.shape())) throw std::invalid_argument("add: shape mismatch");
    FeatureTensor out(a.shape());
    simd::kernels().add(a.data().data(), b.data().data(), out.data().data(), a.size());
    return out;
}

FeatureTensor concat_channels(const FeatureTensor& a, const FeatureTensor& b) {
    const Shape4& sa = a.shape();
    const Shape4& sb = b.shape();
    if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) throw std::invalid_argument("concat_channels: shape mismatch");
    FeatureTensor out({sa.n, sa.c + sb.c, sa.h, sa.w});
    const std::size_t hw = sa.plane();
    for (std::size_t n = 0; n < sa.n; ++n) {
        for (std::size_t c = 0; c < sa.c; ++c) std::copy(a.plane(n, c), a.plane(n, c) + hw, out.plane(n, c));
        for (std::size_t c = 0; c < sb.c; ++c) std::copy(b.plane(n, c), b.plane(n, c) + hw, out.plane(n, sa.c + c));
    }
    return out;
}

FeatureTensor slice_channels(const FeatureTensor& x, std::size_t begin, std::size_t count) {
    const Shape4& s = x.shape();
    if (begin + count > s.c) throw std::invalid_argument("slice_channels: range out of bounds");
    FeatureTensor out({s.n, count, s.h, s.w});
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < count; ++c)
            std::copy(x.plane(n, begin + c), x.plane(n, begin + c) + s.plane(), out.plane(n, c));
    return out;
}

// ---------------------------------------------------------------------------
// Blob I/O

namespace {

constexpr char kMagic[4] = {'M', 'K', 'S', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class U>
void put_le(std::ostream& os, U v) {
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <class U>
U get_le(std::istream& is) {
    unsigned char buf[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) throw std::runtime_error("tensor blob: truncated header");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
}

} // namespace

void write_tensor_blob(std::ostream& os, const FeatureTensor& t, BlobDType dtype) {
    os.write(kMagic, 4);
    put_le<std::uint32_t>(os, kVersion);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(dtype));
    put_le<std::uint32_t>(os, 4);
    const Shape4& s = t.shape();
    for (std::size_t d : {s.n, s.c, s.h, s.w}) put_le<std::uint64_t>(os, d);
    for (double v : t.data()) {
        if (dtype == BlobDType::F64)
            put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
        else
            put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    if (!os) throw std::runtime_error("tensor blob: write failed");
}

FeatureTensor read_tensor_blob(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("tensor blob: bad magic");
    if (get_le<std::uint32_t>(is) != kVersion) throw std::runtime_error("tensor blob: unsupported version");
    const auto dtype = static_cast<BlobDType>(get_le<std::uint32_t>(is));
    if (dtype != BlobDType::F64 && dtype != BlobDType::F32) throw std::runtime_error("tensor blob: unknown dtype");
    if (get_le<std::uint32_t>(is) != 4) throw std::runtime_error("tensor blob: rank must be 4");
    Shape4 s;
    s.n = get_le<std::uint64_t>(is);
    s.c = get_le<std::uint64_t>(is);
    s.h = get_le<std::uint64_t>(is);
    s.w = get_le<std::uint64_t>(is);
    if (s.n > (1u << 20) || s.c > (1u << 20) || s.h > (1u << 20) || s.w > (1u << 20) || s.size() > (1ull << 31))
        throw std::runtime_error("tensor blob: implausible shape " + to_string(s));
    std::vector<double> data(s.size());
    try {
        for (double& v : data) {
            if (dtype == BlobDType::F64)
                v = std::bit_cast<double>(get_le<std::uint64_t>(is));
            else
                v = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(is)));
        }
    } catch (const std::runtime_error&) {
        throw std::runtime_error("tensor blob: truncated payload");
    }
    return {s, std::move(data)};
}

void write_tensor_blobs(const std::string& path, std::span<const FeatureTensor> tensors, BlobDType dtype) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& t : tensors) write_tensor_blob(os, t, dtype);
}

std::vector<FeatureTensor> read_tensor_blobs(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::vector<FeatureTensor> out;
    while (is.peek() != std::char_traits<char>::eof()) out.push_back(read_tensor_blob(is));
    if (out.empty()) throw std::runtime_error(path + ": no tensor blobs");
    return out;
}

} // namespace mks
