#include "mks/simd/kernels.hpp"

#include <immintrin.h>

#include <algorithm>

// Compiled with -mavx2 only. Multiplies and adds stay separate instructions
// so every lane rounds exactly like the scalar loop.

namespace mks::simd {

namespace {

constexpr std::size_t kLanes = 4;

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(double a, const double* x, double* out, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) out[i] = a * x[i];
}

void add(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void vmax(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    // _mm256_max_pd(b, a) returns a when equal/unordered, matching std::max(a, b).
    for (; i + kLanes <= n; i += kLanes)
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(b + i), _mm256_loadu_pd(a + i)));
    for (; i < n; ++i) out[i] = std::max(a[i], b[i]);
}

void normalize(const double* x, double mean, double denom, double gamma, double beta, double* out, std::size_t n) {
    const __m256d vm = _mm256_set1_pd(mean);
    const __m256d vd = _mm256_set1_pd(denom);
    const __m256d vg = _mm256_set1_pd(gamma);
    const __m256d vb = _mm256_set1_pd(beta);
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        __m256d v = _mm256_sub_pd(_mm256_loadu_pd(x + i), vm);
        v = _mm256_div_pd(v, vd);
        v = _mm256_mul_pd(v, vg);
        _mm256_storeu_pd(out + i, _mm256_add_pd(v, vb));
    }
    for (; i < n; ++i) out[i] = (x[i] - mean) / denom * gamma + beta;
}

double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double sum(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

double max(const double* x, std::size_t n) {
    std::size_t i = 0;
    double m = x[0];
    if (n >= kLanes) {
        __m256d acc = _mm256_loadu_pd(x);
        for (i = kLanes; i + kLanes <= n; i += kLanes) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
        alignas(32) double lanes[kLanes];
        _mm256_store_pd(lanes, acc);
        m = *std::max_element(lanes, lanes + kLanes);
    }
    for (; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

double sq_diff_sum(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

constexpr KernelTable kTable{Backend::Avx2, axpy, mul, scale, add, vmax, normalize, sum, max, sq_diff_sum};

} // namespace

const KernelTable& avx2_kernels() noexcept { return kTable; }

} // namespace mks::simd
