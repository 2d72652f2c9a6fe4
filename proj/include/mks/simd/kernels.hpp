#pragma once

// Inner-loop kernels with a scalar reference and SIMD variants chosen once at
// startup. Vertical kernels (one output lane per input lane, no FMA) round
// identically on every backend; reductions accumulate in lanes and may differ
// from the scalar order in the last bits.

#include <cstddef>
#include <string_view>

namespace mks::simd {

enum class Backend { Scalar, Avx2 };

struct KernelTable {
    Backend backend;
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // out[i] = a[i] * b[i]
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    // out[i] = a * x[i]
    void (*scale)(double a, const double* x, double* out, std::size_t n);
    // out[i] = a[i] + b[i]
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    // out[i] = max(a[i], b[i])
    void (*vmax)(const double* a, const double* b, double* out, std::size_t n);
    // out[i] = (x[i] - mean) / denom * gamma + beta
    void (*normalize)(const double* x, double mean, double denom, double gamma, double beta, double* out,
                      std::size_t n);
    double (*sum)(const double* x, std::size_t n);
    double (*max)(const double* x, std::size_t n); // n > 0
    // sum (a[i] - b[i])^2
    double (*sq_diff_sum)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;
#if defined(MKS_HAVE_AVX2)
const KernelTable& avx2_kernels() noexcept;
#endif

bool backend_available(Backend b) noexcept;
std::string_view to_string(Backend b) noexcept;

/// The active table. Defaults to the widest backend the CPU supports; the
/// environment variable MKS_SIMD=scalar|avx2 overrides at first use.
const KernelTable& kernels() noexcept;
Backend active_backend() noexcept;

/// Switches the active table (tests and benchmarks). Returns false and leaves
/// the selection unchanged when the backend is unavailable.
bool set_backend(Backend b) noexcept;

/// Restores the previous backend on scope exit.
class ScopedBackend {
public:
    explicit ScopedBackend(Backend b) noexcept : prev_(active_backend()) { ok_ = set_backend(b); }
    ~ScopedBackend() { set_backend(prev_); }
    ScopedBackend(const ScopedBackend&) = delete;
    ScopedBackend& operator=(const ScopedBackend&) = delete;
    bool ok() const noexcept { return ok_; }

private:
    Backend prev_;
    bool ok_;
};

} // namespace mks::simd
