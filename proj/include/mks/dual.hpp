#pragma once

// Forward-mode dual numbers with a fixed-size tangent. Just enough surface
// for the box losses: arithmetic, exp/sqrt/asin/cos/atan/pow and the
// value-selecting min/max/abs/clamp used by the box geometry.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace mks {

template <std::size_t N>
struct Dual {
    double v = 0.0;
    std::array<double, N> d{};

    constexpr Dual() = default;
    constexpr Dual(double value) : v(value) {} // NOLINT: implicit promotion from constants
    constexpr Dual(double value, std::size_t seed) : v(value) { d[seed] = 1.0; }

    Dual& operator+=(const Dual& o) { v += o.v; for (std::size_t i = 0; i < N; ++i) d[i] += o.d[i]; return *this; }
    Dual& operator-=(const Dual& o) { v -= o.v; for (std::size_t i = 0; i < N; ++i) d[i] -= o.d[i]; return *this; }
    Dual& operator*=(const Dual& o) {
        for (std::size_t i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
        v *= o.v;
        return *this;
    }
    Dual& operator/=(const Dual& o) {
        const double inv = 1.0 / o.v;
        for (std::size_t i = 0; i < N; ++i) d[i] = (d[i] - v * inv * o.d[i]) * inv;
        v *= inv;
        return *this;
    }
};

template <std::size_t N> Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <std::size_t N> Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <std::size_t N> Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <std::size_t N> Dual<N> operator/(Dual<N> a, const Dual<N>& b) { return a /= b; }
template <std::size_t N> Dual<N> operator+(Dual<N> a, double b) { a.v += b; return a; }
template <std::size_t N> Dual<N> operator+(double a, Dual<N> b) { b.v += a; return b; }
template <std::size_t N> Dual<N> operator-(Dual<N> a, double b) { a.v -= b; return a; }
template <std::size_t N> Dual<N> operator-(double a, const Dual<N>& b) { return Dual<N>(a) - b; }
template <std::size_t N> Dual<N> operator*(Dual<N> a, double b) { a.v *= b; for (auto& x : a.d) x *= b; return a; }
template <std::size_t N> Dual<N> operator*(double a, Dual<N> b) { return b * a; }
template <std::size_t N> Dual<N> operator/(Dual<N> a, double b) { return a * (1.0 / b); }
template <std::size_t N> Dual<N> operator/(double a, const Dual<N>& b) { return Dual<N>(a) / b; }
template <std::size_t N> Dual<N> operator-(Dual<N> a) { return a * -1.0; }

template <std::size_t N> bool operator<(const Dual<N>& a, const Dual<N>& b) { return a.v < b.v; }
template <std::size_t N> bool operator>(const Dual<N>& a, const Dual<N>& b) { return a.v > b.v; }
template <std::size_t N> bool operator<=(const Dual<N>& a, const Dual<N>& b) { return a.v <= b.v; }
template <std::size_t N> bool operator>=(const Dual<N>& a, const Dual<N>& b) { return a.v >= b.v; }

namespace detail {
template <std::size_t N>
Dual<N> chain(const Dual<N>& a, double value, double slope) {
    Dual<N> r(value);
    for (std::size_t i = 0; i < N; ++i) r.d[i] = slope * a.d[i];
    return r;
}
} // namespace detail

template <std::size_t N> Dual<N> exp(const Dual<N>& a) { const double e = std::exp(a.v); return detail::chain(a, e, e); }
template <std::size_t N> Dual<N> sqrt(const Dual<N>& a) { const double s = std::sqrt(a.v); return detail::chain(a, s, 0.5 / s); }
template <std::size_t N> Dual<N> cos(const Dual<N>& a) { return detail::chain(a, std::cos(a.v), -std::sin(a.v)); }
template <std::size_t N> Dual<N> sin(const Dual<N>& a) { return detail::chain(a, std::sin(a.v), std::cos(a.v)); }
template <std::size_t N> Dual<N> asin(const Dual<N>& a) { return detail::chain(a, std::asin(a.v), 1.0 / std::sqrt(1.0 - a.v * a.v)); }
template <std::size_t N> Dual<N> atan(const Dual<N>& a) { return detail::chain(a, std::atan(a.v), 1.0 / (1.0 + a.v * a.v)); }
template <std::size_t N> Dual<N> pow(const Dual<N>& a, double p) {
    const double slope = p == 0.0 ? 0.0 : p * std::pow(a.v, p - 1.0);
    return detail::chain(a, std::pow(a.v, p), slope);
}
template <std::size_t N> Dual<N> abs(const Dual<N>& a) { return a.v < 0.0 ? -a : a; }

// Ties select the first argument; callers flag tie configurations separately.
template <std::size_t N> Dual<N> max(const Dual<N>& a, const Dual<N>& b) { return b.v > a.v ? b : a; }
template <std::size_t N> Dual<N> min(const Dual<N>& a, const Dual<N>& b) { return b.v < a.v ? b : a; }
template <std::size_t N> Dual<N> clamp(const Dual<N>& a, double lo, double hi) {
    if (a.v < lo) return Dual<N>(lo);
    if (a.v > hi) return Dual<N>(hi);
    return a;
}

// Scalar twins so templated code can call the same unqualified names.
inline double value_of(double x) { return x; }
template <std::size_t N> double value_of(const Dual<N>& x) { return x.v; }

} // namespace mks
