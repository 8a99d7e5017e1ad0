/*
 * Copyright 2026 The pcasim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "error.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>

namespace pcasim {

// 128-bit intermediates for products and the CORDIC datapath (GCC/Clang).
__extension__ using int128 = __int128;

// ---------------------------------------------------------------------------
// Q-format fixed point
// ---------------------------------------------------------------------------

/// Signed fixed-point layout: integer_bits includes the sign bit.
struct QFormat {
    int integer_bits = 16;
    int fraction_bits = 16;

    constexpr int width() const { return integer_bits + fraction_bits; }
    constexpr bool valid() const
    {
        return integer_bits >= 1 && fraction_bits >= 1 && width() <= 64;
    }
    constexpr std::int64_t max_raw() const
    {
        return static_cast<std::int64_t>((static_cast<int128>(1) << (width() - 1)) - 1);
    }
    constexpr std::int64_t min_raw() const
    {
        return static_cast<std::int64_t>(-(static_cast<int128>(1) << (width() - 1)));
    }
    /// Value of one unit in the last place.
    double ulp() const { return std::ldexp(1.0, -fraction_bits); }

    std::string to_string() const
    {
        return "Q" + std::to_string(integer_bits) + "." + std::to_string(fraction_bits);
    }

    friend constexpr bool operator==(const QFormat&, const QFormat&) = default;
};

inline QFormat make_qformat(int integer_bits, int fraction_bits)
{
    QFormat f{integer_bits, fraction_bits};
    detail::require_input(f.valid(), "invalid Q format " + f.to_string() +
                                         ": need integer_bits >= 1, fraction_bits >= 1, width <= 64");
    return f;
}

/// Counts saturation events. Shared between copies of a FixedDomain.
struct SaturationCounter {
    std::atomic<std::uint64_t> events{0};

    void bump() { events.fetch_add(1, std::memory_order_relaxed); }
    std::uint64_t count() const { return events.load(std::memory_order_relaxed); }
    void reset() { events.store(0, std::memory_order_relaxed); }
};

struct Fixed {
    std::int64_t raw = 0;
    QFormat format{};

    double to_real() const { return std::ldexp(static_cast<double>(raw), -format.fraction_bits); }

    /// Round-to-nearest conversion, saturating at the format bounds.
    static Fixed from_real(double x, QFormat fmt, SaturationCounter* sat = nullptr)
    {
        detail::require(fmt.valid(), "Fixed::from_real: invalid format");
        detail::require(!std::isnan(x), "Fixed::from_real: NaN");
        const long double scaled = std::ldexp(static_cast<long double>(x), fmt.fraction_bits);
        const long double hi = static_cast<long double>(fmt.max_raw());
        const long double lo = static_cast<long double>(fmt.min_raw());
        if (scaled >= hi + 0.5L) {
            if (sat) sat->bump();
            return {fmt.max_raw(), fmt};
        }
        if (scaled < lo - 0.5L) {
            if (sat) sat->bump();
            return {fmt.min_raw(), fmt};
        }
        return {static_cast<std::int64_t>(std::llroundl(scaled)), fmt};
    }

    static Fixed zero(QFormat fmt) { return {0, fmt}; }
    static Fixed one(QFormat fmt) { return from_real(1.0, fmt); }

    friend bool operator==(const Fixed& a, const Fixed& b) = default;
};

namespace detail {

inline void require_same_format(const Fixed& a, const Fixed& b)
{
    if (!(a.format == b.format))
        throw ContractViolation("fixed-point format mismatch: " + a.format.to_string() + " vs " +
                                b.format.to_string());
}

inline std::int64_t saturate(int128 v, QFormat fmt, SaturationCounter* sat)
{
    if (v > fmt.max_raw()) {
        if (sat) sat->bump();
        return fmt.max_raw();
    }
    if (v < fmt.min_raw()) {
        if (sat) sat->bump();
        return fmt.min_raw();
    }
    return static_cast<std::int64_t>(v);
}

} // namespace detail

inline Fixed fixed_add(const Fixed& a, const Fixed& b, SaturationCounter* sat = nullptr)
{
    detail::require_same_format(a, b);
    const int128 s = static_cast<int128>(a.raw) + b.raw;
    return {detail::saturate(s, a.format, sat), a.format};
}

inline Fixed fixed_sub(const Fixed& a, const Fixed& b, SaturationCounter* sat = nullptr)
{
    detail::require_same_format(a, b);
    const int128 s = static_cast<int128>(a.raw) - b.raw;
    return {detail::saturate(s, a.format, sat), a.format};
}

/// Full-width product, truncated toward zero to the operand format.
/// Product rounding. TowardZero is the datapath default; Nearest (ties away
/// from zero) costs one extra adder and removes the magnitude bias.
enum class Rounding { TowardZero, Nearest };

inline const char* to_string(Rounding r) { return r == Rounding::TowardZero ? "truncate" : "nearest"; }

inline Fixed fixed_mul(const Fixed& a, const Fixed& b, SaturationCounter* sat = nullptr,
                       Rounding rounding = Rounding::TowardZero)
{
    detail::require_same_format(a, b);
    const int128 p = static_cast<int128>(a.raw) * b.raw;
    const int f = a.format.fraction_bits;
    const int128 half = rounding == Rounding::Nearest && f > 0 ? static_cast<int128>(1) << (f - 1) : 0;
    const int128 q = p >= 0 ? ((p + half) >> f) : -((-p + half) >> f);
    return {detail::saturate(q, a.format, sat), a.format};
}

inline Fixed fixed_neg(const Fixed& a, SaturationCounter* sat = nullptr)
{
    return {detail::saturate(-static_cast<int128>(a.raw), a.format, sat), a.format};
}

inline bool operator<(const Fixed& a, const Fixed& b)
{
    detail::require_same_format(a, b);
    return a.raw < b.raw;
}

inline Fixed fixed_abs(const Fixed& a, SaturationCounter* sat = nullptr)
{
    return a.raw < 0 ? fixed_neg(a, sat) : a;
}

// ---------------------------------------------------------------------------
// CORDIC
// ---------------------------------------------------------------------------
//
// The micro-rotations run on a 128-bit internal datapath with kCordicGuardBits
// fractional bits; results are rounded to nearest on the way out. The guard
// bits keep arctangent-table quantization well below one output ULP, so the
// error is dominated by the residual angle after the last micro-rotation.

inline constexpr int kCordicGuardBits = 60;
inline constexpr int kCordicMaxIterations = 60;

namespace detail {

struct CordicTables {
    std::array<int128, kCordicMaxIterations> atan{};
    std::array<long double, kCordicMaxIterations + 1> gain{}; // gain[n] = prod_{i<n} 1/sqrt(1+2^-2i)

    CordicTables()
    {
        long double k = 1.0L;
        gain[0] = 1.0L;
        for (int i = 0; i < kCordicMaxIterations; ++i) {
            const long double a = std::atan(std::ldexp(1.0L, -i));
            atan[i] = static_cast<int128>(std::llroundl(std::ldexp(a, kCordicGuardBits)));
            k /= std::sqrt(1.0L + std::ldexp(1.0L, -2 * i));
            gain[i + 1] = k;
        }
    }
};

inline const CordicTables& cordic_tables()
{
    static const CordicTables tables;
    return tables;
}

/// Rounds an internal guard-bit value to `fraction_bits`, half away from -inf.
inline int128 round_from_guard(int128 v, int fraction_bits)
{
    const int shift = kCordicGuardBits - fraction_bits;
    if (shift <= 0) return v << (-shift);
    const int128 half = static_cast<int128>(1) << (shift - 1);
    return (v + half) >> shift;
}

inline int128 to_guard(std::int64_t raw, int fraction_bits)
{
    const int shift = kCordicGuardBits - fraction_bits;
    return shift >= 0 ? (static_cast<int128>(raw) << shift) : (static_cast<int128>(raw) >> (-shift));
}

} // namespace detail

struct CordicConfig {
    int iterations = 16;
    Fixed gain_compensation{}; // K = prod 1/sqrt(1 + 2^-2i), in the datapath format
};

inline CordicConfig make_cordic_config(int iterations, QFormat fmt)
{
    detail::require_input(iterations >= 4 && iterations <= kCordicMaxIterations,
                          "CORDIC iterations must be in [4, " + std::to_string(kCordicMaxIterations) + "]");
    detail::require_input(fmt.valid(), "invalid Q format for CORDIC");
    detail::require_input(fmt.fraction_bits <= kCordicGuardBits, "CORDIC supports at most 60 fraction bits");
    const long double k = detail::cordic_tables().gain[iterations];
    return {iterations, Fixed::from_real(static_cast<double>(k), fmt)};
}

/// Worst-case angular residual after `iterations` micro-rotations.
inline double cordic_angle_bound(int iterations) { return std::atan(std::ldexp(1.0, -(iterations - 1))); }

struct AtanResult {
    Fixed angle;
    bool degenerate = false; // input was (0, 0)
};

/// Vectoring-mode CORDIC: atan2(y, x) folded into (-pi/2, pi/2].
inline AtanResult cordic_atan(const Fixed& y, const Fixed& x, const CordicConfig& cfg)
{
    detail::require_same_format(y, x);
    const QFormat fmt = x.format;
    if (x.raw == 0 && y.raw == 0) return {Fixed::zero(fmt), true};

    int128 xi = x.raw;
    int128 yi = y.raw;
    if (xi < 0 || (xi == 0 && yi < 0)) {
        xi = -xi;
        yi = -yi;
    }
    // Normalize so the larger magnitude sits near 2^100; the angle depends only on y/x.
    const int128 mag = std::max(xi, yi < 0 ? -yi : yi);
    int shift = 0;
    while ((mag << shift) < (static_cast<int128>(1) << 100)) ++shift;
    xi <<= shift;
    yi <<= shift;

    const auto& tab = detail::cordic_tables();
    int128 z = 0;
    for (int i = 0; i < cfg.iterations; ++i) {
        const int128 xs = xi >> i;
        const int128 ys = yi >> i;
        if (yi >= 0) {
            xi += ys;
            yi -= xs;
            z += tab.atan[i];
        } else {
            xi -= ys;
            yi += xs;
            z -= tab.atan[i];
        }
    }
    const int128 r = detail::round_from_guard(z, fmt.fraction_bits);
    return {{detail::saturate(r, fmt, nullptr), fmt}, false};
}

struct SinCos {
    Fixed sin;
    Fixed cos;
};

/// Rotation-mode CORDIC with gain compensation. Requires |theta| <= pi/2.
inline SinCos cordic_sincos(const Fixed& theta, const CordicConfig& cfg)
{
    const QFormat fmt = theta.format;
    const double limit = std::numbers::pi / 2 + fmt.ulp();
    if (std::fabs(theta.to_real()) > limit)
        throw ContractViolation("cordic_sincos: |theta| exceeds pi/2");

    const auto& tab = detail::cordic_tables();
    int128 z = detail::to_guard(theta.raw, fmt.fraction_bits);
    int128 xi = static_cast<int128>(std::llroundl(std::ldexp(tab.gain[cfg.iterations], kCordicGuardBits)));
    int128 yi = 0;
    for (int i = 0; i < cfg.iterations; ++i) {
        const int128 xs = xi >> i;
        const int128 ys = yi >> i;
        if (z >= 0) {
            xi -= ys;
            yi += xs;
            z -= tab.atan[i];
        } else {
            xi += ys;
            yi -= xs;
            z += tab.atan[i];
        }
    }
    return {{detail::saturate(detail::round_from_guard(yi, fmt.fraction_bits), fmt, nullptr), fmt},
            {detail::saturate(detail::round_from_guard(xi, fmt.fraction_bits), fmt, nullptr), fmt}};
}

// ---------------------------------------------------------------------------
// Scalar domains
// ---------------------------------------------------------------------------
//
// A domain bundles the scalar type of a datapath with the arithmetic that
// operates on it. Every simulator component is templated on a domain, so the
// double-precision path and the fixed-point path share the same dataflow code
// and cannot be mixed by accident.

struct RealDomain {
    using value_type = double;
    static constexpr bool is_fixed = false;

    double zero() const { return 0.0; }
    double one() const { return 1.0; }
    double from_real(double x) const { return x; }
    double to_real(double x) const { return x; }
    double add(double a, double b) const { return a + b; }
    double sub(double a, double b) const { return a - b; }
    double mul(double a, double b) const { return a * b; }
    double neg(double a) const { return -a; }
    double abs(double a) const { return std::fabs(a); }
    bool is_zero(double a) const { return a == 0.0; }
    /// Strict magnitude comparison |a| > |b|.
    bool abs_greater(double a, double b) const { return std::fabs(a) > std::fabs(b); }
    std::uint64_t saturations() const { return 0; }
    std::string describe() const { return "float64"; }
};

struct FixedDomain {
    using value_type = Fixed;
    static constexpr bool is_fixed = true;

    QFormat format{};
    CordicConfig cordic{};
    Rounding rounding = Rounding::TowardZero;
    std::shared_ptr<SaturationCounter> counter = std::make_shared<SaturationCounter>();

    FixedDomain() : FixedDomain(QFormat{}, 16) {}
    FixedDomain(QFormat fmt, int cordic_iterations, Rounding r = Rounding::TowardZero)
        : format(make_qformat(fmt.integer_bits, fmt.fraction_bits)),
          cordic(make_cordic_config(cordic_iterations, fmt)),
          rounding(r)
    {
    }

    Fixed zero() const { return Fixed::zero(format); }
    Fixed one() const { return Fixed::one(format); }
    Fixed from_real(double x) const { return Fixed::from_real(x, format, counter.get()); }
    double to_real(const Fixed& a) const { return a.to_real(); }
    Fixed add(const Fixed& a, const Fixed& b) const { return fixed_add(a, b, counter.get()); }
    Fixed sub(const Fixed& a, const Fixed& b) const { return fixed_sub(a, b, counter.get()); }
    Fixed mul(const Fixed& a, const Fixed& b) const { return fixed_mul(a, b, counter.get(), rounding); }
    Fixed neg(const Fixed& a) const { return fixed_neg(a, counter.get()); }
    Fixed abs(const Fixed& a) const { return fixed_abs(a, counter.get()); }
    bool is_zero(const Fixed& a) const { return a.raw == 0; }
    bool abs_greater(const Fixed& a, const Fixed& b) const
    {
        const int128 ma = a.raw < 0 ? -static_cast<int128>(a.raw) : a.raw;
        const int128 mb = b.raw < 0 ? -static_cast<int128>(b.raw) : b.raw;
        return ma > mb;
    }
    std::uint64_t saturations() const { return counter->count(); }
    std::string describe() const
    {
        return "fixed " + format.to_string() + ", " + std::to_string(cordic.iterations) + " CORDIC iterations, " +
               to_string(rounding) + " products";
    }
};

} // namespace pcasim
