#pragma once
// Software emulation of reduced-precision binary floating point.
//
// Every emulated operation is carried out in double precision and the result
// is rounded to the target format (round to nearest, ties to even). For
// formats with t <= 25 significand digits this is exactly the correctly
// rounded result of the operation in the target format, because double
// carries at least 2t + 2 digits.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace mpkm {

enum class FormatKind : std::uint8_t { q52, fp16, fp32, fp64, custom };

/// Parameters (t, e_min, e_max) of a binary floating point system with
/// gradual underflow. Derived quantities follow the usual conventions:
/// u = 2^-t, x_min = 2^e_min, x_max = 2^e_max (2 - 2^(1-t)).
class FloatFormat {
public:
    /// Throws std::invalid_argument unless 2 <= t <= 53 and the exponent range
    /// fits inside double (-1022 <= e_min < 0 < e_max <= 1023).
    FloatFormat(int t, int e_min, int e_max);

    static FloatFormat q52();
    static FloatFormat fp16();
    static FloatFormat fp32();
    static FloatFormat fp64();

    /// Accepts "q52", "fp16", "fp32", "fp64"; throws std::invalid_argument.
    static FloatFormat from_name(std::string_view name);

    FormatKind kind() const { return kind_; }
    std::string_view name() const;

    int t() const { return t_; }
    int e_min() const { return e_min_; }
    int e_max() const { return e_max_; }

    double u() const { return u_; }
    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    double smallest_subnormal() const { return x_min_sub_; }

    /// True when rounding to this format is the identity on doubles.
    bool is_double() const { return t_ == 53 && e_min_ == -1022 && e_max_ == 1023; }

    friend bool operator==(const FloatFormat& a, const FloatFormat& b) {
        return a.t_ == b.t_ && a.e_min_ == b.e_min_ && a.e_max_ == b.e_max_;
    }

private:
    FloatFormat(FormatKind kind, int t, int e_min, int e_max);

    FormatKind kind_;
    int t_;
    int e_min_;
    int e_max_;
    double u_;
    double x_min_;
    double x_max_;
    double x_min_sub_;
};

/// Exceptional events raised while rounding. Combined with bitwise or.
class FpFlags {
public:
    enum Bit : std::uint8_t {
        none = 0,
        overflowed = 1u << 0,
        underflowed_to_zero = 1u << 1,
        subnormal = 1u << 2,
        divide_by_zero = 1u << 3,
        clamped = 1u << 4,
    };

    constexpr FpFlags() = default;
    constexpr FpFlags(Bit b) : bits_(b) {}  // NOLINT(google-explicit-constructor)
    constexpr static FpFlags from_bits(std::uint8_t bits) {
        FpFlags f;
        f.bits_ = bits;
        return f;
    }

    constexpr std::uint8_t bits() const { return bits_; }
    constexpr bool any() const { return bits_ != 0; }
    constexpr bool has(Bit b) const { return (bits_ & b) != 0; }
    /// Overflow or total underflow: the value no longer carries the magnitude
    /// of the exact result.
    constexpr bool range_error() const {
        return (bits_ & (overflowed | underflowed_to_zero)) != 0;
    }

    constexpr FpFlags& operator|=(FpFlags o) {
        bits_ |= o.bits_;
        return *this;
    }
    friend constexpr FpFlags operator|(FpFlags a, FpFlags b) { return a |= b; }
    friend constexpr bool operator==(FpFlags a, FpFlags b) = default;

    std::string to_string() const;

private:
    std::uint8_t bits_ = 0;
};

struct RoundedValue {
    double value = 0.0;
    FloatFormat format = FloatFormat::fp64();
    FpFlags flags;
};

enum class ArithOp : std::uint8_t { add, sub, mul, div };

/// Nearest value of `fmt` to x, ties to even. NaN and infinities pass through.
RoundedValue round_to_format(double x, const FloatFormat& fmt);

/// Flags that rounding `input` to `result` in `fmt` raised. Shared by the
/// scalar and vector kernels so both report the same events.
FpFlags rounding_flags(double input, double result, const FloatFormat& fmt);

/// fl(x op y) under the standard model. Inputs are expected to be
/// representable in fmt already.
RoundedValue fl_op(double x, double y, ArithOp op, const FloatFormat& fmt);

/// Left-to-right dot product with every product and partial sum rounded to
/// fmt. Throws std::invalid_argument on size mismatch or empty input.
RoundedValue inner_product(std::span<const double> x, std::span<const double> y,
                           const FloatFormat& fmt);

/// gamma_r = r u / (1 - r u). Throws std::domain_error when r u >= 1.
double gamma(std::size_t r, const FloatFormat& fmt);

/// Rounds every element of `in` into `out` (sizes must match; may alias).
/// Uses the fastest kernel available on this CPU.
FpFlags round_vector(std::span<const double> in, std::span<double> out,
                     const FloatFormat& fmt);

}  // namespace mpkm
