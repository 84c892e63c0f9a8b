#include "mpkm/simfloat.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mpkm/kernels.hpp"

namespace mpkm {

FloatFormat::FloatFormat(int t, int e_min, int e_max)
    : FloatFormat(FormatKind::custom, t, e_min, e_max) {}

FloatFormat::FloatFormat(FormatKind kind, int t, int e_min, int e_max)
    : kind_(kind), t_(t), e_min_(e_min), e_max_(e_max) {
    if (t < 2 || t > 53) {
        throw std::invalid_argument("FloatFormat: t must lie in [2, 53], got " +
                                    std::to_string(t));
    }
    if (e_min < -1022 || e_min >= 0 || e_max <= 0 || e_max > 1023) {
        throw std::invalid_argument("FloatFormat: exponent range [" + std::to_string(e_min) +
                                    ", " + std::to_string(e_max) +
                                    "] does not fit in double precision");
    }
    u_ = std::ldexp(1.0, -t);
    x_min_ = std::ldexp(1.0, e_min);
    x_max_ = std::ldexp(2.0 - std::ldexp(1.0, 1 - t), e_max);
    x_min_sub_ = std::ldexp(1.0, e_min - t + 1);
    if (kind_ == FormatKind::custom && is_double()) kind_ = FormatKind::fp64;
}

FloatFormat FloatFormat::q52() { return {FormatKind::q52, 3, -14, 15}; }
FloatFormat FloatFormat::fp16() { return {FormatKind::fp16, 11, -14, 15}; }
FloatFormat FloatFormat::fp32() { return {FormatKind::fp32, 24, -126, 127}; }
FloatFormat FloatFormat::fp64() { return {FormatKind::fp64, 53, -1022, 1023}; }

FloatFormat FloatFormat::from_name(std::string_view name) {
    if (name == "q52") return q52();
    if (name == "fp16") return fp16();
    if (name == "fp32") return fp32();
    if (name == "fp64") return fp64();
    throw std::invalid_argument("unknown float format '" + std::string(name) +
                                "' (expected q52, fp16, fp32 or fp64)");
}

std::string_view FloatFormat::name() const {
    switch (kind_) {
        case FormatKind::q52: return "q52";
        case FormatKind::fp16: return "fp16";
        case FormatKind::fp32: return "fp32";
        case FormatKind::fp64: return "fp64";
        case FormatKind::custom: break;
    }
    return "custom";
}

std::string FpFlags::to_string() const {
    std::string out;
    auto add = [&](Bit b, const char* s) {
        if (!has(b)) return;
        if (!out.empty()) out += '|';
        out += s;
    };
    add(overflowed, "overflowed");
    add(underflowed_to_zero, "underflowed_to_zero");
    add(subnormal, "subnormal");
    add(divide_by_zero, "divide_by_zero");
    add(clamped, "clamped");
    return out.empty() ? "none" : out;
}

FpFlags rounding_flags(double input, double result, const FloatFormat& fmt) {
    FpFlags f;
    if (std::isinf(result) && std::isfinite(input)) f |= FpFlags::overflowed;
    if (result == 0.0 && input != 0.0 && !std::isnan(input)) f |= FpFlags::underflowed_to_zero;
    const double a = std::fabs(result);
    if (a != 0.0 && a < fmt.x_min()) f |= FpFlags::subnormal;
    return f;
}

namespace {

double round_value(double x, const FloatFormat& fmt) {
    if (fmt.is_double() || !std::isfinite(x) || x == 0.0) return x;
    const double a = std::fabs(x);
    const int e = std::ilogb(a);
    if (e > fmt.e_max()) return std::copysign(std::numeric_limits<double>::infinity(), x);
    // Spacing of representable numbers around a; fixed below x_min.
    const int quantum = (e < fmt.e_min() ? fmt.e_min() : e) - (fmt.t() - 1);
    const double scaled = std::nearbyint(std::ldexp(a, -quantum));
    double r = std::ldexp(scaled, quantum);
    if (r > fmt.x_max()) r = std::numeric_limits<double>::infinity();
    return std::copysign(r, x);
}

}  // namespace

RoundedValue round_to_format(double x, const FloatFormat& fmt) {
    const double r = round_value(x, fmt);
    return {r, fmt, rounding_flags(x, r, fmt)};
}

RoundedValue fl_op(double x, double y, ArithOp op, const FloatFormat& fmt) {
    double exact = 0.0;
    FpFlags extra;
    switch (op) {
        case ArithOp::add: exact = x + y; break;
        case ArithOp::sub: exact = x - y; break;
        case ArithOp::mul: exact = x * y; break;
        case ArithOp::div:
            if (y == 0.0 && std::isfinite(x) && x != 0.0) extra |= FpFlags::divide_by_zero;
            exact = x / y;
            break;
    }
    RoundedValue r = round_to_format(exact, fmt);
    // x_max of double itself: the double operation may already have overflowed.
    if (std::isinf(exact) && std::isfinite(x) && std::isfinite(y) &&
        !extra.has(FpFlags::divide_by_zero)) {
        r.flags |= FpFlags::overflowed;
    }
    r.flags |= extra;
    return r;
}

RoundedValue inner_product(std::span<const double> x, std::span<const double> y,
                           const FloatFormat& fmt) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("inner_product: dimension mismatch (" +
                                    std::to_string(x.size()) + " vs " +
                                    std::to_string(y.size()) + ")");
    }
    if (x.empty()) throw std::invalid_argument("inner_product: empty vectors");
    RoundedValue acc = fl_op(x[0], y[0], ArithOp::mul, fmt);
    for (std::size_t i = 1; i < x.size(); ++i) {
        const RoundedValue prod = fl_op(x[i], y[i], ArithOp::mul, fmt);
        const FpFlags carried = acc.flags | prod.flags;
        acc = fl_op(acc.value, prod.value, ArithOp::add, fmt);
        acc.flags |= carried;
    }
    return acc;
}

double gamma(std::size_t r, const FloatFormat& fmt) {
    const double ru = static_cast<double>(r) * fmt.u();
    if (ru >= 1.0) {
        throw std::domain_error("gamma: r*u = " + std::to_string(ru) + " >= 1 for r = " +
                                std::to_string(r) + " in " + std::string(fmt.name()));
    }
    return ru / (1.0 - ru);
}

FpFlags round_vector(std::span<const double> in, std::span<double> out,
                     const FloatFormat& fmt) {
    if (in.size() != out.size()) {
        throw std::invalid_argument("round_vector: input and output sizes differ");
    }
    return kernels::active().round_span(in, out, fmt);
}

}  // namespace mpkm
