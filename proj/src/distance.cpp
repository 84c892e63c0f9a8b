#include "mpkm/distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpkm/dataset.hpp"

namespace mpkm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_dim(std::span<const double> x, std::span<const double> y, const char* what) {
    if (x.size() != y.size() || x.empty()) {
        throw std::invalid_argument(std::string(what) + ": vectors must be nonempty and of equal length (" +
                                    std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
    }
}

// An infinite or NaN (inf - inf) result means some term overflowed; report
// +inf so it still compares as "far". Negative values are cancellation noise
// and are clamped.
DistanceOutcome finish(double d, FpFlags flags) {
    if (!std::isfinite(d)) {
        d = kInf;
        flags |= FpFlags::overflowed;
    } else if (d < 0.0) {
        d = 0.0;
        flags |= FpFlags::clamped;
    }
    return {d, false, flags};
}

std::vector<double> rounded_copy(std::span<const double> x, const FloatFormat& fmt, FpFlags& flags) {
    std::vector<double> out(x.begin(), x.end());
    if (!fmt.is_double()) flags |= round_vector(out, out, fmt);
    return out;
}

double gamma_or_inf(std::size_t r, const FloatFormat& fmt) {
    if (static_cast<double>(r) * fmt.u() >= 1.0) return kInf;
    return gamma(r, fmt);
}

}  // namespace

PrecisionContext::PrecisionContext(FloatFormat work, FloatFormat low, double delta)
    : work_(work), low_(low), delta_(delta) {
    if (!(delta >= 1.0)) {
        throw std::invalid_argument("PrecisionContext: delta must be >= 1, got " + std::to_string(delta));
    }
    if (low.u() < work.u()) {
        throw std::invalid_argument("PrecisionContext: low format " + std::string(low.name()) +
                                    " is more precise than working format " + std::string(work.name()));
    }
    delta_sq_ = fl_op(delta, delta, ArithOp::mul, work_).value;
}

double PrecisionContext::eta() const {
    return total_ == 0 ? 0.0 : static_cast<double>(triggered_) / static_cast<double>(total_);
}

bool low_precision_trigger(double pp, double cc, const PrecisionContext& ctx) {
    if (pp == 0.0 && cc == 0.0) return false;
    if (pp == 0.0 || cc == 0.0) return true;
    const double a = fl_op(pp, cc, ArithOp::div, ctx.work()).value;
    const double b = fl_op(cc, pp, ArithOp::div, ctx.work()).value;
    return std::max(a, b) >= ctx.delta_sq();
}

DistanceOutcome dist_sq_diff(std::span<const double> x, std::span<const double> y,
                             const FloatFormat& fmt) {
    require_same_dim(x, y, "dist_sq_diff");
    FpFlags flags;
    std::vector<double> diff(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const RoundedValue xi = round_to_format(x[i], fmt);
        const RoundedValue yi = round_to_format(y[i], fmt);
        const RoundedValue d = fl_op(xi.value, yi.value, ArithOp::sub, fmt);
        flags |= xi.flags | yi.flags | d.flags;
        diff[i] = d.value;
    }
    const RoundedValue sq = inner_product(diff, diff, fmt);
    return finish(sq.value, flags | sq.flags);
}

DistanceOutcome combine_gram(double xx, double yy, const RoundedValue& dot, const FloatFormat& fmt) {
    const RoundedValue xr = round_to_format(xx, fmt);
    const RoundedValue yr = round_to_format(yy, fmt);
    const RoundedValue twice = fl_op(2.0, dot.value, ArithOp::mul, fmt);
    const RoundedValue partial = fl_op(xr.value, twice.value, ArithOp::sub, fmt);
    const RoundedValue d = fl_op(partial.value, yr.value, ArithOp::add, fmt);
    return finish(d.value, dot.flags | xr.flags | yr.flags | twice.flags | partial.flags | d.flags);
}

DistanceOutcome dist_sq_gram(double xx, double yy, std::span<const double> x,
                             std::span<const double> y, const FloatFormat& fmt) {
    require_same_dim(x, y, "dist_sq_gram");
    FpFlags flags;
    const std::vector<double> xr = rounded_copy(x, fmt, flags);
    const std::vector<double> yr = rounded_copy(y, fmt, flags);
    RoundedValue dot = inner_product(xr, yr, fmt);
    dot.flags |= flags;
    return combine_gram(xx, yy, dot, fmt);
}

double scale_to_unit(std::span<const double> x, std::span<double> out, const FloatFormat& work,
                     const FloatFormat& low) {
    double s = 0.0;
    for (double v : x) s = std::max(s, std::fabs(v));
    if (s == 0.0) {
        std::copy(x.begin(), x.end(), out.begin());
        return 0.0;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = fl_op(x[i], s, ArithOp::div, work).value;
    }
    round_vector(out, out, low);
    return s;
}

DistanceOutcome combine_mixed(double pp, double cc, double s1, double s2,
                              const RoundedValue& scaled_dot, const FloatFormat& work) {
    const RoundedValue sum = fl_op(pp, cc, ArithOp::add, work);
    const RoundedValue t1 = fl_op(2.0, s1, ArithOp::mul, work);
    const RoundedValue t2 = fl_op(t1.value, scaled_dot.value, ArithOp::mul, work);
    const RoundedValue t3 = fl_op(t2.value, s2, ArithOp::mul, work);
    const RoundedValue d = fl_op(sum.value, t3.value, ArithOp::sub, work);
    DistanceOutcome out =
        finish(d.value, scaled_dot.flags | sum.flags | t1.flags | t2.flags | t3.flags | d.flags);
    out.used_low_precision = true;
    return out;
}

DistanceOutcome dist_sq_mixed(std::span<const double> p, std::span<const double> c, double pp,
                              double cc, PrecisionContext& ctx) {
    require_same_dim(p, c, "dist_sq_mixed");
    if (ctx.low() == ctx.work() || !low_precision_trigger(pp, cc, ctx)) {
        ctx.record(false);
        return dist_sq_gram(pp, cc, p, c, ctx.work());
    }
    std::vector<double> ps(p.size());
    std::vector<double> cs(c.size());
    const double s1 = scale_to_unit(p, ps, ctx.work(), ctx.low());
    const double s2 = scale_to_unit(c, cs, ctx.work(), ctx.low());
    RoundedValue dot{0.0, ctx.low(), {}};
    if (s1 != 0.0 && s2 != 0.0) dot = inner_product(ps, cs, ctx.low());
    ctx.record(true);
    return combine_mixed(pp, cc, s1, s2, dot, ctx.work());
}

double bound_diff_formula(std::span<const double> x, std::span<const double> y,
                          const FloatFormat& fmt) {
    require_same_dim(x, y, "bound_diff_formula");
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - y[i]) * (x[i] - y[i]);
    if (d == 0.0) return 0.0;
    return gamma_or_inf(x.size() + 2, fmt) * d;
}

double bound_gram_formula(std::span<const double> x, std::span<const double> y,
                          const FloatFormat& fmt) {
    require_same_dim(x, y, "bound_gram_formula");
    double xx = 0.0;
    double yy = 0.0;
    double cross = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx += x[i] * x[i];
        yy += y[i] * y[i];
        cross += std::fabs(x[i]) * std::fabs(y[i]);
    }
    const double scale = xx + 2.0 * cross + yy;
    if (scale == 0.0) return 0.0;
    return gamma_or_inf(x.size() + 2, fmt) * scale;
}

double bound_mixed_formula(std::span<const double> x, std::span<const double> y,
                           const PrecisionContext& ctx) {
    require_same_dim(x, y, "bound_mixed_formula");
    double xx = 0.0;
    double yy = 0.0;
    double cross = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx += x[i] * x[i];
        yy += y[i] * y[i];
        cross += std::fabs(x[i]) * std::fabs(y[i]);
    }
    const double r2 = static_cast<double>(x.size() + 2);
    return r2 * ctx.work().u() * (xx + yy) + 2.0 * r2 * ctx.low().u() * cross;
}

double inner_product_condition(std::span<const double> x, std::span<const double> y) {
    require_same_dim(x, y, "inner_product_condition");
    double xx = 0.0;
    double yy = 0.0;
    double xy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx += x[i] * x[i];
        yy += y[i] * y[i];
        xy += x[i] * y[i];
    }
    if (xx == 0.0 || yy == 0.0) {
        throw std::invalid_argument("inner_product_condition: zero vector has no angle");
    }
    if (xy == 0.0) return kInf;
    return std::sqrt(xx) * std::sqrt(yy) / std::fabs(xy);
}

KernelMatrixDiff kernel_matrix_diff(const Dataset& data, const FloatFormat& fmt) {
    if (data.empty()) throw std::invalid_argument("kernel_matrix_diff: empty dataset");
    const std::size_t n = data.size();
    const std::size_t r = data.dim();
    KernelMatrixDiff out;

    std::vector<double> pts(data.values().begin(), data.values().end());
    out.diff_flags |= round_vector(pts, pts, fmt);
    out.gram_flags = out.diff_flags;
    auto point = [&](std::size_t i) { return std::span<const double>(pts.data() + i * r, r); };

    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const RoundedValue nn = inner_product(point(i), point(i), fmt);
        norms[i] = nn.value;
        out.gram_flags |= nn.flags;
    }

    double diff_sq = 0.0;
    double ref_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const DistanceOutcome a = dist_sq_diff(point(i), point(j), fmt);
            const DistanceOutcome b = dist_sq_gram(norms[i], norms[j], point(i), point(j), fmt);
            out.diff_flags |= a.flags;
            out.gram_flags |= b.flags;
            const double e = a.d2 - b.d2;
            diff_sq += e * e;
            ref_sq += a.d2 * a.d2;
        }
    }
    out.frobenius_diff = std::sqrt(diff_sq);
    out.frobenius_reference = std::sqrt(ref_sq);
    return out;
}

}  // namespace mpkm
