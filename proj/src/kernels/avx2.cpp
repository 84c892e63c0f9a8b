// AVX2 kernels. Built with -mavx2 only (no FMA), selected at runtime.
//
// Rounding works on the bit pattern: for magnitudes >= x_min the low
// (53 - t) significand bits are rounded off with ties to even, letting the
// carry ripple into the exponent. Below x_min the spacing is fixed at
// 2^(e_min - t + 1), and adding then subtracting 1.5 * 2^52 times that
// spacing makes the double adder do the rounding.

#include <immintrin.h>

#include <cmath>
#include <cstdint>
#include <limits>

#include "kernels_internal.hpp"

namespace mpkm::kernels::detail {
namespace {

struct RoundConsts {
    __m256d abs_mask;
    __m256d sign_mask;
    __m256d x_min;
    __m256d x_max;
    __m256d dbl_max;
    __m256d infinity;
    __m256d magic;
    __m256i low_mask_inv;
    __m256i half_minus_one;
    __m256i one;
    __m128i shift;
    bool identity;

    explicit RoundConsts(const FloatFormat& fmt) {
        abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7FFFFFFFFFFFFFFFLL));
        sign_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(static_cast<long long>(0x8000000000000000ULL)));
        x_min = _mm256_set1_pd(fmt.x_min());
        x_max = _mm256_set1_pd(fmt.x_max());
        dbl_max = _mm256_set1_pd(std::numeric_limits<double>::max());
        infinity = _mm256_set1_pd(std::numeric_limits<double>::infinity());
        identity = fmt.is_double();
        const int s = identity ? 1 : 53 - fmt.t();
        magic = _mm256_set1_pd(std::ldexp(3.0, fmt.e_min() - fmt.t() + 52));
        low_mask_inv = _mm256_set1_epi64x(~((1LL << s) - 1));
        half_minus_one = _mm256_set1_epi64x((1LL << (s - 1)) - 1);
        one = _mm256_set1_epi64x(1);
        shift = _mm_cvtsi32_si128(s);
    }
};

inline __m256d round4(__m256d v, const RoundConsts& c) {
    if (c.identity) return v;
    const __m256d a = _mm256_and_pd(v, c.abs_mask);
    const __m256d sign = _mm256_and_pd(v, c.sign_mask);

    const __m256i bits = _mm256_castpd_si256(a);
    const __m256i lsb = _mm256_and_si256(_mm256_srl_epi64(bits, c.shift), c.one);
    const __m256i biased = _mm256_add_epi64(bits, _mm256_add_epi64(c.half_minus_one, lsb));
    const __m256d normal = _mm256_castsi256_pd(_mm256_and_si256(biased, c.low_mask_inv));

    const __m256d sub = _mm256_sub_pd(_mm256_add_pd(a, c.magic), c.magic);
    const __m256d is_sub = _mm256_cmp_pd(a, c.x_min, _CMP_LT_OQ);
    __m256d r = _mm256_blendv_pd(normal, sub, is_sub);

    const __m256d over = _mm256_cmp_pd(r, c.x_max, _CMP_GT_OQ);
    r = _mm256_blendv_pd(r, c.infinity, over);

    // NaN and infinite inputs pass through unchanged.
    const __m256d nonfinite = _mm256_cmp_pd(a, c.dbl_max, _CMP_NLE_UQ);
    r = _mm256_blendv_pd(r, a, nonfinite);
    return _mm256_or_pd(r, sign);
}

struct FlagConsts {
    __m256d abs_mask;
    __m256d x_min;
    __m256d dbl_max;
    __m256d zero;

    explicit FlagConsts(const FloatFormat& fmt)
        : abs_mask(_mm256_castsi256_pd(_mm256_set1_epi64x(0x7FFFFFFFFFFFFFFFLL))),
          x_min(_mm256_set1_pd(fmt.x_min())),
          dbl_max(_mm256_set1_pd(std::numeric_limits<double>::max())),
          zero(_mm256_setzero_pd()) {}
};

// Per-lane masks (bit i = lane i) of the three rounding events. `operands_finite`
// marks lanes whose inputs were finite, so an infinite result is a new overflow.
struct LaneEvents {
    int overflow;
    int underflow;
    int subnormal;
};

inline LaneEvents events4(__m256d exact, __m256d result, __m256d operands_finite,
                          const FlagConsts& c) {
    const __m256d ar = _mm256_and_pd(result, c.abs_mask);
    const __m256d is_inf = _mm256_cmp_pd(ar, c.dbl_max, _CMP_GT_OQ);
    const __m256d res_zero = _mm256_cmp_pd(result, c.zero, _CMP_EQ_OQ);
    const __m256d exact_nonzero = _mm256_cmp_pd(exact, c.zero, _CMP_NEQ_OQ);
    const __m256d is_sub = _mm256_and_pd(_mm256_cmp_pd(ar, c.zero, _CMP_GT_OQ),
                                         _mm256_cmp_pd(ar, c.x_min, _CMP_LT_OQ));
    return {_mm256_movemask_pd(_mm256_and_pd(is_inf, operands_finite)),
            _mm256_movemask_pd(_mm256_and_pd(res_zero, exact_nonzero)),
            _mm256_movemask_pd(is_sub)};
}

inline __m256d finite_mask(__m256d v, const FlagConsts& c) {
    return _mm256_cmp_pd(_mm256_and_pd(v, c.abs_mask), c.dbl_max, _CMP_LE_OQ);
}

FpFlags round_span_avx2(std::span<const double> in, std::span<double> out,
                        const FloatFormat& fmt) {
    if (fmt.t() == 53 && !fmt.is_double()) return scalar_table.round_span(in, out, fmt);
    const RoundConsts rc(fmt);
    const FlagConsts fc(fmt);
    const std::size_t n = in.size();
    int over = 0;
    int under = 0;
    int sub = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(in.data() + i);
        const __m256d r = round4(v, rc);
        _mm256_storeu_pd(out.data() + i, r);
        const LaneEvents e = events4(v, r, finite_mask(v, fc), fc);
        over |= e.overflow;
        under |= e.underflow;
        sub |= e.subnormal;
    }
    FpFlags flags;
    if (over != 0) flags |= FpFlags::overflowed;
    if (under != 0) flags |= FpFlags::underflowed_to_zero;
    if (sub != 0) flags |= FpFlags::subnormal;
    for (; i < n; ++i) {
        const RoundedValue r = round_to_format(in[i], fmt);
        out[i] = r.value;
        flags |= r.flags;
    }
    return flags;
}

inline void accumulate_flags(const LaneEvents& e, std::uint8_t* lane_flags) {
    for (int l = 0; l < 4; ++l) {
        std::uint8_t b = 0;
        if ((e.overflow >> l) & 1) b |= FpFlags::overflowed;
        if ((e.underflow >> l) & 1) b |= FpFlags::underflowed_to_zero;
        if ((e.subnormal >> l) & 1) b |= FpFlags::subnormal;
        lane_flags[l] |= b;
    }
}

void dot_lanes_avx2(std::span<const double> x, const LaneMatrix& y, const FloatFormat& fmt,
                    std::span<double> out, std::span<std::uint8_t> lane_flags) {
    if (fmt.t() == 53 && !fmt.is_double()) return scalar_table.dot_lanes(x, y, fmt, out, lane_flags);
    const RoundConsts rc(fmt);
    const FlagConsts fc(fmt);
    std::size_t j = 0;
    for (; j + 4 <= y.lanes; j += 4) {
        std::uint8_t* lf = lane_flags.data() + j;
        lf[0] = lf[1] = lf[2] = lf[3] = 0;

        const __m256d x0 = _mm256_set1_pd(x[0]);
        const __m256d y0 = _mm256_loadu_pd(y.data + j);
        const __m256d p0 = _mm256_mul_pd(x0, y0);
        __m256d acc = round4(p0, rc);
        accumulate_flags(events4(p0, acc, _mm256_and_pd(finite_mask(x0, fc), finite_mask(y0, fc)), fc), lf);

        for (std::size_t f = 1; f < y.rows; ++f) {
            const __m256d xf = _mm256_set1_pd(x[f]);
            const __m256d yf = _mm256_loadu_pd(y.data + f * y.stride + j);
            const __m256d p = _mm256_mul_pd(xf, yf);
            const __m256d pr = round4(p, rc);
            accumulate_flags(events4(p, pr, _mm256_and_pd(finite_mask(xf, fc), finite_mask(yf, fc)), fc), lf);
            const __m256d s = _mm256_add_pd(acc, pr);
            const __m256d sr = round4(s, rc);
            accumulate_flags(events4(s, sr, _mm256_and_pd(finite_mask(acc, fc), finite_mask(pr, fc)), fc), lf);
            acc = sr;
        }
        _mm256_storeu_pd(out.data() + j, acc);
    }
    if (j < y.lanes) {
        const LaneMatrix tail{y.data + j, y.rows, y.stride, y.lanes - j};
        scalar_table.dot_lanes(x, tail, fmt, out.subspan(j), lane_flags.subspan(j));
    }
}

}  // namespace

const KernelTable avx2_table{Isa::avx2, &round_span_avx2, &dot_lanes_avx2};

}  // namespace mpkm::kernels::detail
