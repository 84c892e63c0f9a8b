#include "mpkm/simfloat.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "oracles/oracles.hpp"

using namespace mpkm;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(FloatFormat, PresetsHaveExpectedParameters) {
    const auto q = FloatFormat::q52();
    EXPECT_EQ(q.t(), 3);
    EXPECT_EQ(q.u(), 0.125);
    EXPECT_EQ(q.x_max(), 57344.0);
    EXPECT_EQ(q.x_min(), std::ldexp(1.0, -14));

    const auto h = FloatFormat::fp16();
    EXPECT_EQ(h.u(), std::ldexp(1.0, -11));
    EXPECT_EQ(h.x_max(), 65504.0);
    EXPECT_EQ(h.smallest_subnormal(), std::ldexp(1.0, -24));

    const auto s = FloatFormat::fp32();
    EXPECT_EQ(s.x_max(), static_cast<double>(std::numeric_limits<float>::max()));
    EXPECT_EQ(s.x_min(), static_cast<double>(std::numeric_limits<float>::min()));

    const auto d = FloatFormat::fp64();
    EXPECT_TRUE(d.is_double());
    EXPECT_EQ(d.x_max(), std::numeric_limits<double>::max());
    EXPECT_EQ(d.u(), std::numeric_limits<double>::epsilon() / 2);
}

TEST(FloatFormat, RejectsInvalidParameters) {
    EXPECT_THROW(FloatFormat(1, -14, 15), std::invalid_argument);
    EXPECT_THROW(FloatFormat(54, -14, 15), std::invalid_argument);
    EXPECT_THROW(FloatFormat(11, -1023, 15), std::invalid_argument);
    EXPECT_THROW(FloatFormat(11, -14, 1024), std::invalid_argument);
    EXPECT_THROW(FloatFormat::from_name("bf16"), std::invalid_argument);
    EXPECT_EQ(FloatFormat::from_name("q52"), FloatFormat::q52());
}

TEST(RoundToFormat, OneIsExactEverywhere) {
    for (auto f : {FloatFormat::q52(), FloatFormat::fp16(), FloatFormat::fp32(), FloatFormat::fp64()}) {
        const auto r = round_to_format(1.0, f);
        EXPECT_EQ(r.value, 1.0);
        EXPECT_FALSE(r.flags.any());
    }
}

TEST(RoundToFormat, Fp16TieGoesToEven) {
    const auto h = FloatFormat::fp16();
    EXPECT_EQ(round_to_format(1.0 + std::ldexp(1.0, -11), h).value, 1.0);
    EXPECT_EQ(round_to_format(1.0 + 3 * std::ldexp(1.0, -11), h).value, 1.0 + std::ldexp(1.0, -9));
}

TEST(RoundToFormat, OverflowAndUnderflowFlags) {
    const auto h = FloatFormat::fp16();
    auto r = round_to_format(70000.0, h);
    EXPECT_EQ(r.value, kInf);
    EXPECT_TRUE(r.flags.has(FpFlags::overflowed));

    // x_max plus just under half an ulp stays finite; the midpoint overflows.
    EXPECT_EQ(round_to_format(65519.99, h).value, 65504.0);
    EXPECT_EQ(round_to_format(65520.0, h).value, kInf);

    r = round_to_format(std::ldexp(1.0, -26), h);
    EXPECT_EQ(r.value, 0.0);
    EXPECT_TRUE(r.flags.has(FpFlags::underflowed_to_zero));

    r = round_to_format(-std::ldexp(3.0, -24), h);
    EXPECT_EQ(r.value, -std::ldexp(3.0, -24));
    EXPECT_TRUE(r.flags.has(FpFlags::subnormal));
    EXPECT_TRUE(std::signbit(round_to_format(-std::ldexp(1.0, -30), h).value));
}

TEST(RoundToFormat, NonFiniteInputsPassThrough) {
    const auto q = FloatFormat::q52();
    EXPECT_TRUE(std::isnan(round_to_format(std::nan(""), q).value));
    EXPECT_EQ(round_to_format(-kInf, q).value, -kInf);
    EXPECT_FALSE(round_to_format(kInf, q).flags.has(FpFlags::overflowed));
}

TEST(RoundToFormat, Q52HasThreeDigits) {
    const auto q = FloatFormat::q52();
    // Representable between 1 and 2: 1, 1.25, 1.5, 1.75.
    EXPECT_EQ(round_to_format(1.1, q).value, 1.0);
    EXPECT_EQ(round_to_format(1.2, q).value, 1.25);
    EXPECT_EQ(round_to_format(1.875, q).value, 2.0);
    EXPECT_EQ(round_to_format(57344.0, q).value, 57344.0);
    EXPECT_EQ(round_to_format(61440.0, q).value, kInf);
}

TEST(RoundToFormat, MatchesBinary16ReferenceOnRandomInputs) {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> mant(-1.0, 1.0);
    std::uniform_int_distribution<int> ex(-30, 17);
    const auto h = FloatFormat::fp16();
    for (int i = 0; i < 20000; ++i) {
        const double x = std::ldexp(mant(gen), ex(gen));
        ASSERT_EQ(round_to_format(x, h).value, oracle::round_half(x)) << x;
    }
}

TEST(RoundToFormat, Fp32MatchesHardwareConversion) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> mant(-1.0, 1.0);
    std::uniform_int_distribution<int> ex(-160, 130);
    const auto s = FloatFormat::fp32();
    for (int i = 0; i < 20000; ++i) {
        const double x = std::ldexp(mant(gen), ex(gen));
        ASSERT_EQ(round_to_format(x, s).value, static_cast<double>(static_cast<float>(x))) << x;
    }
}

TEST(FlOp, MatchesFloatArithmeticForFp32) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<float> dist(-100.0f, 100.0f);
    const auto s = FloatFormat::fp32();
    for (int i = 0; i < 5000; ++i) {
        const float a = dist(gen);
        const float b = dist(gen);
        EXPECT_EQ(fl_op(a, b, ArithOp::add, s).value, static_cast<double>(a + b));
        EXPECT_EQ(fl_op(a, b, ArithOp::sub, s).value, static_cast<double>(a - b));
        EXPECT_EQ(fl_op(a, b, ArithOp::mul, s).value, static_cast<double>(a * b));
        EXPECT_EQ(fl_op(a, b, ArithOp::div, s).value, static_cast<double>(a / b));
    }
}

TEST(FlOp, DivisionByZeroIsFlagged) {
    const auto r = fl_op(1.0, 0.0, ArithOp::div, FloatFormat::fp16());
    EXPECT_EQ(r.value, kInf);
    EXPECT_TRUE(r.flags.has(FpFlags::divide_by_zero));
}

TEST(InnerProduct, LeftToRightRounding) {
    const auto h = FloatFormat::fp16();
    // 2048 + 1 rounds back to 2048 in fp16, so the order matters.
    const std::vector<double> x{2048.0, 1.0, 1.0};
    const std::vector<double> y{1.0, 1.0, 1.0};
    EXPECT_EQ(inner_product(x, y, h).value, 2048.0);
    EXPECT_EQ(inner_product(x, y, FloatFormat::fp64()).value, 2050.0);
}

TEST(InnerProduct, RejectsMismatchedOrEmpty) {
    const std::vector<double> a{1.0, 2.0};
    const std::vector<double> b{1.0};
    EXPECT_THROW(inner_product(a, b, FloatFormat::fp64()), std::invalid_argument);
    EXPECT_THROW(inner_product({}, {}, FloatFormat::fp64()), std::invalid_argument);
}

TEST(InnerProduct, OverflowIsReported) {
    const std::vector<double> x{300.0, 300.0};
    const auto r = inner_product(x, x, FloatFormat::fp16());
    EXPECT_EQ(r.value, kInf);
    EXPECT_TRUE(r.flags.has(FpFlags::overflowed));
}

TEST(Gamma, FormulaAndDomain) {
    const auto d = FloatFormat::fp64();
    const double u = d.u();
    EXPECT_DOUBLE_EQ(gamma(4, d), 4 * u / (1 - 4 * u));
    EXPECT_THROW(gamma(8, FloatFormat::q52()), std::domain_error);
    EXPECT_NO_THROW(gamma(7, FloatFormat::q52()));
}

TEST(RoundVector, MatchesElementwiseRounding) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> dist(-1e5, 1e5);
    std::vector<double> in(1001);
    for (double& v : in) v = dist(gen);
    for (auto f : {FloatFormat::q52(), FloatFormat::fp16(), FloatFormat::fp32()}) {
        std::vector<double> out(in.size());
        const FpFlags flags = round_vector(in, out, f);
        FpFlags expected;
        for (std::size_t i = 0; i < in.size(); ++i) {
            const auto r = round_to_format(in[i], f);
            ASSERT_EQ(out[i], r.value);
            expected |= r.flags;
        }
        EXPECT_EQ(flags, expected);
    }
}

TEST(FpFlags, CombineAndDescribe) {
    FpFlags f = FpFlags::overflowed;
    f |= FpFlags::subnormal;
    EXPECT_TRUE(f.range_error());
    EXPECT_EQ(f.to_string(), "overflowed|subnormal");
    EXPECT_FALSE(FpFlags(FpFlags::subnormal).range_error());
}

}  // namespace
