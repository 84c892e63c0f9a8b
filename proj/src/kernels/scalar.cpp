// Reference kernels. Other variants are tested for bit-equality against these.

#include <cstdint>

#include "kernels_internal.hpp"

namespace mpkm::kernels::detail {
namespace {

FpFlags round_span_scalar(std::span<const double> in, std::span<double> out,
                          const FloatFormat& fmt) {
    FpFlags flags;
    for (std::size_t i = 0; i < in.size(); ++i) {
        const RoundedValue r = round_to_format(in[i], fmt);
        out[i] = r.value;
        flags |= r.flags;
    }
    return flags;
}

void dot_lanes_scalar(std::span<const double> x, const LaneMatrix& y, const FloatFormat& fmt,
                      std::span<double> out, std::span<std::uint8_t> lane_flags) {
    for (std::size_t j = 0; j < y.lanes; ++j) {
        RoundedValue acc = fl_op(x[0], y.data[j], ArithOp::mul, fmt);
        for (std::size_t f = 1; f < y.rows; ++f) {
            const RoundedValue prod = fl_op(x[f], y.data[f * y.stride + j], ArithOp::mul, fmt);
            const FpFlags carried = acc.flags | prod.flags;
            acc = fl_op(acc.value, prod.value, ArithOp::add, fmt);
            acc.flags |= carried;
        }
        out[j] = acc.value;
        lane_flags[j] = acc.flags.bits();
    }
}

}  // namespace

const KernelTable scalar_table{Isa::scalar, &round_span_scalar, &dot_lanes_scalar};

}  // namespace mpkm::kernels::detail
