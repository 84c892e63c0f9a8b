#pragma once
// Data-parallel inner loops of the emulation, with a scalar reference and
// vectorized variants chosen at runtime.
//
// Every variant must be bit-identical to the scalar one: vectorization only
// runs independent element-wise roundings side by side, or independent dot
// products in separate lanes. A single dot product is never split across
// lanes, so its accumulation order stays left to right.
//
// The environment variable MPKM_KERNELS=scalar|avx2 overrides the choice.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

#include "mpkm/simfloat.hpp"

namespace mpkm::kernels {

enum class Isa : std::uint8_t { scalar, avx2 };

/// Columns stored feature-major: element (f, j) lives at data[f * stride + j],
/// j < lanes <= stride. Used for the k centers seen by one point.
struct LaneMatrix {
    const double* data = nullptr;
    std::size_t rows = 0;
    std::size_t stride = 0;
    std::size_t lanes = 0;
};

struct KernelTable {
    Isa isa;

    /// out[i] = round(in[i], fmt); returns the union of raised flags.
    FpFlags (*round_span)(std::span<const double> in, std::span<double> out,
                          const FloatFormat& fmt);

    /// out[j] = fl(x^T y_j) for every lane j, every product and partial sum
    /// rounded to fmt, summed left to right. lane_flags[j] receives the
    /// FpFlags bits raised while computing lane j.
    void (*dot_lanes)(std::span<const double> x, const LaneMatrix& y,
                      const FloatFormat& fmt, std::span<double> out,
                      std::span<std::uint8_t> lane_flags);
};

std::string_view isa_name(Isa isa);

/// Kernels for `isa`, or nullptr when not compiled in or unsupported by the CPU.
const KernelTable* table(Isa isa);

/// Currently selected kernels.
const KernelTable& active();

/// Overrides the runtime choice; throws std::runtime_error if unsupported.
void select(Isa isa);

}  // namespace mpkm::kernels
