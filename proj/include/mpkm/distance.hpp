#pragma once
// Squared Euclidean distance kernels in uniform and mixed precision, the
// magnitude-ratio trigger that decides when the cross term may be computed
// in low precision, and evaluators for the matching forward error bounds.

#include <cstddef>
#include <cstdint>
#include <span>

#include "mpkm/simfloat.hpp"

namespace mpkm {

class Dataset;

struct DistanceOutcome {
    double d2 = 0.0;
    bool used_low_precision = false;
    FpFlags flags;
};

/// Working/low precision pair, trigger threshold and trigger counters.
///
/// The counters are the only mutable state touched by the kernels; a context
/// must not be shared between threads that evaluate distances concurrently
/// (give each worker its own and merge()).
class PrecisionContext {
public:
    /// Throws std::invalid_argument unless delta >= 1 and low.u() >= work.u().
    PrecisionContext(FloatFormat work, FloatFormat low, double delta);

    const FloatFormat& work() const { return work_; }
    const FloatFormat& low() const { return low_; }
    double delta() const { return delta_; }
    /// delta^2 evaluated in the working format.
    double delta_sq() const { return delta_sq_; }

    std::uint64_t total() const { return total_; }
    std::uint64_t triggered() const { return triggered_; }

    void record(bool used_low) {
        ++total_;
        if (used_low) ++triggered_;
    }
    void merge(const PrecisionContext& other) {
        total_ += other.total_;
        triggered_ += other.triggered_;
    }
    void reset_counters() { total_ = triggered_ = 0; }

    /// Triggered / total; 0 when nothing has been counted.
    double eta() const;

private:
    FloatFormat work_;
    FloatFormat low_;
    double delta_;
    double delta_sq_;
    std::uint64_t total_ = 0;
    std::uint64_t triggered_ = 0;
};

/// max{pp/cc, cc/pp} >= delta^2, evaluated in the working format. A zero norm
/// against a nonzero one counts as an infinite ratio; two zero norms never
/// trigger.
bool low_precision_trigger(double pp, double cc, const PrecisionContext& ctx);

/// (x - y)^T (x - y) with every scalar operation rounded to fmt.
DistanceOutcome dist_sq_diff(std::span<const double> x, std::span<const double> y,
                             const FloatFormat& fmt);

/// xx - 2 x^T y + yy with every scalar operation rounded to fmt, evaluated as
/// fl(fl(xx - fl(2 fl(x^T y))) + yy) and clamped at zero. xx and yy are the
/// caller's precomputed squared norms.
DistanceOutcome dist_sq_gram(double xx, double yy, std::span<const double> x,
                             std::span<const double> y, const FloatFormat& fmt);

/// Final steps of the Gram formula given fl(x^T y): fl(fl(xx - fl(2 dot)) + yy),
/// NaN (from inf - inf) reported as +infinity, negatives clamped to zero.
DistanceOutcome combine_gram(double xx, double yy, const RoundedValue& dot,
                             const FloatFormat& fmt);

/// The mixed-precision kernel. When the trigger fires, p and c are scaled by
/// their infinity norms s1, s2 (in the working format), the scaled vectors are
/// rounded to the low format and their dot product is formed there; the result
/// pp + cc - 2 s1 (p~^T c~) s2 is then assembled in the working format.
/// Otherwise this is dist_sq_gram in the working format. Updates ctx counters.
/// When low == work nothing is gained, so the Gram path is always taken.
DistanceOutcome dist_sq_mixed(std::span<const double> p, std::span<const double> c, double pp,
                              double cc, PrecisionContext& ctx);

/// Combines the pieces of a triggered mixed-precision evaluation; shared by
/// dist_sq_mixed and the batched k-means path so both produce the same bits.
DistanceOutcome combine_mixed(double pp, double cc, double s1, double s2,
                              const RoundedValue& scaled_dot, const FloatFormat& work);

/// Infinity norm and the scaled copy x / ||x||_inf rounded to `low`. A zero
/// vector has scale 0 and is copied unchanged.
double scale_to_unit(std::span<const double> x, std::span<double> out, const FloatFormat& work,
                     const FloatFormat& low);

/// Forward error bound for the difference formula: gamma_{r+2} |d|.
/// Returns +infinity when (r+2) u >= 1 and the bound is vacuous.
double bound_diff_formula(std::span<const double> x, std::span<const double> y,
                          const FloatFormat& fmt);

/// Forward error bound for the Gram formula:
/// gamma_{r+2} (x^T x + 2 |x|^T |y| + y^T y); +infinity when vacuous.
double bound_gram_formula(std::span<const double> x, std::span<const double> y,
                          const FloatFormat& fmt);

/// First-order bound for the mixed kernel with a triggered cross term:
/// (r+2) u (x^T x + y^T y) + 2 (r+2) u_low |x|^T |y|.
double bound_mixed_formula(std::span<const double> x, std::span<const double> y,
                           const PrecisionContext& ctx);

/// ||x|| ||y|| / |x^T y|, i.e. 1 / cos(theta); +infinity for orthogonal
/// vectors. Throws std::invalid_argument on a zero vector.
double inner_product_condition(std::span<const double> x, std::span<const double> y);

struct KernelMatrixDiff {
    double frobenius_diff = 0.0;     // ||D_diff - D_gram||_F
    double frobenius_reference = 0.0;  // ||D_diff||_F
    FpFlags diff_flags;
    FpFlags gram_flags;

    double relative() const {
        return frobenius_reference == 0.0 ? frobenius_diff : frobenius_diff / frobenius_reference;
    }
};

/// Builds the full n x n squared distance matrix with both formulas (norms
/// for the Gram formula precomputed in fmt) and compares them.
KernelMatrixDiff kernel_matrix_diff(const Dataset& data, const FloatFormat& fmt);

}  // namespace mpkm
