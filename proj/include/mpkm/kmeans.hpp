#pragma once
// Lloyd's algorithm with D^2 seeding, in three precision modes:
//   working  Gram-formula distances in the working format
//   low      Gram-formula distances with every operation in the low format
//   mixed    the magnitude-triggered mixed kernel (dist_sq_mixed)
// Center updates, argmin comparisons, SSE and the final assignment pass are
// always carried out in the working format.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mpkm/dataset.hpp"
#include "mpkm/distance.hpp"
#include "mpkm/rng.hpp"
#include "mpkm/simfloat.hpp"

namespace mpkm {

enum class KMeansMode : std::uint8_t { working, low, mixed };

std::string_view mode_name(KMeansMode mode);
/// Throws std::invalid_argument for anything but working, low, mixed.
KMeansMode parse_mode(std::string_view name);

struct KMeansConfig {
    std::size_t k = 8;
    std::size_t max_iter = 300;
    double tol = 1e-4;
    KMeansMode mode = KMeansMode::working;
    PrecisionContext ctx{FloatFormat::fp64(), FloatFormat::fp16(), 2.0};
    std::uint64_t seed = 0;
    /// When every distance of a point is nonfinite, fall back to working
    /// precision for that point. Off: the point keeps label 0 for the rest of
    /// the run, final pass included.
    bool rescue = true;
    /// Worker threads for the assignment step; results do not depend on it.
    std::size_t threads = 1;

    /// Throws std::invalid_argument on k == 0, max_iter == 0 or tol < 0 / NaN.
    void validate() const;
};

/// Centers prepared for one distance mode: rounded, stored feature-major, with
/// their squared norms (and scaled copies in mixed mode).
struct CenterSet {
    std::size_t k = 0;
    std::vector<double> raw;         // k x r as given
    std::vector<double> cols;        // r x k, feature-major
    std::vector<double> norms;
    std::vector<double> scaled_cols;  // mixed only
    std::vector<double> scales;       // mixed only
    FpFlags flags;
};

/// Per-point distance evaluation for one mode. Point data, norms and scaled
/// copies are prepared once; the engine is immutable afterwards and may be
/// shared between threads.
class DistanceEngine {
public:
    DistanceEngine(const Dataset& data, KMeansMode mode, const PrecisionContext& ctx);

    KMeansMode mode() const { return mode_; }
    const Dataset& data() const { return *data_; }
    /// Format the Gram-path dot products and norms are evaluated in.
    const FloatFormat& format() const { return fmt_; }

    /// centers: k point-contiguous vectors of the data dimension.
    CenterSet prepare(std::span<const double> centers, std::size_t k) const;

    struct Scratch {
        std::vector<double> dots;
        std::vector<double> scaled_dots;
        std::vector<std::uint8_t> flags;
        std::vector<std::uint8_t> scaled_flags;
    };

    /// Squared distances from point i to every center into out (size k).
    /// counters records one evaluation per center; returns the raised flags.
    FpFlags distances(std::size_t i, const CenterSet& centers, std::span<double> out,
                      PrecisionContext& counters, Scratch& scratch) const;

private:
    const Dataset* data_;
    KMeansMode mode_;
    PrecisionContext ctx_;
    FloatFormat fmt_;
    std::vector<double> points_;
    std::vector<double> norms_;
    std::vector<double> scaled_;
    std::vector<double> scales_;
    FpFlags prep_flags_;
};

struct SeedResult {
    std::vector<std::size_t> indices;
    std::vector<double> centers;  // k x r, point-contiguous
    /// Draws that fell back to uniform sampling because every D^2 weight was
    /// zero or the weight total was not finite.
    std::size_t fallbacks = 0;
};

/// k-means++ seeding: the first center uniformly, the rest with probability
/// proportional to D(p)^2 measured by `engine`. Already chosen points get
/// weight zero, so the k indices are distinct. Throws std::invalid_argument
/// unless 1 <= k <= n.
SeedResult seed_d2(const DistanceEngine& engine, std::size_t k, Rng& rng,
                   PrecisionContext& counters);

struct AssignResult {
    std::vector<int> labels;
    /// Points whose distances were all nonfinite.
    std::vector<std::uint8_t> poisoned;
    std::size_t poisoned_count = 0;
    std::size_t rescued = 0;
    FpFlags flags;
};

/// Nearest center per point, ties to the lowest index. A point with no finite
/// distance is reassigned using `rescue` (a working-precision engine) when
/// given, otherwise it gets label 0.
AssignResult assign(const DistanceEngine& engine, const CenterSet& centers,
                    PrecisionContext& counters, const DistanceEngine* rescue = nullptr,
                    std::size_t threads = 1);

struct UpdateResult {
    std::vector<double> centers;
    std::vector<std::size_t> cardinalities;
    std::size_t empty_clusters = 0;
};

/// Cluster means by sequential summation in point order followed by one
/// division, in double. Empty clusters keep their previous center.
UpdateResult update_centers(const Dataset& data, std::span<const int> labels,
                            std::span<const double> previous, std::size_t k);

/// Frobenius norm of the center movement.
double center_shift(std::span<const double> previous, std::span<const double> next);
/// center_shift <= tol.
bool converged(std::span<const double> previous, std::span<const double> next, double tol);

/// |c - m|^T |c - m| / (2 |c - m|^T |m|) for previous center c and new mean m:
/// the largest unit roundoff for which the update still provably lowers the
/// energy. Empty when c == m; +infinity when the denominator vanishes.
std::optional<double> center_update_precision_bound(std::span<const double> previous,
                                                    std::span<const double> next);

/// (phi(probe, S), phi(mu, S) + |S| ||probe - mu||^2) where phi is the sum of
/// squared distances to the given point and mu the mean of S. S holds
/// point-contiguous vectors of dimension probe.size().
std::pair<double, double> energy_identity_check(std::span<const double> S,
                                                std::span<const double> probe);

double eta(const PrecisionContext& ctx);

struct IterationTrace {
    double sse = 0.0;
    double shift = 0.0;
    /// Per cluster center_update_precision_bound; empty entries did not move.
    std::vector<std::optional<double>> bounds;
    /// Smallest bound over moved clusters, if any moved.
    std::optional<double> min_bound;
};

struct RunWarnings {
    std::size_t seeding_fallbacks = 0;
    std::size_t empty_cluster_events = 0;
    std::size_t poisoned_assignments = 0;
    std::size_t rescued_assignments = 0;
    FpFlags flags;

    bool any() const {
        return seeding_fallbacks + empty_cluster_events + poisoned_assignments + rescued_assignments > 0;
    }
    std::string to_string() const;
};

struct Clustering {
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<double> centers;  // k x dim, point-contiguous
    std::vector<int> labels;
    std::vector<std::size_t> cardinalities;
    std::size_t iterations_run = 0;
    bool converged = false;
    double sse = 0.0;
    double eta = 0.0;
    std::uint64_t evaluations = 0;
    std::uint64_t low_precision_evaluations = 0;
    std::vector<std::size_t> seed_indices;
    std::vector<IterationTrace> trace;
    RunWarnings warnings;
};

/// Seeding, Lloyd iterations until the centers move by at most tol or
/// max_iter is reached, then a final working-precision assignment. eta counts
/// the seeding and iteration distances. Throws std::invalid_argument when the
/// configuration is invalid or k > n.
Clustering fit(const Dataset& data, const KMeansConfig& cfg);

}  // namespace mpkm
