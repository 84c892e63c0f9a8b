#pragma once
// Experiment harness: (mode x delta x seed) grids of k-means fits, per-seed
// metrics, per-cell aggregates and table/curve output.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mpkm/dataset.hpp"
#include "mpkm/kmeans.hpp"
#include "mpkm/metrics.hpp"
#include "mpkm/simfloat.hpp"

namespace mpkm {

enum class OutputFormat : std::uint8_t { csv, json };
OutputFormat parse_output_format(std::string_view name);

struct ExperimentSpec {
    std::string dataset;  // echoed into the output; not opened here
    bool normalize = false;
    std::size_t k = 8;
    std::vector<KMeansMode> modes{KMeansMode::working};
    FloatFormat low_format = FloatFormat::fp16();
    FloatFormat work_format = FloatFormat::fp64();
    std::vector<double> deltas{2.0};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::size_t max_iter = 300;
    double tol = 1e-4;
    bool rescue = true;
    /// Cells run concurrently on this many threads (0: hardware concurrency).
    std::size_t threads = 0;

    /// Throws std::invalid_argument on empty seeds/modes/deltas, delta < 1,
    /// duplicate deltas or modes, k == 0, or an invalid k-means setting.
    void validate() const;
};

/// Default delta grid of the trigger-rate sweep.
std::vector<double> default_sweep_deltas();

/// One (mode, delta, seed) fit. delta is empty for working and low modes,
/// whose result does not depend on it.
struct CellResult {
    KMeansMode mode = KMeansMode::working;
    std::optional<double> delta;
    std::uint64_t seed = 0;
    MetricsReport metrics;
    std::size_t iterations = 0;
    bool converged = false;
    RunWarnings warnings;
    std::optional<std::string> error;
    std::vector<int> labels;
    std::vector<double> centers;
};

struct Summary {
    std::optional<double> mean;
    std::optional<double> min;
    std::optional<double> max;
    std::size_t defined = 0;
};

/// Statistics over the seeds of one (mode, delta) group. A metric's summary is
/// empty only when no seed produced a value for it.
struct Aggregate {
    KMeansMode mode = KMeansMode::working;
    std::optional<double> delta;
    std::size_t runs = 0;
    std::size_t failures = 0;
    Summary sse, ari, ami, homogeneity, completeness, v_measure, eta;
};

struct RunRecord {
    ExperimentSpec spec;
    std::vector<CellResult> cells;       // spec order: mode, then delta, then seed
    std::vector<Aggregate> aggregates;   // spec order: mode, then delta
};

/// Label text of a (mode, delta) group, e.g. "working" or "mixed[delta=2]".
std::string group_label(KMeansMode mode, const std::optional<double>& delta);

/// Recomputes the per-group statistics from cells.
std::vector<Aggregate> aggregate(const std::vector<CellResult>& cells);

/// Fits every cell; data is normalized here when spec.normalize is set.
/// Failures of single cells are recorded in the cell, not thrown.
RunRecord run_experiment(const ExperimentSpec& spec, const Dataset& data);

/// One row per (mode, delta) group with the seed means, columns
/// mode, normalized, SSE, ARI, AMI, Homogeneity, Completeness, V-measure, eta.
/// JSON output additionally carries the spec and per-seed runs.
void emit_table(const RunRecord& record, OutputFormat format, std::ostream& out);

/// Long format (delta, seed, metric, value) for the mixed-mode cells.
/// Throws std::invalid_argument if a delta appears twice.
void emit_curves(const RunRecord& record, OutputFormat format, std::ostream& out);

struct DiagnoseReport {
    std::uint64_t seed = 0;
    std::size_t iterations = 0;
    bool converged = false;
    /// Smallest per-cluster center-update bound of each iteration (empty when
    /// no center moved).
    std::vector<std::optional<double>> min_bounds;
    double low_u = 0.0;
    /// Iterations whose bound is below the low format's unit roundoff.
    std::size_t iterations_below_low_u = 0;
    std::size_t kernel_points = 0;
    KernelMatrixDiff kernel_work;
    KernelMatrixDiff kernel_low;
};

/// Working-mode fit on spec.seeds.front() streaming the center-update bound,
/// plus the difference-vs-Gram kernel comparison on the first kernel_sample
/// points in the working and the low format.
DiagnoseReport diagnose(const ExperimentSpec& spec, const Dataset& data, std::size_t kernel_sample = 2000);
void emit_diagnose(const DiagnoseReport& report, OutputFormat format, std::ostream& out);

}  // namespace mpkm
