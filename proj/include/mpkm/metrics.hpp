#pragma once
// Clustering quality: SSE plus label-based agreement scores computed from a
// shared contingency table. Entropies use natural logarithms.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mpkm {

class Dataset;

/// Counts of points per (true class, predicted cluster). Label values are
/// compacted to 0..k-1 in increasing order.
class ContingencyTable {
public:
    /// Throws std::invalid_argument on length mismatch or empty input.
    ContingencyTable(std::span<const int> truth, std::span<const int> pred);

    std::size_t rows() const { return row_sums_.size(); }     // true classes
    std::size_t cols() const { return col_sums_.size(); }     // predicted clusters
    std::size_t n() const { return n_; }
    std::int64_t at(std::size_t i, std::size_t j) const { return counts_[i * cols() + j]; }
    std::span<const std::int64_t> row_sums() const { return row_sums_; }
    std::span<const std::int64_t> col_sums() const { return col_sums_; }

    /// True when every class maps to exactly one cluster and vice versa.
    bool is_bijective() const;

private:
    std::size_t n_ = 0;
    std::vector<std::int64_t> counts_;
    std::vector<std::int64_t> row_sums_;
    std::vector<std::int64_t> col_sums_;
};

/// Sum over points of ||p - c_label||^2 in double precision. centers holds k
/// point-contiguous vectors of the dataset's dimension.
double sse(const Dataset& data, std::span<const int> labels, std::span<const double> centers);

double adjusted_rand_index(std::span<const int> truth, std::span<const int> pred);
double adjusted_rand_index(const ContingencyTable& table);

/// Entropy of the marginal distribution given by counts summing to n.
double entropy(std::span<const std::int64_t> counts, std::size_t n);
double mutual_information(const ContingencyTable& table);
/// E[MI] under the hypergeometric (fixed marginals) model.
double expected_mutual_information(const ContingencyTable& table);

/// (MI - E[MI]) / (mean(H(U), H(V)) - E[MI]), arithmetic-mean normalization.
double adjusted_mutual_information(std::span<const int> truth, std::span<const int> pred);
double adjusted_mutual_information(const ContingencyTable& table);

struct HomogeneityCompleteness {
    double homogeneity = 0.0;
    /// Empty when every point landed in one cluster although the truth has
    /// several classes: the raw score is then a meaningless 1.
    std::optional<double> completeness;
    double v_measure = 0.0;
};

HomogeneityCompleteness homogeneity_completeness_v(std::span<const int> truth,
                                                   std::span<const int> pred);
HomogeneityCompleteness homogeneity_completeness_v(const ContingencyTable& table);

struct MetricsReport {
    double sse = 0.0;
    std::optional<double> ari;
    std::optional<double> ami;
    std::optional<double> homogeneity;
    std::optional<double> completeness;
    std::optional<double> v_measure;
    double eta = 0.0;
};

/// SSE and eta always; the label-based scores only when truth is given.
MetricsReport evaluate(const Dataset& data, std::span<const int> pred,
                       std::span<const double> centers, double eta,
                       std::optional<std::span<const int>> truth);

}  // namespace mpkm
