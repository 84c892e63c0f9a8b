#include "mpkm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mpkm/dataset.hpp"

namespace mpkm {
namespace {

std::vector<std::size_t> compact(std::span<const int> labels, std::size_t& k) {
    std::vector<int> uniq(labels.begin(), labels.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    k = uniq.size();
    std::vector<std::size_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out[i] = static_cast<std::size_t>(std::lower_bound(uniq.begin(), uniq.end(), labels[i]) - uniq.begin());
    }
    return out;
}

double comb2(std::int64_t m) { return 0.5 * static_cast<double>(m) * static_cast<double>(m - 1); }

}  // namespace

ContingencyTable::ContingencyTable(std::span<const int> truth, std::span<const int> pred) {
    if (truth.size() != pred.size()) {
        throw std::invalid_argument("contingency table: " + std::to_string(truth.size()) + " true labels vs " +
                                    std::to_string(pred.size()) + " predicted");
    }
    if (truth.empty()) throw std::invalid_argument("contingency table: no labels");
    n_ = truth.size();
    std::size_t kt = 0;
    std::size_t kp = 0;
    const auto t = compact(truth, kt);
    const auto p = compact(pred, kp);
    counts_.assign(kt * kp, 0);
    row_sums_.assign(kt, 0);
    col_sums_.assign(kp, 0);
    for (std::size_t i = 0; i < n_; ++i) {
        ++counts_[t[i] * kp + p[i]];
        ++row_sums_[t[i]];
        ++col_sums_[p[i]];
    }
}

bool ContingencyTable::is_bijective() const {
    if (rows() != cols()) return false;
    for (std::size_t i = 0; i < rows(); ++i) {
        std::size_t nonzero = 0;
        for (std::size_t j = 0; j < cols(); ++j) nonzero += at(i, j) != 0 ? 1 : 0;
        if (nonzero != 1) return false;
    }
    return true;
}

double sse(const Dataset& data, std::span<const int> labels, std::span<const double> centers) {
    if (labels.size() != data.size()) throw std::invalid_argument("sse: one label per point required");
    const std::size_t r = data.dim();
    const std::size_t k = r == 0 ? 0 : centers.size() / r;
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto j = static_cast<std::size_t>(labels[i]);
        if (labels[i] < 0 || j >= k) throw std::invalid_argument("sse: label out of range");
        const auto p = data.point(i);
        for (std::size_t f = 0; f < r; ++f) {
            const double d = p[f] - centers[j * r + f];
            total += d * d;
        }
    }
    return total;
}

double adjusted_rand_index(const ContingencyTable& t) {
    double index = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        for (std::size_t j = 0; j < t.cols(); ++j) index += comb2(t.at(i, j));
    }
    double sum_rows = 0.0;
    double sum_cols = 0.0;
    for (auto a : t.row_sums()) sum_rows += comb2(a);
    for (auto b : t.col_sums()) sum_cols += comb2(b);
    const double total_pairs = comb2(static_cast<std::int64_t>(t.n()));
    const double expected = total_pairs == 0.0 ? 0.0 : sum_rows * sum_cols / total_pairs;
    const double max_index = 0.5 * (sum_rows + sum_cols);
    // Both partitions trivial (one cluster each, or all singletons): agreement
    // is perfect by convention.
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

double adjusted_rand_index(std::span<const int> truth, std::span<const int> pred) {
    return adjusted_rand_index(ContingencyTable(truth, pred));
}

double entropy(std::span<const std::int64_t> counts, std::size_t n) {
    const double dn = static_cast<double>(n);
    double h = 0.0;
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / dn;
        h -= p * std::log(p);
    }
    return h;
}

double mutual_information(const ContingencyTable& t) {
    const double n = static_cast<double>(t.n());
    double mi = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        for (std::size_t j = 0; j < t.cols(); ++j) {
            const auto nij = t.at(i, j);
            if (nij == 0) continue;
            const double a = static_cast<double>(t.row_sums()[i]);
            const double b = static_cast<double>(t.col_sums()[j]);
            const double v = static_cast<double>(nij);
            mi += v / n * (std::log(n * v) - std::log(a * b));
        }
    }
    return std::max(mi, 0.0);
}

double expected_mutual_information(const ContingencyTable& t) {
    const auto n = static_cast<std::int64_t>(t.n());
    const double dn = static_cast<double>(n);
    const double lg_n = std::lgamma(dn + 1.0);
    double emi = 0.0;
    for (auto a : t.row_sums()) {
        for (auto b : t.col_sums()) {
            const std::int64_t lo = std::max<std::int64_t>(1, a + b - n);
            const std::int64_t hi = std::min(a, b);
            const double da = static_cast<double>(a);
            const double db = static_cast<double>(b);
            // log of the constant part of the hypergeometric pmf.
            const double base = std::lgamma(da + 1.0) + std::lgamma(db + 1.0) +
                                std::lgamma(dn - da + 1.0) + std::lgamma(dn - db + 1.0) - lg_n;
            for (std::int64_t nij = lo; nij <= hi; ++nij) {
                const double v = static_cast<double>(nij);
                const double log_p = base - std::lgamma(v + 1.0) - std::lgamma(da - v + 1.0) -
                                     std::lgamma(db - v + 1.0) - std::lgamma(dn - da - db + v + 1.0);
                emi += v / dn * (std::log(dn * v) - std::log(da * db)) * std::exp(log_p);
            }
        }
    }
    return emi;
}

double adjusted_mutual_information(const ContingencyTable& t) {
    if ((t.rows() == 1 && t.cols() == 1) || t.is_bijective()) return 1.0;
    const double mi = mutual_information(t);
    const double emi = expected_mutual_information(t);
    const double h_true = entropy(t.row_sums(), t.n());
    const double h_pred = entropy(t.col_sums(), t.n());
    double denom = 0.5 * (h_true + h_pred) - emi;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    denom = denom < 0.0 ? std::min(denom, -eps) : std::max(denom, eps);
    return (mi - emi) / denom;
}

double adjusted_mutual_information(std::span<const int> truth, std::span<const int> pred) {
    return adjusted_mutual_information(ContingencyTable(truth, pred));
}

HomogeneityCompleteness homogeneity_completeness_v(const ContingencyTable& t) {
    const double n = static_cast<double>(t.n());
    const double h_true = entropy(t.row_sums(), t.n());
    const double h_pred = entropy(t.col_sums(), t.n());
    double h_true_given_pred = 0.0;
    double h_pred_given_true = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        for (std::size_t j = 0; j < t.cols(); ++j) {
            const auto nij = t.at(i, j);
            if (nij == 0) continue;
            const double v = static_cast<double>(nij);
            h_true_given_pred -= v / n * std::log(v / static_cast<double>(t.col_sums()[j]));
            h_pred_given_true -= v / n * std::log(v / static_cast<double>(t.row_sums()[i]));
        }
    }
    HomogeneityCompleteness out;
    out.homogeneity = h_true == 0.0 ? 1.0 : std::clamp(1.0 - h_true_given_pred / h_true, 0.0, 1.0);
    const double completeness = h_pred == 0.0 ? 1.0 : std::clamp(1.0 - h_pred_given_true / h_pred, 0.0, 1.0);
    if (!(t.cols() == 1 && t.rows() > 1)) out.completeness = completeness;
    const double s = out.homogeneity + completeness;
    out.v_measure = s == 0.0 ? 0.0 : 2.0 * out.homogeneity * completeness / s;
    return out;
}

HomogeneityCompleteness homogeneity_completeness_v(std::span<const int> truth, std::span<const int> pred) {
    return homogeneity_completeness_v(ContingencyTable(truth, pred));
}

MetricsReport evaluate(const Dataset& data, std::span<const int> pred, std::span<const double> centers,
                       double eta, std::optional<std::span<const int>> truth) {
    MetricsReport report;
    report.sse = sse(data, pred, centers);
    report.eta = eta;
    if (truth) {
        const ContingencyTable table(*truth, pred);
        report.ari = adjusted_rand_index(table);
        report.ami = adjusted_mutual_information(table);
        const auto hcv = homogeneity_completeness_v(table);
        report.homogeneity = hcv.homogeneity;
        report.completeness = hcv.completeness;
        report.v_measure = hcv.v_measure;
    }
    return report;
}

}  // namespace mpkm
