#include "mpkm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string_view>

#include "mpkm/rng.hpp"

namespace mpkm {

Dataset::Dataset(std::size_t dim, std::vector<double> values, std::optional<std::vector<int>> labels)
    : r_(dim), values_(std::move(values)) {
    if (dim == 0) {
        if (!values_.empty()) throw std::invalid_argument("Dataset: dimension 0 with nonempty values");
        n_ = 0;
    } else {
        if (values_.size() % dim != 0) {
            throw std::invalid_argument("Dataset: " + std::to_string(values_.size()) +
                                        " values do not form points of dimension " + std::to_string(dim));
        }
        n_ = values_.size() / dim;
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw std::invalid_argument("Dataset: non-finite entry at point " + std::to_string(i / dim) +
                                        ", feature " + std::to_string(i % dim));
        }
    }
    if (labels) set_labels(std::move(*labels));
}

void Dataset::set_labels(std::vector<int> labels) {
    if (labels.size() != n_) {
        throw std::invalid_argument("Dataset: " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(n_) + " points");
    }
    labels_ = std::move(labels);
}

void Dataset::set_norm_params(NormParams params) {
    if (params.mean.size() != r_ || params.stddev.size() != r_) {
        throw std::invalid_argument("Dataset: normalization parameters have the wrong dimension");
    }
    for (double s : params.stddev) {
        if (!(s > 0.0)) throw std::invalid_argument("Dataset: normalization stddev must be positive");
    }
    norm_ = std::move(params);
}

Dataset zscore_normalize(const Dataset& data) {
    const std::size_t n = data.size();
    const std::size_t r = data.dim();
    if (n == 0) throw std::invalid_argument("zscore_normalize: empty dataset");
    NormParams params{std::vector<double>(r, 0.0), std::vector<double>(r, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = data.point(i);
        for (std::size_t f = 0; f < r; ++f) params.mean[f] += p[f];
    }
    for (double& m : params.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = data.point(i);
        for (std::size_t f = 0; f < r; ++f) {
            const double d = p[f] - params.mean[f];
            params.stddev[f] += d * d;
        }
    }
    for (std::size_t f = 0; f < r; ++f) {
        params.stddev[f] = std::sqrt(params.stddev[f] / static_cast<double>(n));
        if (params.stddev[f] == 0.0) {
            throw std::invalid_argument("zscore_normalize: feature " + std::to_string(f) +
                                        " has zero variance");
        }
    }
    std::vector<double> values(n * r);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = data.point(i);
        for (std::size_t f = 0; f < r; ++f) {
            values[i * r + f] = (p[f] - params.mean[f]) / params.stddev[f];
        }
    }
    Dataset out(r, std::move(values), data.labels());
    out.set_norm_params(std::move(params));
    return out;
}

std::vector<double> blob_centers(const BlobsOptions& opts) {
    if (opts.k_true == 0 || opts.dim == 0) {
        throw std::invalid_argument("gaussian_blobs: k_true and dim must be positive");
    }
    if (!(opts.center_high > opts.center_low)) {
        throw std::invalid_argument("gaussian_blobs: empty center box");
    }
    const double width = opts.center_high - opts.center_low;
    const double sep = opts.min_separation >= 0.0
                           ? opts.min_separation
                           : 0.5 * width / std::pow(static_cast<double>(opts.k_true),
                                                    1.0 / static_cast<double>(opts.dim));
    Rng rng(opts.seed, RngStream::blob_centers);
    std::vector<double> centers;
    centers.reserve(opts.k_true * opts.dim);
    std::vector<double> cand(opts.dim);
    constexpr int kMaxTries = 10000;
    for (std::size_t j = 0; j < opts.k_true; ++j) {
        // Rejection sampling; after kMaxTries the best candidate seen is kept.
        std::vector<double> best;
        double best_gap = -1.0;
        for (int attempt = 0; attempt < kMaxTries; ++attempt) {
            for (double& c : cand) c = rng.uniform(opts.center_low, opts.center_high);
            double gap = std::numeric_limits<double>::infinity();
            for (std::size_t q = 0; q < j; ++q) {
                double d2 = 0.0;
                for (std::size_t f = 0; f < opts.dim; ++f) {
                    const double d = cand[f] - centers[q * opts.dim + f];
                    d2 += d * d;
                }
                gap = std::min(gap, std::sqrt(d2));
            }
            if (gap > best_gap) {
                best_gap = gap;
                best = cand;
            }
            if (gap >= sep) break;
        }
        centers.insert(centers.end(), best.begin(), best.end());
    }
    return centers;
}

Dataset gaussian_blobs(const BlobsOptions& opts) {
    if (opts.n < opts.k_true) {
        throw std::invalid_argument("gaussian_blobs: n = " + std::to_string(opts.n) +
                                    " is smaller than k_true = " + std::to_string(opts.k_true));
    }
    if (!(opts.sigma >= 0.0)) throw std::invalid_argument("gaussian_blobs: sigma must be >= 0");
    const std::vector<double> centers = blob_centers(opts);
    Rng rng(opts.seed, RngStream::blob_noise);
    std::vector<double> values(opts.n * opts.dim);
    std::vector<int> labels(opts.n);
    for (std::size_t i = 0; i < opts.n; ++i) {
        const std::size_t j = i % opts.k_true;
        labels[i] = static_cast<int>(j);
        for (std::size_t f = 0; f < opts.dim; ++f) {
            values[i * opts.dim + f] = centers[j * opts.dim + f] + opts.sigma * rng.normal();
        }
    }
    return Dataset(opts.dim, std::move(values), std::move(labels));
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            break;
        }
        cells.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return cells;
}

bool parse_double(std::string_view cell, double& out) {
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc() && ptr == cell.data() + cell.size() && !cell.empty();
}

bool parse_int(std::string_view cell, int& out) {
    double v = 0.0;
    if (!parse_double(cell, v) || v != std::floor(v) || std::fabs(v) > 2147483647.0) return false;
    out = static_cast<int>(v);
    return true;
}

std::string where(const std::string& source, std::size_t row, std::size_t col) {
    return source + ": row " + std::to_string(row) + ", column " + std::to_string(col);
}

void append_shortest(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

}  // namespace

Dataset read_csv(std::istream& in, const CsvOptions& opts, const std::string& source) {
    std::vector<std::vector<std::string_view>> rows;
    std::vector<std::string> lines;
    std::vector<std::size_t> line_numbers;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        lines.push_back(line);
        line_numbers.push_back(lineno);
    }
    if (in.bad()) throw DataError(source + ": read error");
    for (const auto& l : lines) rows.push_back(split(l, opts.delimiter));

    std::size_t first = 0;
    if (!rows.empty()) {
        bool header = opts.header == HeaderMode::present;
        if (opts.header == HeaderMode::detect) {
            double tmp = 0.0;
            header = std::any_of(rows[0].begin(), rows[0].end(),
                                 [&](std::string_view c) { return !parse_double(c, tmp); });
        }
        if (header) first = 1;
    }
    if (first >= rows.size()) throw DataError(source + ": no data rows");

    const std::size_t width = rows[first].size();
    std::vector<std::vector<double>> table;
    table.reserve(rows.size() - first);
    for (std::size_t i = first; i < rows.size(); ++i) {
        if (rows[i].size() != width) {
            throw DataError(source + ": line " + std::to_string(line_numbers[i]) + " has " +
                            std::to_string(rows[i].size()) + " columns, expected " + std::to_string(width));
        }
        std::vector<double> vals(width);
        for (std::size_t c = 0; c < width; ++c) {
            if (!parse_double(rows[i][c], vals[c])) {
                throw DataError(where(source, line_numbers[i], c + 1) + ": not a number: '" +
                                std::string(rows[i][c]) + "'");
            }
            if (!std::isfinite(vals[c])) {
                throw DataError(where(source, line_numbers[i], c + 1) + ": non-finite value");
            }
        }
        table.push_back(std::move(vals));
    }

    std::vector<double> values;
    std::optional<std::vector<int>> labels;
    std::size_t dim = 0;
    if (opts.rows_are_points) {
        dim = opts.has_labels ? width - 1 : width;
        if (dim == 0) throw DataError(source + ": no feature columns");
        values.reserve(table.size() * dim);
        if (opts.has_labels) labels.emplace();
        for (std::size_t i = 0; i < table.size(); ++i) {
            values.insert(values.end(), table[i].begin(), table[i].begin() + static_cast<std::ptrdiff_t>(dim));
            if (opts.has_labels) {
                int lab = 0;
                if (!parse_int(rows[first + i][dim], lab)) {
                    throw DataError(where(source, line_numbers[first + i], dim + 1) + ": label is not an integer");
                }
                labels->push_back(lab);
            }
        }
    } else {
        dim = opts.has_labels ? table.size() - 1 : table.size();
        if (dim == 0) throw DataError(source + ": no feature rows");
        const std::size_t n = width;
        values.resize(n * dim);
        for (std::size_t f = 0; f < dim; ++f) {
            for (std::size_t i = 0; i < n; ++i) values[i * dim + f] = table[f][i];
        }
        if (opts.has_labels) {
            labels.emplace(n);
            for (std::size_t i = 0; i < n; ++i) {
                if (!parse_int(rows[first + dim][i], (*labels)[i])) {
                    throw DataError(where(source, line_numbers[first + dim], i + 1) + ": label is not an integer");
                }
            }
        }
    }
    return Dataset(dim, std::move(values), std::move(labels));
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& opts) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return read_csv(in, opts, path.string());
}

void write_csv(std::ostream& out, const Dataset& data, char delimiter) {
    std::string line;
    for (std::size_t i = 0; i < data.size(); ++i) {
        line.clear();
        const auto p = data.point(i);
        for (std::size_t f = 0; f < p.size(); ++f) {
            if (f > 0) line += delimiter;
            append_shortest(line, p[f]);
        }
        if (data.has_labels()) {
            line += delimiter;
            line += std::to_string((*data.labels())[i]);
        }
        line += '\n';
        out << line;
    }
}

void save_csv(const std::filesystem::path& path, const Dataset& data, char delimiter) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    write_csv(out, data, delimiter);
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

ImageTable read_image_table(std::istream& in, double scale, const std::string& source) {
    if (!(scale > 0.0)) throw std::invalid_argument("image scale must be positive");
    Dataset raw = read_csv(in, CsvOptions{}, source);
    if (raw.dim() != 3) {
        throw DataError(source + ": pixel table must have 3 columns (R, G, B), found " +
                        std::to_string(raw.dim()));
    }
    std::vector<double> values(raw.values().begin(), raw.values().end());
    for (double& v : values) v /= scale;
    return {Dataset(3, std::move(values)), scale};
}

ImageTable flatten_image_table(const std::filesystem::path& path, double scale) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return read_image_table(in, scale, path.string());
}

std::vector<std::array<double, 3>> reconstruct_pixels(const ImageTable& image,
                                                      std::span<const double> centers,
                                                      std::span<const int> labels) {
    if (labels.size() != image.pixels.size()) {
        throw std::invalid_argument("reconstruct_pixels: one label per pixel required");
    }
    const std::size_t k = centers.size() / 3;
    std::vector<std::array<double, 3>> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto j = static_cast<std::size_t>(labels[i]);
        if (labels[i] < 0 || j >= k) throw std::invalid_argument("reconstruct_pixels: label out of range");
        for (std::size_t c = 0; c < 3; ++c) out[i][c] = centers[j * 3 + c] * image.scale;
    }
    return out;
}

}  // namespace mpkm
