#pragma once
// Point sets: storage, z-score normalization, synthetic blobs and CSV I/O.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpkm {

/// Per-feature mean and population standard deviation removed by
/// zscore_normalize.
struct NormParams {
    std::vector<double> mean;
    std::vector<double> stddev;
};

/// n points of dimension r, stored point-contiguous (the r x n matrix in
/// column-major order). Entries are finite; labels, when present, hold one
/// ground-truth class per point.
class Dataset {
public:
    Dataset() = default;
    /// Throws std::invalid_argument if values.size() is not a multiple of dim,
    /// an entry is not finite, or labels has the wrong length.
    Dataset(std::size_t dim, std::vector<double> values,
            std::optional<std::vector<int>> labels = std::nullopt);

    std::size_t size() const { return n_; }
    std::size_t dim() const { return r_; }
    bool empty() const { return n_ == 0; }

    std::span<const double> point(std::size_t i) const {
        return {values_.data() + i * r_, r_};
    }
    std::span<const double> values() const { return values_; }

    bool has_labels() const { return labels_.has_value(); }
    const std::optional<std::vector<int>>& labels() const { return labels_; }
    void set_labels(std::vector<int> labels);

    const std::optional<NormParams>& norm_params() const { return norm_; }
    void set_norm_params(NormParams params);

private:
    std::size_t r_ = 0;
    std::size_t n_ = 0;
    std::vector<double> values_;
    std::optional<std::vector<int>> labels_;
    std::optional<NormParams> norm_;
};

/// Raised for malformed input files; the message names the offending
/// row/column where one exists.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per feature: subtract the mean and divide by the population standard
/// deviation. Throws std::invalid_argument naming the first zero-variance
/// feature.
Dataset zscore_normalize(const Dataset& data);

struct BlobsOptions {
    std::size_t n = 2000;
    std::size_t k_true = 10;
    std::size_t dim = 2;
    double sigma = 1.0;
    std::uint64_t seed = 0;
    /// Centers are drawn uniformly from [center_low, center_high]^dim.
    double center_low = -10.0;
    double center_high = 10.0;
    /// Minimum pairwise center distance enforced by rejection; negative selects
    /// half of the box width divided by k_true^(1/dim).
    double min_separation = -1.0;
};

/// Isotropic Gaussian clusters; point i belongs to blob i % k_true, so the n
/// points are split as evenly as possible. Ground-truth labels are attached.
/// Throws std::invalid_argument when n < k_true or sigma < 0.
Dataset gaussian_blobs(const BlobsOptions& opts);

/// Centers chosen by gaussian_blobs for the same options (k_true x dim,
/// point-contiguous).
std::vector<double> blob_centers(const BlobsOptions& opts);

enum class HeaderMode { detect, present, absent };

struct CsvOptions {
    char delimiter = ',';
    bool has_labels = false;   // trailing integer label column
    HeaderMode header = HeaderMode::detect;
    bool rows_are_points = true;  // false: each row is a feature, each column a point
};

Dataset read_csv(std::istream& in, const CsvOptions& opts, const std::string& source = "<stream>");
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& opts = {});

/// One point per row, shortest round-trip decimal form, labels (if any) as the
/// last column. No header.
void write_csv(std::ostream& out, const Dataset& data, char delimiter = ',');
void save_csv(const std::filesystem::path& path, const Dataset& data, char delimiter = ',');

/// Pixel rows (R, G, B) divided by `scale`; the scale is kept so cluster
/// centers can be mapped back to pixel values.
struct ImageTable {
    Dataset pixels;
    double scale = 255.0;
};

ImageTable read_image_table(std::istream& in, double scale = 255.0,
                            const std::string& source = "<stream>");
ImageTable flatten_image_table(const std::filesystem::path& path, double scale = 255.0);

/// Segmented image: each pixel replaced by its cluster center, rescaled to
/// pixel units.
std::vector<std::array<double, 3>> reconstruct_pixels(const ImageTable& image,
                                                      std::span<const double> centers,
                                                      std::span<const int> labels);

}  // namespace mpkm
