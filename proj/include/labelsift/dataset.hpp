#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace labelsift {

using Label = std::uint32_t;
using Labels = std::vector<Label>;
/// One byte per sample, 1 = label is noisy.
using NoiseMask = std::vector<std::uint8_t>;
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Observed labels plus whatever ground truth is known about them.
struct LabelSet {
    std::size_t num_classes = 0;
    Labels noisy;
    std::optional<Labels> clean;
    std::optional<NoiseMask> mask;

    [[nodiscard]] std::size_t size() const noexcept { return noisy.size(); }

    /// Throws std::invalid_argument when a label is out of range, lengths
    /// differ, or mask disagrees with (noisy != clean).
    void validate() const;

    /// Mask if present, else derived from clean labels; throws if neither.
    [[nodiscard]] NoiseMask resolved_mask() const;
};

struct NoisyDataset {
    FeatureMatrix features;
    LabelSet labels;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] std::size_t num_classes() const noexcept { return labels.num_classes; }
    void validate() const;
};

/// Rows in the given order; labels, mask and names follow along.
NoisyDataset take_rows(const NoisyDataset& dataset, std::span<const std::size_t> rows);

// ---------------------------------------------------------------------------
// Tabular preprocessing

namespace preprocess {

/// Keep a seeded uniform subset of `count` rows (original order preserved).
struct SampleRows {
    std::size_t count = 0;
};

/// Clip each numeric column to [Q_lo, Q_hi] of its own values.
struct QuantileClip {
    double lo = 0.0;
    double hi = 1.0;
    std::map<std::string, std::pair<double, double>> overrides;
};

struct StandardScale {};

/// Expand categorical columns into 0/1 indicator columns (sorted category
/// order). An empty list means every non-numeric column.
struct OneHot {
    std::vector<std::string> columns;
};

struct DropConstant {};

}  // namespace preprocess

using PreprocessStep = std::variant<preprocess::SampleRows, preprocess::QuantileClip, preprocess::StandardScale,
                                    preprocess::OneHot, preprocess::DropConstant>;

struct PreprocessSpec {
    std::vector<PreprocessStep> steps;

    /// Throws std::invalid_argument for quantiles outside 0 <= lo < hi <= 1.
    void validate() const;
};

/// Linear interpolation between order statistics ("linear" convention).
/// `sorted` must be ascending and non-empty; q in [0, 1].
double quantile_linear(std::span<const double> sorted, double q);

/// In-place standardisation of every column: mean 0, population stdev 1.
/// Constant columns are centred only.
void standard_scale(FeatureMatrix& features);

/// Parse an RFC-4180 CSV (header required), map the label column to
/// contiguous class ids by first appearance, and run the preprocessing
/// steps in order. Throws FormatError / IoError / std::invalid_argument.
NoisyDataset load_csv_dataset(const std::filesystem::path& path, const std::string& label_column,
                              const PreprocessSpec& spec, std::uint64_t seed);

/// Parsed CSV: header plus string cells, row-major.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text);

// ---------------------------------------------------------------------------
// Synthetic data

/// K isotropic Gaussian clusters (stdev `spread`) around the vertices of a
/// regular simplex with circumradius 3. Labels are cluster ids; clean labels
/// equal labels and the mask is all false. Requires dims >= classes - 1.
NoisyDataset synth_blobs(std::size_t per_class, std::size_t classes, std::size_t dims, double spread,
                         std::uint64_t seed);

// ---------------------------------------------------------------------------
// Files

/// Numeric feature matrix as CSV with a header row.
void write_features_csv(const FeatureMatrix& features, std::span<const std::string> names,
                        const std::filesystem::path& path);
FeatureMatrix read_features_csv(const std::filesystem::path& path, std::vector<std::string>* names = nullptr);

/// LLBL label file.
void write_labels(const LabelSet& labels, const std::filesystem::path& path);
LabelSet read_labels(const std::filesystem::path& path);

}  // namespace labelsift
