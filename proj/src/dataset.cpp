#include "labelsift/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

#include "binary_io.hpp"
#include "labelsift/errors.hpp"
#include "labelsift/random.hpp"

namespace labelsift {

// ---------------------------------------------------------------------------
// LabelSet / NoisyDataset

void LabelSet::validate() const {
    if (num_classes < 2) {
        throw std::invalid_argument("LabelSet: need at least 2 classes");
    }
    const auto in_range = [&](const Labels& labels) {
        return std::all_of(labels.begin(), labels.end(), [&](Label y) { return y < num_classes; });
    };
    if (!in_range(noisy)) {
        throw std::invalid_argument("LabelSet: noisy label out of range");
    }
    if (clean) {
        if (clean->size() != noisy.size()) {
            throw std::invalid_argument("LabelSet: clean/noisy length mismatch");
        }
        if (!in_range(*clean)) {
            throw std::invalid_argument("LabelSet: clean label out of range");
        }
    }
    if (mask) {
        if (mask->size() != noisy.size()) {
            throw std::invalid_argument("LabelSet: mask/noisy length mismatch");
        }
        for (std::size_t i = 0; i < mask->size(); ++i) {
            if ((*mask)[i] > 1) {
                throw std::invalid_argument("LabelSet: mask entries must be 0 or 1");
            }
            if (clean && ((*mask)[i] == 1) != (noisy[i] != (*clean)[i])) {
                throw std::invalid_argument(fmt::format("LabelSet: mask disagrees with labels at sample {}", i));
            }
        }
    }
}

NoiseMask LabelSet::resolved_mask() const {
    if (mask) {
        return *mask;
    }
    if (!clean) {
        throw std::invalid_argument("LabelSet: no noise mask and no clean labels");
    }
    NoiseMask out(noisy.size());
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        out[i] = noisy[i] != (*clean)[i] ? 1 : 0;
    }
    return out;
}

void NoisyDataset::validate() const {
    labels.validate();
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw std::invalid_argument("NoisyDataset: feature rows do not match label count");
    }
    if (!features.allFinite()) {
        throw std::invalid_argument("NoisyDataset: non-finite feature value");
    }
}

NoisyDataset take_rows(const NoisyDataset& dataset, std::span<const std::size_t> rows) {
    NoisyDataset out;
    out.feature_names = dataset.feature_names;
    out.class_names = dataset.class_names;
    out.labels.num_classes = dataset.labels.num_classes;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), dataset.features.cols());
    out.labels.noisy.reserve(rows.size());
    if (dataset.labels.clean) {
        out.labels.clean.emplace();
    }
    if (dataset.labels.mask) {
        out.labels.mask.emplace();
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = rows[r];
        out.features.row(static_cast<Eigen::Index>(r)) = dataset.features.row(static_cast<Eigen::Index>(src));
        out.labels.noisy.push_back(dataset.labels.noisy.at(src));
        if (dataset.labels.clean) {
            out.labels.clean->push_back((*dataset.labels.clean)[src]);
        }
        if (dataset.labels.mask) {
            out.labels.mask->push_back((*dataset.labels.mask)[src]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

CsvTable parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    const auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    const auto end_record = [&] {
        end_field();
        // A lone empty field is a blank line, not a record.
        if (!(record.size() == 1 && record.front().empty())) {
            records.push_back(std::move(record));
        }
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started && !field.empty()) {
                    throw FormatError(FormatError::Kind::Malformed, "CSV: quote inside unquoted field");
                }
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') {
                    ++i;
                }
                end_record();
                break;
            case '\n':
                end_record();
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) {
        throw FormatError(FormatError::Kind::Malformed, "CSV: unterminated quoted field");
    }
    if (field_started || !field.empty() || !record.empty()) {
        end_record();
    }
    if (records.empty()) {
        throw FormatError(FormatError::Kind::Malformed, "CSV: empty file (header row required)");
    }

    CsvTable table;
    table.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != table.header.size()) {
            throw FormatError(FormatError::Kind::Malformed,
                              fmt::format("CSV: row {} has {} fields, header has {}", r, records[r].size(),
                                          table.header.size()));
        }
        table.rows.push_back(std::move(records[r]));
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(path, "cannot open for reading");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_csv(buffer.str());
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), path.string() + ": " + e.what());
    }
}

namespace {

std::optional<double> parse_number(std::string_view cell) {
    while (!cell.empty() && cell.front() == ' ') {
        cell.remove_prefix(1);
    }
    while (!cell.empty() && cell.back() == ' ') {
        cell.remove_suffix(1);
    }
    if (cell.empty()) {
        return std::nullopt;
    }
    if (cell.front() == '+') {
        cell.remove_prefix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

// Column store used while preprocessing; a column is numeric or categorical.
struct Column {
    std::string name;
    bool numeric = false;
    std::vector<double> values;
    std::vector<std::string> cells;

    [[nodiscard]] std::size_t size() const { return numeric ? values.size() : cells.size(); }
};

void keep_rows(std::vector<Column>& columns, Labels& labels, const std::vector<std::size_t>& rows) {
    for (auto& col : columns) {
        if (col.numeric) {
            std::vector<double> kept;
            kept.reserve(rows.size());
            for (auto r : rows) {
                kept.push_back(col.values[r]);
            }
            col.values = std::move(kept);
        } else {
            std::vector<std::string> kept;
            kept.reserve(rows.size());
            for (auto r : rows) {
                kept.push_back(col.cells[r]);
            }
            col.cells = std::move(kept);
        }
    }
    Labels kept;
    kept.reserve(rows.size());
    for (auto r : rows) {
        kept.push_back(labels[r]);
    }
    labels = std::move(kept);
}

void apply(const preprocess::SampleRows& step, std::vector<Column>& columns, Labels& labels, std::uint64_t seed) {
    if (step.count > labels.size()) {
        throw std::invalid_argument(
            fmt::format("sample_rows: requested {} rows but file has {}", step.count, labels.size()));
    }
    Rng rng(derive_seed(seed, "sample_rows"));
    auto order = permutation(labels.size(), rng);
    order.resize(step.count);
    std::sort(order.begin(), order.end());
    keep_rows(columns, labels, order);
}

void apply(const preprocess::QuantileClip& step, std::vector<Column>& columns) {
    for (auto& col : columns) {
        if (!col.numeric || col.values.empty()) {
            continue;
        }
        auto [lo_q, hi_q] = std::pair{step.lo, step.hi};
        if (auto it = step.overrides.find(col.name); it != step.overrides.end()) {
            std::tie(lo_q, hi_q) = it->second;
        }
        std::vector<double> sorted = col.values;
        std::sort(sorted.begin(), sorted.end());
        const double lo = quantile_linear(sorted, lo_q);
        const double hi = quantile_linear(sorted, hi_q);
        for (auto& v : col.values) {
            v = std::clamp(v, lo, hi);
        }
    }
}

void apply(const preprocess::OneHot& step, std::vector<Column>& columns) {
    std::vector<Column> out;
    for (auto& col : columns) {
        const bool selected =
            step.columns.empty()
                ? !col.numeric
                : std::find(step.columns.begin(), step.columns.end(), col.name) != step.columns.end();
        if (!selected) {
            out.push_back(std::move(col));
            continue;
        }
        std::vector<std::string> cells = col.cells;
        if (col.numeric) {
            cells.clear();
            for (double v : col.values) {
                cells.push_back(fmt::format("{}", v));
            }
        }
        const std::set<std::string> categories(cells.begin(), cells.end());
        for (const auto& category : categories) {
            Column indicator;
            indicator.name = col.name + "=" + category;
            indicator.numeric = true;
            indicator.values.reserve(cells.size());
            for (const auto& cell : cells) {
                indicator.values.push_back(cell == category ? 1.0 : 0.0);
            }
            out.push_back(std::move(indicator));
        }
    }
    for (const auto& name : step.columns) {
        if (std::none_of(columns.begin(), columns.end(), [&](const Column& c) { return c.name == name; })) {
            throw std::invalid_argument("one_hot: unknown column '" + name + "'");
        }
    }
    columns = std::move(out);
}

void apply(const preprocess::DropConstant&, std::vector<Column>& columns) {
    std::erase_if(columns, [](const Column& col) {
        if (col.numeric) {
            return std::adjacent_find(col.values.begin(), col.values.end(), std::not_equal_to<>()) ==
                   col.values.end();
        }
        return std::adjacent_find(col.cells.begin(), col.cells.end(), std::not_equal_to<>()) == col.cells.end();
    });
}

void apply(const preprocess::StandardScale&, std::vector<Column>& columns) {
    for (auto& col : columns) {
        if (!col.numeric || col.values.empty()) {
            continue;
        }
        Eigen::Map<Eigen::VectorXd> v(col.values.data(), static_cast<Eigen::Index>(col.values.size()));
        FeatureMatrix m = v;
        standard_scale(m);
        v = m.col(0);
    }
}

}  // namespace

void PreprocessSpec::validate() const {
    for (const auto& step : steps) {
        if (const auto* clip = std::get_if<preprocess::QuantileClip>(&step)) {
            const auto check = [](double lo, double hi) {
                if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) {
                    throw std::invalid_argument(fmt::format("quantile_clip: need 0 <= lo < hi <= 1, got {} {}", lo, hi));
                }
            };
            check(clip->lo, clip->hi);
            for (const auto& [name, range] : clip->overrides) {
                check(range.first, range.second);
            }
        }
    }
}

double quantile_linear(std::span<const double> sorted, double q) {
    if (sorted.empty()) {
        throw std::invalid_argument("quantile_linear: empty input");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        throw std::invalid_argument("quantile_linear: q outside [0, 1]");
    }
    const double h = static_cast<double>(sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) {
        return sorted.back();
    }
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

void standard_scale(FeatureMatrix& features) {
    const auto n = static_cast<double>(features.rows());
    if (features.rows() == 0) {
        return;
    }
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
        auto col = features.col(c);
        const double mean = col.sum() / n;
        col.array() -= mean;
        const double stdev = std::sqrt(col.squaredNorm() / n);
        // Constant column: centred, left unscaled.
        if (stdev > 0.0) {
            col /= stdev;
        }
    }
}

NoisyDataset load_csv_dataset(const std::filesystem::path& path, const std::string& label_column,
                              const PreprocessSpec& spec, std::uint64_t seed) {
    spec.validate();
    const CsvTable table = read_csv(path);
    if (table.rows.empty()) {
        throw FormatError(FormatError::Kind::Malformed, path.string() + ": no data rows");
    }
    const auto label_it = std::find(table.header.begin(), table.header.end(), label_column);
    if (label_it == table.header.end()) {
        throw std::invalid_argument(path.string() + ": missing label column '" + label_column + "'");
    }
    const auto label_index = static_cast<std::size_t>(label_it - table.header.begin());

    NoisyDataset dataset;
    std::unordered_map<std::string, Label> class_ids;
    Labels labels;
    labels.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        const auto& cell = row[label_index];
        auto [it, inserted] = class_ids.try_emplace(cell, static_cast<Label>(class_ids.size()));
        if (inserted) {
            dataset.class_names.push_back(cell);
        }
        labels.push_back(it->second);
    }

    std::vector<Column> columns;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c == label_index) {
            continue;
        }
        Column col;
        col.name = table.header[c];
        col.numeric = true;
        col.values.reserve(table.rows.size());
        for (const auto& row : table.rows) {
            const auto value = parse_number(row[c]);
            if (!value) {
                col.numeric = false;
                break;
            }
            col.values.push_back(*value);
        }
        if (!col.numeric) {
            col.values.clear();
            col.cells.reserve(table.rows.size());
            for (const auto& row : table.rows) {
                col.cells.push_back(row[c]);
            }
        }
        columns.push_back(std::move(col));
    }

    for (const auto& step : spec.steps) {
        std::visit(
            [&](const auto& s) {
                using Step = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<Step, preprocess::SampleRows>) {
                    apply(s, columns, labels, seed);
                } else {
                    apply(s, columns);
                }
            },
            step);
    }

    for (const auto& col : columns) {
        if (!col.numeric) {
            throw FormatError(FormatError::Kind::Malformed,
                              path.string() + ": non-numeric feature column '" + col.name + "' without one_hot");
        }
    }

    dataset.features.resize(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        dataset.feature_names.push_back(columns[c].name);
        for (std::size_t r = 0; r < labels.size(); ++r) {
            dataset.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = columns[c].values[r];
        }
    }
    dataset.labels.num_classes = class_ids.size();
    dataset.labels.noisy = labels;
    if (dataset.labels.num_classes < 2) {
        throw std::invalid_argument(path.string() + ": label column has fewer than 2 classes");
    }
    return dataset;
}

// ---------------------------------------------------------------------------
// Synthetic blobs

NoisyDataset synth_blobs(std::size_t per_class, std::size_t classes, std::size_t dims, double spread,
                         std::uint64_t seed) {
    if (per_class == 0 || classes < 2 || dims == 0 || !(spread >= 0.0)) {
        throw std::invalid_argument("synth_blobs: need per_class >= 1, classes >= 2, dims >= 1, spread >= 0");
    }
    if (dims + 1 < classes) {
        throw std::invalid_argument("synth_blobs: dims must be at least classes - 1");
    }

    // Regular simplex: centred basis vectors of R^K, rotated into R^(K-1) with
    // an orthonormal (Helmert) basis of the sum-zero subspace.
    const auto k = static_cast<Eigen::Index>(classes);
    Eigen::MatrixXd helmert = Eigen::MatrixXd::Zero(k, k - 1);
    for (Eigen::Index j = 1; j < k; ++j) {
        const double norm = std::sqrt(static_cast<double>(j * (j + 1)));
        for (Eigen::Index i = 0; i < j; ++i) {
            helmert(i, j - 1) = 1.0 / norm;
        }
        helmert(j, j - 1) = -static_cast<double>(j) / norm;
    }
    Eigen::MatrixXd centred = Eigen::MatrixXd::Identity(k, k).array() - 1.0 / static_cast<double>(classes);
    Eigen::MatrixXd vertices = centred * helmert;  // K x (K-1), each row at radius sqrt((K-1)/K)
    vertices *= 3.0 / std::sqrt(static_cast<double>(classes - 1) / static_cast<double>(classes));

    NoisyDataset dataset;
    const auto n = per_class * classes;
    dataset.features = FeatureMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
    dataset.labels.num_classes = classes;
    Rng rng(seed);
    for (std::size_t c = 0; c < classes; ++c) {
        dataset.class_names.push_back(fmt::format("blob{}", c));
    }
    for (std::size_t d = 0; d < dims; ++d) {
        dataset.feature_names.push_back(fmt::format("x{}", d));
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = i % classes;
        const auto row = static_cast<Eigen::Index>(i);
        for (Eigen::Index d = 0; d < static_cast<Eigen::Index>(dims); ++d) {
            const double centre = d < k - 1 ? vertices(static_cast<Eigen::Index>(c), d) : 0.0;
            dataset.features(row, d) = centre + spread * rng.normal();
        }
        dataset.labels.noisy.push_back(static_cast<Label>(c));
    }
    dataset.labels.clean = dataset.labels.noisy;
    dataset.labels.mask = NoiseMask(n, 0);
    return dataset;
}

// ---------------------------------------------------------------------------
// Feature CSV

void write_features_csv(const FeatureMatrix& features, std::span<const std::string> names,
                        const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(path, "cannot open for writing");
    }
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
        if (c > 0) {
            out << ',';
        }
        const auto idx = static_cast<std::size_t>(c);
        std::string name = idx < names.size() ? names[idx] : fmt::format("x{}", c);
        if (name.find_first_of(",\"\n\r") != std::string::npos) {
            std::string quoted = "\"";
            for (char ch : name) {
                quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
            }
            name = quoted + "\"";
        }
        out << name;
    }
    out << '\n';
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
        for (Eigen::Index c = 0; c < features.cols(); ++c) {
            if (c > 0) {
                out << ',';
            }
            out << fmt::format("{}", features(r, c));
        }
        out << '\n';
    }
    if (!out) {
        throw IoError(path, "write failed");
    }
}

FeatureMatrix read_features_csv(const std::filesystem::path& path, std::vector<std::string>* names) {
    const CsvTable table = read_csv(path);
    FeatureMatrix features(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(table.header.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            const auto value = parse_number(table.rows[r][c]);
            if (!value) {
                throw FormatError(FormatError::Kind::Malformed,
                                  fmt::format("{}: non-numeric cell at row {}, column '{}'", path.string(), r + 1,
                                              table.header[c]));
            }
            features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = *value;
        }
    }
    if (names != nullptr) {
        *names = table.header;
    }
    return features;
}

// ---------------------------------------------------------------------------
// LLBL

namespace {
constexpr std::string_view kLabelMagic = "LLBL";
constexpr std::uint32_t kLabelVersion = 1;
constexpr std::size_t kLabelHeaderBytes = 20;
constexpr std::uint32_t kFlagClean = 1U;
constexpr std::uint32_t kFlagMask = 2U;
}  // namespace

void write_labels(const LabelSet& labels, const std::filesystem::path& path) {
    labels.validate();
    std::vector<unsigned char> bytes;
    bytes.insert(bytes.end(), kLabelMagic.begin(), kLabelMagic.end());
    detail::put_u32(bytes, kLabelVersion);
    detail::put_u32(bytes, static_cast<std::uint32_t>(labels.size()));
    detail::put_u32(bytes, static_cast<std::uint32_t>(labels.num_classes));
    detail::put_u32(bytes, (labels.clean ? kFlagClean : 0U) | (labels.mask ? kFlagMask : 0U));
    for (auto y : labels.noisy) {
        detail::put_u32(bytes, y);
    }
    if (labels.clean) {
        for (auto y : *labels.clean) {
            detail::put_u32(bytes, y);
        }
    }
    if (labels.mask) {
        bytes.insert(bytes.end(), labels.mask->begin(), labels.mask->end());
    }
    detail::write_file(path, bytes);
}

LabelSet read_labels(const std::filesystem::path& path) {
    const auto bytes = detail::read_file(path);
    const std::span<const unsigned char> view(bytes);
    if (!detail::has_magic(view, kLabelMagic)) {
        throw FormatError(FormatError::Kind::BadMagic, path.string() + ": not an LLBL file (bad magic)");
    }
    if (bytes.size() < kLabelHeaderBytes) {
        throw FormatError(FormatError::Kind::TruncatedPayload, path.string() + ": truncated LLBL header");
    }
    const auto version = detail::get_u32(view, 4);
    if (version != kLabelVersion) {
        throw FormatError(FormatError::Kind::UnsupportedVersion,
                          path.string() + ": unsupported LLBL version " + std::to_string(version));
    }
    const std::size_t n = detail::get_u32(view, 8);
    LabelSet labels;
    labels.num_classes = detail::get_u32(view, 12);
    const auto flags = detail::get_u32(view, 16);
    if ((flags & ~(kFlagClean | kFlagMask)) != 0) {
        throw FormatError(FormatError::Kind::Malformed, path.string() + ": unknown LLBL flag bits");
    }
    const bool has_clean = (flags & kFlagClean) != 0;
    const bool has_mask = (flags & kFlagMask) != 0;
    const std::size_t expected = kLabelHeaderBytes + 4 * n + (has_clean ? 4 * n : 0) + (has_mask ? n : 0);
    if (bytes.size() != expected) {
        throw FormatError(FormatError::Kind::TruncatedPayload,
                          fmt::format("{}: LLBL payload is {} bytes, header implies {}", path.string(),
                                      bytes.size(), expected));
    }
    std::size_t offset = kLabelHeaderBytes;
    labels.noisy.resize(n);
    for (auto& y : labels.noisy) {
        y = detail::get_u32(view, offset);
        offset += 4;
    }
    if (has_clean) {
        labels.clean.emplace(n);
        for (auto& y : *labels.clean) {
            y = detail::get_u32(view, offset);
            offset += 4;
        }
    }
    if (has_mask) {
        labels.mask.emplace(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
    }
    try {
        labels.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(FormatError::Kind::Malformed, path.string() + ": " + e.what());
    }
    return labels;
}

}  // namespace labelsift
