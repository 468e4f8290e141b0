#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "labelsift/dataset.hpp"

namespace labelsift {

enum class NoiseKind { Symmetric, Pairflip };

std::string_view to_string(NoiseKind kind) noexcept;
NoiseKind parse_noise_kind(std::string_view name);

struct NoiseSpec {
    NoiseKind kind = NoiseKind::Symmetric;
    double rate = 0.0;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument unless rate is in [0, 1).
    void validate() const;
};

/// Flips each label independently with probability spec.rate. Symmetric
/// noise draws the replacement uniformly from the other K-1 classes;
/// pairflip maps y to (y + 1) mod K. The source labels are the clean
/// labels when present, otherwise the observed ones. The result carries
/// clean labels and the mask.
NoisyDataset inject_noise(const NoisyDataset& dataset, const NoiseSpec& spec);
LabelSet inject_noise(const LabelSet& labels, const NoiseSpec& spec);

/// Fraction of true entries.
double noise_rate(std::span<const std::uint8_t> mask);

/// Elementwise clean != noisy. Throws std::invalid_argument on length mismatch.
NoiseMask noise_mask(std::span<const Label> clean, std::span<const Label> noisy);

/// counts[y][y_noisy], row-major K x K.
struct ContingencyMatrix {
    std::size_t classes = 0;
    std::vector<std::size_t> counts;

    [[nodiscard]] std::size_t at(std::size_t clean, std::size_t noisy) const { return counts[clean * classes + noisy]; }
    [[nodiscard]] std::size_t total() const;
};

/// Requires clean labels.
ContingencyMatrix contingency(const LabelSet& labels);

/// K x K CSV; header `clean\noisy,0,1,...`, one row per clean class.
void write_contingency_csv(const ContingencyMatrix& matrix, const std::filesystem::path& path);

}  // namespace labelsift
