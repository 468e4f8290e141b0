#include "labelsift/noise.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "labelsift/errors.hpp"
#include "labelsift/random.hpp"

namespace labelsift {

std::string_view to_string(NoiseKind kind) noexcept {
    return kind == NoiseKind::Symmetric ? "symmetric" : "pairflip";
}

NoiseKind parse_noise_kind(std::string_view name) {
    if (name == "symmetric") {
        return NoiseKind::Symmetric;
    }
    if (name == "pairflip") {
        return NoiseKind::Pairflip;
    }
    throw std::invalid_argument("unknown noise kind '" + std::string(name) + "' (expected symmetric or pairflip)");
}

void NoiseSpec::validate() const {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw std::invalid_argument(fmt::format("noise rate must be in [0, 1), got {}", rate));
    }
}

LabelSet inject_noise(const LabelSet& labels, const NoiseSpec& spec) {
    spec.validate();
    if (labels.num_classes < 2) {
        throw std::invalid_argument("inject_noise: need at least 2 classes");
    }
    const Labels clean = labels.clean.value_or(labels.noisy);
    const auto k = static_cast<Label>(labels.num_classes);
    LabelSet out;
    out.num_classes = labels.num_classes;
    out.noisy = clean;
    Rng rng(spec.seed);
    for (std::size_t i = 0; i < clean.size(); ++i) {
        if (rng.uniform() >= spec.rate) {
            continue;
        }
        const Label y = clean[i];
        if (spec.kind == NoiseKind::Pairflip) {
            out.noisy[i] = (y + 1) % k;
        } else {
            const auto r = static_cast<Label>(rng.below(k - 1));
            out.noisy[i] = r < y ? r : r + 1;
        }
    }
    out.mask = noise_mask(clean, out.noisy);
    out.clean = clean;
    return out;
}

NoisyDataset inject_noise(const NoisyDataset& dataset, const NoiseSpec& spec) {
    NoisyDataset out = dataset;
    out.labels = inject_noise(dataset.labels, spec);
    return out;
}

double noise_rate(std::span<const std::uint8_t> mask) {
    if (mask.empty()) {
        return 0.0;
    }
    const auto positives = static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
    return static_cast<double>(positives) / static_cast<double>(mask.size());
}

NoiseMask noise_mask(std::span<const Label> clean, std::span<const Label> noisy) {
    if (clean.size() != noisy.size()) {
        throw std::invalid_argument("noise_mask: clean and noisy label lengths differ");
    }
    NoiseMask mask(clean.size());
    for (std::size_t i = 0; i < clean.size(); ++i) {
        mask[i] = clean[i] != noisy[i] ? 1 : 0;
    }
    return mask;
}

std::size_t ContingencyMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

ContingencyMatrix contingency(const LabelSet& labels) {
    if (!labels.clean) {
        throw std::invalid_argument("contingency: clean labels required");
    }
    labels.validate();
    ContingencyMatrix m;
    m.classes = labels.num_classes;
    m.counts.assign(m.classes * m.classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ++m.counts[(*labels.clean)[i] * m.classes + labels.noisy[i]];
    }
    return m;
}

void write_contingency_csv(const ContingencyMatrix& matrix, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(path, "cannot open for writing");
    }
    out << "clean\\noisy";
    for (std::size_t j = 0; j < matrix.classes; ++j) {
        out << ',' << j;
    }
    out << '\n';
    for (std::size_t i = 0; i < matrix.classes; ++i) {
        out << i;
        for (std::size_t j = 0; j < matrix.classes; ++j) {
            out << ',' << matrix.at(i, j);
        }
        out << '\n';
    }
    if (!out) {
        throw IoError(path, "write failed");
    }
}

}  // namespace labelsift
