#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace labelsift {

/// Per-epoch, per-sample, per-class logits captured during training.
///
/// Values are stored as 32-bit floats in [epoch][sample][class] row-major
/// order, which is exactly the LTRJ payload layout, so file round-trips are
/// bitwise identities.
class LogitTrajectory {
public:
    LogitTrajectory() = default;

    /// Zero-filled tensor. Throws std::invalid_argument unless
    /// epochs >= 1, samples >= 1, classes >= 2.
    LogitTrajectory(std::size_t epochs, std::size_t samples, std::size_t classes);

    /// Takes ownership of values; size must equal epochs*samples*classes and
    /// every value must be finite.
    LogitTrajectory(std::size_t epochs, std::size_t samples, std::size_t classes, std::vector<float> values);

    [[nodiscard]] std::size_t epochs() const noexcept { return epochs_; }
    [[nodiscard]] std::size_t samples() const noexcept { return samples_; }
    [[nodiscard]] std::size_t classes() const noexcept { return classes_; }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }

    [[nodiscard]] float at(std::size_t epoch, std::size_t sample, std::size_t cls) const {
        return values_[(epoch * samples_ + sample) * classes_ + cls];
    }
    float& at(std::size_t epoch, std::size_t sample, std::size_t cls) {
        return values_[(epoch * samples_ + sample) * classes_ + cls];
    }

    /// All N*K logits of one epoch.
    [[nodiscard]] std::span<const float> epoch(std::size_t e) const;
    std::span<float> epoch(std::size_t e);

    /// The K logits of one sample at one epoch.
    [[nodiscard]] std::span<const float> logits(std::size_t e, std::size_t sample) const;

    [[nodiscard]] std::span<const float> values() const noexcept { return values_; }

    /// Copy restricted to the given sample indices (in the given order).
    [[nodiscard]] LogitTrajectory select_samples(std::span<const std::size_t> indices) const;

    /// True iff every value is finite.
    [[nodiscard]] bool all_finite() const noexcept;

    friend bool operator==(const LogitTrajectory&, const LogitTrajectory&) = default;

private:
    std::size_t epochs_ = 0;
    std::size_t samples_ = 0;
    std::size_t classes_ = 0;
    std::vector<float> values_;
};

/// LTRJ header size in bytes: magic + six u32 fields.
inline constexpr std::size_t kLtrjHeaderBytes = 28;

void write_trajectory(const LogitTrajectory& trajectory, const std::filesystem::path& path);

/// Throws FormatError (BadMagic / UnsupportedVersion / TruncatedPayload /
/// Malformed) or IoError.
LogitTrajectory read_trajectory(const std::filesystem::path& path);

}  // namespace labelsift
