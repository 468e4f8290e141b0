#include "labelsift/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"
#include "labelsift/errors.hpp"

namespace labelsift {
namespace {

constexpr std::string_view kMagic = "LTRJ";
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kDtypeF32 = 0;

void check_extents(std::size_t epochs, std::size_t samples, std::size_t classes) {
    if (epochs == 0 || samples == 0 || classes < 2) {
        throw std::invalid_argument("LogitTrajectory: need epochs >= 1, samples >= 1, classes >= 2");
    }
}

}  // namespace

LogitTrajectory::LogitTrajectory(std::size_t epochs, std::size_t samples, std::size_t classes)
    : epochs_(epochs), samples_(samples), classes_(classes) {
    check_extents(epochs, samples, classes);
    values_.assign(epochs * samples * classes, 0.0F);
}

LogitTrajectory::LogitTrajectory(std::size_t epochs, std::size_t samples, std::size_t classes,
                                 std::vector<float> values)
    : epochs_(epochs), samples_(samples), classes_(classes), values_(std::move(values)) {
    check_extents(epochs, samples, classes);
    if (values_.size() != epochs * samples * classes) {
        throw std::invalid_argument("LogitTrajectory: value count does not match extents");
    }
    if (!all_finite()) {
        throw std::invalid_argument("LogitTrajectory: non-finite logit");
    }
}

std::span<const float> LogitTrajectory::epoch(std::size_t e) const {
    return std::span<const float>(values_).subspan(e * samples_ * classes_, samples_ * classes_);
}

std::span<float> LogitTrajectory::epoch(std::size_t e) {
    return std::span<float>(values_).subspan(e * samples_ * classes_, samples_ * classes_);
}

std::span<const float> LogitTrajectory::logits(std::size_t e, std::size_t sample) const {
    return std::span<const float>(values_).subspan((e * samples_ + sample) * classes_, classes_);
}

LogitTrajectory LogitTrajectory::select_samples(std::span<const std::size_t> indices) const {
    LogitTrajectory out(epochs_, indices.size(), classes_);
    for (std::size_t e = 0; e < epochs_; ++e) {
        for (std::size_t j = 0; j < indices.size(); ++j) {
            const auto src = logits(e, indices[j]);
            std::copy(src.begin(), src.end(), out.values_.begin() +
                                                  static_cast<std::ptrdiff_t>((e * indices.size() + j) * classes_));
        }
    }
    return out;
}

bool LogitTrajectory::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v); });
}

void write_trajectory(const LogitTrajectory& trajectory, const std::filesystem::path& path) {
    if (trajectory.empty()) {
        throw std::invalid_argument("write_trajectory: empty trajectory");
    }
    std::vector<unsigned char> bytes;
    bytes.reserve(kLtrjHeaderBytes + trajectory.values().size() * 4);
    bytes.insert(bytes.end(), kMagic.begin(), kMagic.end());
    detail::put_u32(bytes, kVersion);
    detail::put_u32(bytes, static_cast<std::uint32_t>(trajectory.epochs()));
    detail::put_u32(bytes, static_cast<std::uint32_t>(trajectory.samples()));
    detail::put_u32(bytes, static_cast<std::uint32_t>(trajectory.classes()));
    detail::put_u32(bytes, kDtypeF32);
    detail::put_u32(bytes, 0);
    for (float v : trajectory.values()) {
        detail::put_f32(bytes, v);
    }
    detail::write_file(path, bytes);
}

LogitTrajectory read_trajectory(const std::filesystem::path& path) {
    const auto bytes = detail::read_file(path);
    const std::span<const unsigned char> view(bytes);
    if (!detail::has_magic(view, kMagic)) {
        throw FormatError(FormatError::Kind::BadMagic, path.string() + ": not an LTRJ file (bad magic)");
    }
    if (bytes.size() < kLtrjHeaderBytes) {
        throw FormatError(FormatError::Kind::TruncatedPayload, path.string() + ": truncated LTRJ header");
    }
    const auto version = detail::get_u32(view, 4);
    if (version != kVersion) {
        throw FormatError(FormatError::Kind::UnsupportedVersion,
                          path.string() + ": unsupported LTRJ version " + std::to_string(version));
    }
    const std::size_t epochs = detail::get_u32(view, 8);
    const std::size_t samples = detail::get_u32(view, 12);
    const std::size_t classes = detail::get_u32(view, 16);
    const auto dtype = detail::get_u32(view, 20);
    if (dtype != kDtypeF32) {
        throw FormatError(FormatError::Kind::UnsupportedVersion,
                          path.string() + ": unsupported LTRJ dtype " + std::to_string(dtype));
    }
    if (epochs == 0 || samples == 0 || classes < 2) {
        throw FormatError(FormatError::Kind::Malformed, path.string() + ": invalid LTRJ extents");
    }
    const std::size_t count = epochs * samples * classes;
    if (bytes.size() - kLtrjHeaderBytes != count * 4) {
        throw FormatError(FormatError::Kind::TruncatedPayload,
                          path.string() + ": payload has " + std::to_string(bytes.size() - kLtrjHeaderBytes) +
                              " bytes, header declares " + std::to_string(count * 4));
    }
    std::vector<float> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        values[i] = detail::get_f32(view, kLtrjHeaderBytes + 4 * i);
    }
    for (float v : values) {
        if (!std::isfinite(v)) {
            throw FormatError(FormatError::Kind::Malformed, path.string() + ": non-finite logit in payload");
        }
    }
    return LogitTrajectory(epochs, samples, classes, std::move(values));
}

}  // namespace labelsift
