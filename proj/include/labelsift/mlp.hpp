#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "labelsift/dataset.hpp"

namespace labelsift {

/// Parameters of a fully connected ReLU network, stored as one flat vector so
/// that optimiser updates and parameter averaging are plain vector algebra.
/// Layer l holds an (out x in) column-major weight block followed by `out`
/// biases.
class MlpParams {
public:
    MlpParams() = default;

    /// Zero parameters for layer widths {input, hidden..., output}.
    explicit MlpParams(std::vector<std::size_t> widths);

    /// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
    static MlpParams he_uniform(std::vector<std::size_t> widths, std::uint64_t seed);

    [[nodiscard]] const std::vector<std::size_t>& widths() const noexcept { return widths_; }
    [[nodiscard]] std::size_t layers() const noexcept { return widths_.empty() ? 0 : widths_.size() - 1; }
    [[nodiscard]] std::size_t input_dim() const { return widths_.front(); }
    [[nodiscard]] std::size_t output_dim() const { return widths_.back(); }
    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }

    [[nodiscard]] Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
    Eigen::Map<Eigen::MatrixXd> weight(std::size_t layer);
    [[nodiscard]] Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;
    Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);

    [[nodiscard]] const Eigen::VectorXd& values() const noexcept { return values_; }
    Eigen::VectorXd& values() noexcept { return values_; }

    friend bool operator==(const MlpParams& a, const MlpParams& b) {
        return a.widths_ == b.widths_ && a.values_.size() == b.values_.size() && a.values_ == b.values_;
    }

private:
    std::vector<std::size_t> widths_;
    std::vector<std::size_t> offsets_;
    Eigen::VectorXd values_;
};

/// Forward pass; rows of the result are per-sample logits.
/// Throws std::invalid_argument when feature columns != input_dim.
Eigen::MatrixXd predict_logits(const MlpParams& params, const FeatureMatrix& features);

/// Mean softmax cross-entropy of the batch and its gradient with respect to
/// every parameter (same flat layout as params.values()).
struct LossGradient {
    double loss = 0.0;
    Eigen::VectorXd gradient;
    /// Logits of the batch as seen by the forward pass.
    Eigen::MatrixXd logits;
};

LossGradient loss_and_gradient(const MlpParams& params, const FeatureMatrix& features, std::span<const Label> labels);

}  // namespace labelsift
