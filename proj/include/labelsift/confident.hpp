#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "labelsift/aggregation.hpp"
#include "labelsift/dataset.hpp"
#include "labelsift/trainer.hpp"

namespace labelsift {

/// Held-out class probabilities: row i comes from a model that never saw
/// sample i during training.
struct OutOfSampleProbs {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> probs;
    std::vector<std::size_t> fold_id;

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(probs.rows()); }
    [[nodiscard]] std::size_t classes() const noexcept { return static_cast<std::size_t>(probs.cols()); }
    /// Rows sum to 1 within 1e-9, fold ids consistent.
    void validate() const;
};

/// Fold assignment stratified by observed label: each class is shuffled and
/// dealt round-robin, continuing across classes. folds == N gives
/// leave-one-out (sample i in fold i). Otherwise every class needs at least
/// `folds` members.
std::vector<std::size_t> stratified_folds(std::span<const Label> labels, std::size_t classes, std::size_t folds,
                                          std::uint64_t seed);

/// Trains one model per fold on the complement and records its final-epoch
/// softmax on the fold. Folds run concurrently; results are merged by fold.
OutOfSampleProbs kfold_out_of_sample(const NoisyDataset& dataset, const MlpConfig& config, std::size_t folds,
                                     std::uint64_t seed);

struct ConfidentJoint {
    std::size_t classes = 0;
    /// counts[observed * K + suggested]
    std::vector<std::size_t> counts;
    /// Per-class thresholds; +inf for a class with no samples.
    std::vector<double> thresholds;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t at(std::size_t observed, std::size_t suggested) const {
        return counts[observed * classes + suggested];
    }
};

ConfidentJoint confident_joint(const OutOfSampleProbs& oos, std::span<const Label> labels);

/// Rows rescaled to the observed class counts, normalised to N, rounded half
/// to even. Row-major K x K.
std::vector<std::size_t> calibrate_joint(const ConfidentJoint& joint, std::span<const Label> labels);

/// 1 where argmax of the held-out probabilities differs from the label.
ScoreVector detect_cc(const OutOfSampleProbs& oos, std::span<const Label> labels);

/// Per class j, flags the n_j lowest self-confidence samples, n_j being the
/// calibrated off-diagonal mass of row j (clamped to the class size).
ScoreVector detect_pbc(const OutOfSampleProbs& oos, std::span<const Label> labels);

/// Per pair (j, k), j != k, flags the m_jk samples labelled j with the
/// largest margin probs[k] - probs[j], skipping samples already flagged.
ScoreVector detect_pbnr(const OutOfSampleProbs& oos, std::span<const Label> labels);

}  // namespace labelsift
