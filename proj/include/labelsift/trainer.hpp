#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labelsift/dataset.hpp"
#include "labelsift/mlp.hpp"
#include "labelsift/trajectory.hpp"

namespace labelsift {

enum class OptimizerKind { Adam, Sgd };
enum class CaptureMode { AtStep, EndOfEpoch };

/// Half-open epoch range [start, end).
struct EpochWindow {
    std::size_t start = 0;
    std::size_t end = 0;

    [[nodiscard]] std::size_t size() const noexcept { return end - start; }
    /// Throws std::invalid_argument unless 0 <= start < end <= epochs.
    void validate(std::size_t epochs) const;
    static EpochWindow full(std::size_t epochs) { return {0, epochs}; }

    friend bool operator==(const EpochWindow&, const EpochWindow&) = default;
};

struct MlpConfig {
    std::vector<std::size_t> hidden{128};
    OptimizerKind optimizer = OptimizerKind::Adam;
    double lr = 1e-3;
    double momentum = 0.9;  // SGD only
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    std::size_t batch_size = 1024;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    CaptureMode capture = CaptureMode::AtStep;
    /// Step schedule: from epoch lr_milestones[j] on, lr is scaled by
    /// lr_multipliers[j]. Empty means constant lr.
    std::vector<std::size_t> lr_milestones;
    std::vector<double> lr_multipliers;

    void validate() const;
    [[nodiscard]] double lr_at(std::size_t epoch) const;
};

/// Receives each epoch's captured logits (N x K, already rounded to float,
/// same values the trajectory stores) and the parameters at the end of that
/// epoch.
using EpochObserver = std::function<void(std::size_t epoch, std::span<const float> logits, const MlpParams& params)>;

struct TrainOptions {
    /// Store the full E x N x K trajectory in the run.
    bool keep_trajectory = true;
    /// Store end-of-epoch parameters for every epoch.
    bool keep_snapshots = false;
    /// Epochs averaged into TrainRun::swa_params; defaults to all epochs.
    std::optional<EpochWindow> swa_window;
    EpochObserver observer;
};

struct TrainRun {
    LogitTrajectory trajectory;
    MlpParams final_params;
    /// Running average of end-of-epoch parameters over swa_window.
    MlpParams swa_params;
    EpochWindow swa_window;
    std::vector<MlpParams> snapshots;
    std::vector<double> loss_history;
    std::size_t epochs = 0;
    std::size_t samples = 0;
    std::size_t classes = 0;
};

/// Mini-batch training of a ReLU MLP on the noisy labels. Bitwise
/// deterministic for a given dataset and config. Throws DivergenceError on a
/// non-finite loss.
TrainRun train(const NoisyDataset& dataset, const MlpConfig& config, const TrainOptions& options = {});

struct GradientCheckReport {
    bool passed = false;
    double max_relative_error = 0.0;
    std::size_t worst_parameter = 0;
    std::size_t checked = 0;
    /// Parameters whose perturbation crosses a ReLU kink.
    std::size_t skipped = 0;
    std::size_t parameter_count = 0;

    [[nodiscard]] std::string summary() const;
};

/// Compares analytic gradients with central differences (h = 1e-5) on a
/// seeded random problem. The network (config.hidden between input_dim and
/// classes) must have at most 100 parameters.
GradientCheckReport loss_gradient_check(const MlpConfig& config, std::size_t input_dim, std::size_t classes,
                                        std::size_t samples, double tolerance = 1e-4);

}  // namespace labelsift
