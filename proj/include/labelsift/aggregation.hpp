#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "labelsift/agreement.hpp"
#include "labelsift/dataset.hpp"
#include "labelsift/trainer.hpp"
#include "labelsift/trajectory.hpp"

namespace labelsift {

/// Per-sample noise scores, larger = more likely noisy.
struct ScoreVector {
    std::vector<double> scores;
    std::string method_id;

    [[nodiscard]] std::size_t size() const noexcept { return scores.size(); }
};

void write_scores_csv(const ScoreVector& scores, const std::filesystem::path& path);
/// Expects the header `index,score,method_id` and indices 0..N-1 in order.
ScoreVector read_scores_csv(const std::filesystem::path& path);

/// Incremental scorer fed one epoch of logits at a time. The batch
/// aggregate_* functions below are thin loops over these, so streaming a
/// training run through an accumulator gives bit-identical scores to
/// aggregating its stored trajectory.
class TrajectoryAccumulator {
public:
    virtual ~TrajectoryAccumulator() = default;
    /// `logits` holds N x K values of epoch `epoch`. Epochs outside the
    /// accumulator's window are ignored; epochs must arrive in order.
    virtual void observe(std::size_t epoch, std::span<const float> logits) = 0;
    [[nodiscard]] virtual ScoreVector finish() const = 0;
};

enum class Aggregation { Last, Mean, MeanProb };

std::unique_ptr<TrajectoryAccumulator> make_accumulator(Aggregation aggregation, std::span<const Label> labels,
                                                        std::size_t classes, AgreementFn fn, EpochWindow window);

/// L(z at epoch window.end - 1).
ScoreVector aggregate_last(const LogitTrajectory& traj, std::span<const Label> labels, AgreementFn fn,
                           EpochWindow window);
/// Mean of L(z_t) over the window.
ScoreVector aggregate_mean(const LogitTrajectory& traj, std::span<const Label> labels, AgreementFn fn,
                           EpochWindow window);
/// L(log p_bar) with p_bar the window mean of softmax(z_t); p_bar is clamped
/// below at 1e-12 before the log.
ScoreVector aggregate_mean_prob(const LogitTrajectory& traj, std::span<const Label> labels, AgreementFn fn,
                                EpochWindow window);

/// L(logits of the model whose parameters are averaged over the window).
/// Uses run.swa_params when the window matches run.swa_window, otherwise the
/// run's per-epoch snapshots; throws UnsupportedMethod if neither applies.
ScoreVector aggregate_swa(const TrainRun& run, const FeatureMatrix& features, std::span<const Label> labels,
                          AgreementFn fn, EpochWindow window);

/// Agreement values of every sample at every epoch, E x N (column = sample).
Eigen::MatrixXd agreement_matrix(const LogitTrajectory& traj, std::span<const Label> labels, AgreementFn fn);

/// Records the E x N agreement matrix while streaming, for CTRL.
class AgreementRecorder final : public TrajectoryAccumulator {
public:
    AgreementRecorder(std::span<const Label> labels, std::size_t classes, std::size_t epochs, AgreementFn fn);
    void observe(std::size_t epoch, std::span<const float> logits) override;
    /// Not meaningful for a recorder; throws std::logic_error.
    [[nodiscard]] ScoreVector finish() const override;
    [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }

private:
    Labels labels_;
    std::size_t classes_;
    AgreementFn fn_;
    Eigen::MatrixXd matrix_;
};

struct CtrlParams {
    std::size_t num_windows = 4;
    std::size_t clusters = 2;
    std::size_t selected = 1;
    double clip_quantile = 0.99;
    /// Odd width of the centred moving average; 1 disables smoothing.
    std::size_t smooth_width = 3;
    std::uint64_t kmeans_seed = 0;

    /// Throws std::invalid_argument unless W >= 1, 1 <= s < k, E >= W,
    /// clip_quantile in (0, 1], smooth_width odd.
    void validate(std::size_t epochs) const;
};

/// Upper clip of each epoch (row) at its own quantile, then a centred moving
/// average along each sample's trajectory that shrinks at the edges.
Eigen::MatrixXd ctrl_preprocess(const Eigen::MatrixXd& agreement, double clip_quantile, std::size_t smooth_width);

/// Contiguous near-equal split: window w covers [floor(wE/W), floor((w+1)E/W)).
std::vector<EpochWindow> ctrl_windows(std::size_t epochs, std::size_t num_windows);

struct CtrlOutput {
    ScoreVector scores;
    /// One entry per (class, window) where the class was too small for k.
    std::vector<std::string> warnings;
};

/// Clustering and voting on an already preprocessed E x N matrix.
CtrlOutput ctrl_vote(const Eigen::MatrixXd& preprocessed, std::span<const Label> labels, std::size_t classes,
                     const CtrlParams& params);

/// Full CTRL pipeline from an agreement matrix.
CtrlOutput ctrl_from_agreement(const Eigen::MatrixXd& agreement, std::span<const Label> labels, std::size_t classes,
                               const CtrlParams& params);

ScoreVector ctrl_scores(const LogitTrajectory& traj, std::span<const Label> labels, AgreementFn fn,
                        const CtrlParams& params, std::vector<std::string>* warnings = nullptr);

}  // namespace labelsift
