#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "labelsift/aggregation.hpp"
#include "labelsift/confident.hpp"
#include "labelsift/trainer.hpp"

namespace labelsift {

enum class MethodFamily { InSample, OutOfSample };
enum class MethodKind { Last, Mean, MeanProb, Swa, Ctrl, ConfidentCounting, PruneByClass, PruneByNoiseRate };

struct MethodDescriptor {
    std::string id;
    MethodFamily family = MethodFamily::InSample;
    MethodKind kind = MethodKind::Last;
    /// Agreement function actually evaluated. Merged CE/JS ids evaluate CE.
    std::optional<AgreementFn> agreement;
    bool requires_parameters = false;
    bool requires_folds = false;
};

/// The 15 detection methods in declaration order: 12 in-sample ids (CE and
/// JS merged as `ce_js` under Last, Mean-Probability and SWA, where they
/// rank samples identically) followed by the 3 confident-learning variants.
const std::vector<MethodDescriptor>& list_methods();

/// Throws UnsupportedMethod for an unknown id.
const MethodDescriptor& find_method(std::string_view id);

/// Everything a method may need. Pointers are optional; a method whose
/// requirement is missing throws UnsupportedMethod naming it.
struct MethodInputs {
    const LogitTrajectory* trajectory = nullptr;
    std::span<const Label> labels;
    /// SWA: training run with parameters, plus the features to score.
    const TrainRun* run = nullptr;
    const FeatureMatrix* features = nullptr;
    /// Confident learning: either precomputed held-out probabilities or a
    /// dataset and trainer config to produce them.
    const OutOfSampleProbs* oos = nullptr;
    const NoisyDataset* dataset = nullptr;
    const MlpConfig* trainer = nullptr;
    std::size_t folds = 4;
    std::uint64_t seed = 0;
    /// Defaults to every epoch.
    std::optional<EpochWindow> window;
    CtrlParams ctrl;
};

ScoreVector run_method(const MethodDescriptor& method, const MethodInputs& inputs);

}  // namespace labelsift
