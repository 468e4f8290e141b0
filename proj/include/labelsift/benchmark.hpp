#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "labelsift/aggregation.hpp"
#include "labelsift/dataset.hpp"
#include "labelsift/noise.hpp"
#include "labelsift/trainer.hpp"

namespace labelsift {

struct BenchmarkConfig {
    std::vector<std::string> methods;
    std::vector<std::uint64_t> seeds{0};
    /// Synthetic noise injected per seed (its seed field is ignored and
    /// derived from the run seed). Without it the dataset's own noisy labels
    /// and mask are used.
    std::optional<NoiseSpec> noise;
    MlpConfig trainer;
    CtrlParams ctrl;
    std::size_t folds = 4;
};

struct BenchmarkRun {
    std::string method;
    std::uint64_t seed = 0;
    double eta = 0.0;
    double fnr = 0.0;
};

struct BenchmarkSummary {
    std::string method;
    std::size_t runs = 0;
    /// Fractions, not percentages.
    double mean_fnr = 0.0;
    /// Sample standard deviation / sqrt(runs); 0 for a single run.
    double se_fnr = 0.0;
};

struct BenchmarkResults {
    std::vector<BenchmarkRun> runs;
    std::vector<BenchmarkSummary> summary;

    [[nodiscard]] const BenchmarkSummary& find(const std::string& method) const;
};

/// Per seed: inject noise, train once (all in-sample methods share the run
/// and are scored while streaming its epochs), run k-fold confident learning
/// once if any CL method is requested, and report FNR at the realized noise
/// rate. Every random stream is derived from the run seed by a fixed tag, so
/// adding a method never changes the numbers of another.
BenchmarkResults run_benchmark(const NoisyDataset& dataset, const BenchmarkConfig& config,
                               const std::function<void(const std::string&)>& progress = {});

/// Seed-level sub-streams.
std::uint64_t noise_seed(std::uint64_t run_seed);
std::uint64_t trainer_seed(std::uint64_t run_seed);

/// Header `method,runs,mean_fnr_pct,se_pct`.
void write_results_csv(const BenchmarkResults& results, const std::filesystem::path& path);
/// Header `method,seed,eta,fnr`.
void write_runs_csv(const BenchmarkResults& results, const std::filesystem::path& path);
/// Aligned plain-text table, FNR(eta) in percent as mean +- se.
std::string format_results_table(const BenchmarkResults& results);

}  // namespace labelsift
