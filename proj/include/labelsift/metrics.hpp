#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "labelsift/aggregation.hpp"

namespace labelsift {

struct DetectionOutcome {
    double budget = 0.0;
    /// Selected indices in rank order (highest score first).
    std::vector<std::size_t> selected;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    double fnr = 0.0;
};

struct CurvePoint {
    double budget = 0.0;
    double fnr = 0.0;
};

struct FnrCurve {
    std::vector<CurvePoint> points;
    /// Realized noise rate of the mask.
    double eta = 0.0;
};

/// Number of samples flagged at budget b: ceil(b * N), guarded against
/// rounding so that b = k/N yields exactly k.
std::size_t budget_count(double budget, std::size_t n);

/// Indices sorted by descending score, ties by ascending index.
std::vector<std::size_t> rank_by_score(std::span<const double> scores);

/// The ceil(bN) highest-ranked indices. Throws std::invalid_argument for a
/// budget outside [0, 1] or non-finite scores.
std::vector<std::size_t> select_at_budget(std::span<const double> scores, double budget);

/// Throws UndefinedFnr when the mask has no noisy entry.
DetectionOutcome fnr_at_budget(std::span<const double> scores, std::span<const std::uint8_t> mask, double budget);

/// Default grid: every achievable budget k/N, k = 0..N.
FnrCurve fnr_curve(std::span<const double> scores, std::span<const std::uint8_t> mask,
                   std::optional<std::vector<double>> budgets = std::nullopt);

/// 1 - b/eta for b < eta, else 0.
double ideal_fnr(double budget, double eta);

ScoreVector encode_binary(std::span<const std::uint8_t> predictions, std::string method_id = "binary");

/// Evaluates `scores` at the budget where the binary `reference` flags its
/// positives: budget = positives / N.
DetectionOutcome fnr_at_reference_op(std::span<const double> scores, std::span<const std::uint8_t> mask,
                                     std::span<const double> reference);

/// Header `budget,fnr,ideal,random`.
void write_curve_csv(const FnrCurve& curve, const std::filesystem::path& path);

}  // namespace labelsift
