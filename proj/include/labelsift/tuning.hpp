#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "labelsift/aggregation.hpp"

namespace labelsift {

/// Disjoint tuning and evaluation index sets, both ascending. A seeded
/// permutation p of 0..N-1 is drawn once: the tuning set is its first
/// ceil(fraction * N) entries and the evaluation set everything after the
/// first ceil(0.1 * N). For one seed, smaller fractions give subsets of
/// larger ones and every fraction shares the same evaluation set.
struct TuningSplit {
    std::vector<std::size_t> tuning_indices;
    std::vector<std::size_t> eval_indices;
    double fraction = 0.0;
};

/// Throws std::invalid_argument unless 0 < fraction <= 0.1.
TuningSplit make_tuning_split(std::size_t n, double fraction, std::uint64_t seed);

/// Candidate epoch indices: 50 equally spaced, g_j = round(j (E-1) / 49),
/// or every epoch when E < 50.
std::vector<std::size_t> window_grid(std::size_t epochs);

/// FNR of `scores` restricted to `indices`, at budget equal to the noise
/// rate of the mask restricted to the same indices.
double subset_fnr(std::span<const double> scores, std::span<const std::uint8_t> mask,
                  std::span<const std::size_t> indices);

struct WindowSearchResult {
    EpochWindow window;
    double tuning_fnr = 0.0;
    double eval_fnr = 0.0;
    std::size_t candidates = 0;
};

/// Exhaustive search over grid windows [g_a, g_b + 1), a < b, for Mean and
/// MeanProb; Last only searches the end epoch ([g_b, g_b + 1)). Minimises
/// tuning FNR; ties go to the smaller window, then the earlier start. Only
/// mask entries at tuning indices influence the choice.
WindowSearchResult search_window(const LogitTrajectory& traj, std::span<const Label> labels, Aggregation aggregation,
                                 AgreementFn fn, const TuningSplit& split, std::span<const std::uint8_t> mask);

/// Same, over an explicit candidate grid (ascending epoch indices).
WindowSearchResult search_window(const LogitTrajectory& traj, std::span<const Label> labels, Aggregation aggregation,
                                 AgreementFn fn, const TuningSplit& split, std::span<const std::uint8_t> mask,
                                 std::span<const std::size_t> grid);

struct CtrlSearchResult {
    CtrlParams params;
    double tuning_fnr = 0.0;
    double eval_fnr = 0.0;
    std::size_t candidates = 0;
};

/// The 18 valid (W, k, s) triples from {2,4,8} x {2,4,8} x {1,3,7} with s < k,
/// enumerated by ascending W, then k, then s.
std::vector<CtrlParams> ctrl_grid(const CtrlParams& base = {});

/// Evaluates every grid triple; ties keep the earliest in grid order.
/// `base` supplies clip quantile, smoothing width and k-means seed.
CtrlSearchResult search_ctrl(const LogitTrajectory& traj, std::span<const Label> labels, const TuningSplit& split,
                             std::span<const std::uint8_t> mask, AgreementFn fn = AgreementFn::CE,
                             const CtrlParams& base = {});

struct TuningReportRow {
    std::string method;
    std::string param;
    double tuning_fnr = 0.0;
    double eval_fnr = 0.0;
};

/// Header `method,param,tuning_fnr,eval_fnr`.
void write_tuning_report(std::span<const TuningReportRow> rows, const std::filesystem::path& path);

}  // namespace labelsift
