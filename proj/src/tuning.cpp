#include "labelsift/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "labelsift/errors.hpp"
#include "labelsift/metrics.hpp"
#include "labelsift/random.hpp"

namespace labelsift {
namespace {

constexpr double kProbFloor = 1e-12;

std::size_t ceil_count(double fraction, std::size_t n) {
    const double raw = fraction * static_cast<double>(n);
    return std::min(n, static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw))));
}

// Candidate windows in enumeration order.
std::vector<EpochWindow> candidate_windows(Aggregation aggregation, std::span<const std::size_t> grid) {
    std::vector<EpochWindow> out;
    if (aggregation == Aggregation::Last) {
        for (auto g : grid) {
            out.push_back({g, g + 1});
        }
        return out;
    }
    for (std::size_t a = 0; a < grid.size(); ++a) {
        for (std::size_t b = a + 1; b < grid.size(); ++b) {
            out.push_back({grid[a], grid[b] + 1});
        }
    }
    return out;
}

bool better(double fnr, EpochWindow w, double best_fnr, EpochWindow best) {
    if (fnr != best_fnr) {
        return fnr < best_fnr;
    }
    if (w.size() != best.size()) {
        return w.size() < best.size();
    }
    return w.start < best.start;
}

ScoreVector full_scores(const LogitTrajectory& traj, std::span<const Label> labels, Aggregation aggregation,
                        AgreementFn fn, EpochWindow window) {
    switch (aggregation) {
        case Aggregation::Last:
            return aggregate_last(traj, labels, fn, window);
        case Aggregation::Mean:
            return aggregate_mean(traj, labels, fn, window);
        case Aggregation::MeanProb:
            return aggregate_mean_prob(traj, labels, fn, window);
    }
    throw std::invalid_argument("unknown aggregation");
}

}  // namespace

TuningSplit make_tuning_split(std::size_t n, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 0.1)) {
        throw std::invalid_argument(
            fmt::format("tuning fraction {} would overlap the fixed 90% evaluation region (need 0 < f <= 0.1)", fraction));
    }
    if (n == 0) {
        throw std::invalid_argument("make_tuning_split: empty dataset");
    }
    Rng rng(seed);
    const auto order = permutation(n, rng);
    TuningSplit split;
    split.fraction = fraction;
    const std::size_t tune = std::max<std::size_t>(1, ceil_count(fraction, n));
    const std::size_t reserved = std::max(tune, ceil_count(0.1, n));
    split.tuning_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(tune));
    split.eval_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(reserved), order.end());
    std::sort(split.tuning_indices.begin(), split.tuning_indices.end());
    std::sort(split.eval_indices.begin(), split.eval_indices.end());
    return split;
}

std::vector<std::size_t> window_grid(std::size_t epochs) {
    std::vector<std::size_t> grid;
    if (epochs == 0) {
        return grid;
    }
    if (epochs < 50) {
        for (std::size_t e = 0; e < epochs; ++e) {
            grid.push_back(e);
        }
        return grid;
    }
    for (std::size_t j = 0; j < 50; ++j) {
        grid.push_back(static_cast<std::size_t>(
            std::lround(static_cast<double>(j) * static_cast<double>(epochs - 1) / 49.0)));
    }
    return grid;
}

double subset_fnr(std::span<const double> scores, std::span<const std::uint8_t> mask,
                  std::span<const std::size_t> indices) {
    if (scores.size() != mask.size()) {
        throw std::invalid_argument("subset_fnr: scores and mask differ in length");
    }
    std::vector<double> sub_scores;
    NoiseMask sub_mask;
    sub_scores.reserve(indices.size());
    sub_mask.reserve(indices.size());
    std::size_t noisy = 0;
    for (auto i : indices) {
        sub_scores.push_back(scores[i]);
        sub_mask.push_back(mask[i]);
        noisy += mask[i] != 0 ? 1 : 0;
    }
    const double eta = static_cast<double>(noisy) / static_cast<double>(indices.size());
    return fnr_at_budget(sub_scores, sub_mask, eta).fnr;
}

WindowSearchResult search_window(const LogitTrajectory& traj, std::span<const Label> labels, Aggregation aggregation,
                                 AgreementFn fn, const TuningSplit& split, std::span<const std::uint8_t> mask) {
    const auto grid = window_grid(traj.epochs());
    return search_window(traj, labels, aggregation, fn, split, mask, grid);
}

WindowSearchResult search_window(const LogitTrajectory& traj, std::span<const Label> labels, Aggregation aggregation,
                                 AgreementFn fn, const TuningSplit& split, std::span<const std::uint8_t> mask,
                                 std::span<const std::size_t> grid) {
    const std::size_t n = traj.samples();
    const std::size_t k = traj.classes();
    if (labels.size() != n || mask.size() != n) {
        throw std::invalid_argument("search_window: labels/mask do not match trajectory");
    }
    if (grid.empty() || !std::is_sorted(grid.begin(), grid.end()) || grid.back() >= traj.epochs()) {
        throw std::invalid_argument("search_window: grid must be ascending epoch indices within the trajectory");
    }
    const auto windows = candidate_windows(aggregation, grid);
    if (windows.empty()) {
        throw std::invalid_argument("search_window: grid yields no window (need at least 2 grid points)");
    }
    const auto& tune = split.tuning_indices;
    const std::size_t t = tune.size();
    std::vector<std::size_t> local(t);
    std::iota(local.begin(), local.end(), std::size_t{0});
    NoiseMask tune_mask(t);
    Labels tune_labels(t);
    for (std::size_t r = 0; r < t; ++r) {
        tune_mask[r] = mask[tune[r]];
        tune_labels[r] = labels[tune[r]];
    }

    // Prefix sums over epochs [0, c) at every checkpoint c a window can start
    // or end on. Width per sample: 1 (Mean) or K (MeanProb).
    std::vector<std::size_t> checkpoints;
    for (const auto& w : windows) {
        checkpoints.push_back(w.start);
        checkpoints.push_back(w.end);
    }
    std::sort(checkpoints.begin(), checkpoints.end());
    checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
    std::map<std::size_t, std::size_t> slot;
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        slot[checkpoints[c]] = c;
    }
    const std::size_t width = aggregation == Aggregation::MeanProb ? k : 1;
    std::vector<std::vector<double>> prefix;
    if (aggregation != Aggregation::Last) {
        prefix.assign(checkpoints.size(), std::vector<double>(t * width, 0.0));
        std::vector<double> running(t * width, 0.0);
        std::vector<double> z(k);
        std::vector<double> p(k);
        std::size_t next = 0;
        if (checkpoints[0] == 0) {
            next = 1;
        }
        for (std::size_t e = 0; e < traj.epochs() && next < checkpoints.size(); ++e) {
            for (std::size_t r = 0; r < t; ++r) {
                const auto logits = traj.logits(e, tune[r]);
                std::copy(logits.begin(), logits.end(), z.begin());
                if (aggregation == Aggregation::Mean) {
                    running[r] += agreement(fn, z, tune_labels[r]);
                } else {
                    softmax_into(z, p);
                    for (std::size_t c = 0; c < k; ++c) {
                        running[r * k + c] += p[c];
                    }
                }
            }
            if (e + 1 == checkpoints[next]) {
                prefix[next] = running;
                ++next;
            }
        }
    }

    WindowSearchResult best;
    best.tuning_fnr = std::numeric_limits<double>::infinity();
    best.candidates = windows.size();
    std::vector<double> scores(t);
    std::vector<double> z(k);
    for (const auto& w : windows) {
        if (aggregation == Aggregation::Last) {
            for (std::size_t r = 0; r < t; ++r) {
                const auto logits = traj.logits(w.end - 1, tune[r]);
                std::copy(logits.begin(), logits.end(), z.begin());
                scores[r] = agreement(fn, z, tune_labels[r]);
            }
        } else {
            const auto& hi = prefix[slot.at(w.end)];
            const auto& lo = prefix[slot.at(w.start)];
            const auto len = static_cast<double>(w.size());
            for (std::size_t r = 0; r < t; ++r) {
                if (aggregation == Aggregation::Mean) {
                    scores[r] = (hi[r] - lo[r]) / len;
                } else {
                    for (std::size_t c = 0; c < k; ++c) {
                        z[c] = std::log(std::max((hi[r * k + c] - lo[r * k + c]) / len, kProbFloor));
                    }
                    scores[r] = agreement(fn, z, tune_labels[r]);
                }
            }
        }
        const double fnr = subset_fnr(scores, tune_mask, local);
        if (better(fnr, w, best.tuning_fnr, best.window)) {
            best.tuning_fnr = fnr;
            best.window = w;
        }
    }
    if (!split.eval_indices.empty()) {
        const auto full = full_scores(traj, labels, aggregation, fn, best.window);
        best.eval_fnr = subset_fnr(full.scores, mask, split.eval_indices);
    }
    return best;
}

std::vector<CtrlParams> ctrl_grid(const CtrlParams& base) {
    std::vector<CtrlParams> grid;
    for (std::size_t w : {2, 4, 8}) {
        for (std::size_t k : {2, 4, 8}) {
            for (std::size_t s : {1, 3, 7}) {
                if (s >= k) {
                    continue;
                }
                CtrlParams p = base;
                p.num_windows = w;
                p.clusters = k;
                p.selected = s;
                grid.push_back(p);
            }
        }
    }
    return grid;
}

CtrlSearchResult search_ctrl(const LogitTrajectory& traj, std::span<const Label> labels, const TuningSplit& split,
                             std::span<const std::uint8_t> mask, AgreementFn fn, const CtrlParams& base) {
    if (labels.size() != traj.samples() || mask.size() != traj.samples()) {
        throw std::invalid_argument("search_ctrl: labels/mask do not match trajectory");
    }
    const auto preprocessed =
        ctrl_preprocess(agreement_matrix(traj, labels, fn), base.clip_quantile, base.smooth_width);
    const auto grid = ctrl_grid(base);
    CtrlSearchResult best;
    best.candidates = grid.size();
    best.tuning_fnr = std::numeric_limits<double>::infinity();
    std::vector<double> best_scores;
    for (const auto& params : grid) {
        auto out = ctrl_vote(preprocessed, labels, traj.classes(), params);
        const double fnr = subset_fnr(out.scores.scores, mask, split.tuning_indices);
        if (fnr < best.tuning_fnr) {
            best.tuning_fnr = fnr;
            best.params = params;
            best_scores = std::move(out.scores.scores);
        }
    }
    if (!split.eval_indices.empty()) {
        best.eval_fnr = subset_fnr(best_scores, mask, split.eval_indices);
    }
    return best;
}

void write_tuning_report(std::span<const TuningReportRow> rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(path, "cannot open for writing");
    }
    out << "method,param,tuning_fnr,eval_fnr\n";
    for (const auto& row : rows) {
        out << fmt::format("{},{},{:.17g},{:.17g}\n", row.method, row.param, row.tuning_fnr, row.eval_fnr);
    }
    if (!out) {
        throw IoError(path, "write failed");
    }
}

}  // namespace labelsift
