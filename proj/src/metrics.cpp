#include "labelsift/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "labelsift/errors.hpp"
#include "labelsift/noise.hpp"

namespace labelsift {
namespace {

void check_scores(std::span<const double> scores) {
    for (double s : scores) {
        if (!std::isfinite(s)) {
            throw std::invalid_argument("scores must be finite");
        }
    }
}

void check_mask(std::span<const double> scores, std::span<const std::uint8_t> mask) {
    if (scores.size() != mask.size()) {
        throw std::invalid_argument(fmt::format("{} scores but {} mask entries", scores.size(), mask.size()));
    }
    if (std::none_of(mask.begin(), mask.end(), [](auto m) { return m != 0; })) {
        throw UndefinedFnr();
    }
}

}  // namespace

std::size_t budget_count(double budget, std::size_t n) {
    if (!(budget >= 0.0 && budget <= 1.0)) {
        throw std::invalid_argument(fmt::format("budget must be in [0, 1], got {}", budget));
    }
    const double raw = budget * static_cast<double>(n);
    const auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
    return std::min(count, n);
}

std::vector<std::size_t> rank_by_score(std::span<const double> scores) {
    check_scores(scores);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
    });
    return order;
}

std::vector<std::size_t> select_at_budget(std::span<const double> scores, double budget) {
    const std::size_t count = budget_count(budget, scores.size());
    auto order = rank_by_score(scores);
    order.resize(count);
    return order;
}

DetectionOutcome fnr_at_budget(std::span<const double> scores, std::span<const std::uint8_t> mask, double budget) {
    check_mask(scores, mask);
    DetectionOutcome out;
    out.budget = budget;
    out.selected = select_at_budget(scores, budget);
    for (auto i : out.selected) {
        (mask[i] != 0 ? out.tp : out.fp) += 1;
    }
    const auto noisy = static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
    out.fn = noisy - out.tp;
    out.tn = scores.size() - noisy - out.fp;
    out.fnr = static_cast<double>(out.fn) / static_cast<double>(out.fn + out.tp);
    return out;
}

FnrCurve fnr_curve(std::span<const double> scores, std::span<const std::uint8_t> mask,
                   std::optional<std::vector<double>> budgets) {
    check_mask(scores, mask);
    const std::size_t n = scores.size();
    if (!budgets) {
        budgets.emplace();
        for (std::size_t k = 0; k <= n; ++k) {
            budgets->push_back(static_cast<double>(k) / static_cast<double>(n));
        }
    }
    if (!std::is_sorted(budgets->begin(), budgets->end()) ||
        std::adjacent_find(budgets->begin(), budgets->end()) != budgets->end()) {
        throw std::invalid_argument("fnr_curve: budgets must be strictly increasing");
    }
    const auto order = rank_by_score(scores);
    // cumulative[k] = noisy samples among the k highest-ranked.
    std::vector<std::size_t> cumulative(n + 1, 0);
    for (std::size_t k = 0; k < n; ++k) {
        cumulative[k + 1] = cumulative[k] + (mask[order[k]] != 0 ? 1 : 0);
    }
    const std::size_t noisy = cumulative[n];
    FnrCurve curve;
    curve.eta = noise_rate(mask);
    for (double b : *budgets) {
        const std::size_t tp = cumulative[budget_count(b, n)];
        curve.points.push_back({b, static_cast<double>(noisy - tp) / static_cast<double>(noisy)});
    }
    return curve;
}

double ideal_fnr(double budget, double eta) {
    if (!(eta > 0.0 && eta <= 1.0)) {
        throw std::invalid_argument("ideal_fnr: eta must be in (0, 1]");
    }
    return budget < eta ? 1.0 - budget / eta : 0.0;
}

ScoreVector encode_binary(std::span<const std::uint8_t> predictions, std::string method_id) {
    ScoreVector out;
    out.method_id = std::move(method_id);
    out.scores.reserve(predictions.size());
    for (auto p : predictions) {
        out.scores.push_back(p != 0 ? 1.0 : 0.0);
    }
    return out;
}

DetectionOutcome fnr_at_reference_op(std::span<const double> scores, std::span<const std::uint8_t> mask,
                                     std::span<const double> reference) {
    if (reference.size() != scores.size()) {
        throw std::invalid_argument("fnr_at_reference_op: reference length differs from scores");
    }
    std::size_t positives = 0;
    for (double r : reference) {
        if (r != 0.0 && r != 1.0) {
            throw std::invalid_argument("fnr_at_reference_op: reference must be binary-encoded (0/1)");
        }
        positives += r == 1.0 ? 1 : 0;
    }
    const double budget = static_cast<double>(positives) / static_cast<double>(scores.size());
    return fnr_at_budget(scores, mask, budget);
}

void write_curve_csv(const FnrCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(path, "cannot open for writing");
    }
    out << "budget,fnr,ideal,random\n";
    for (const auto& p : curve.points) {
        out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", p.budget, p.fnr, ideal_fnr(p.budget, curve.eta),
                           1.0 - p.budget);
    }
    if (!out) {
        throw IoError(path, "write failed");
    }
}

}  // namespace labelsift
