#include "labelsift/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "labelsift/errors.hpp"
#include "labelsift/kmeans.hpp"
#include "labelsift/parallel.hpp"
#include "labelsift/random.hpp"

namespace labelsift {
namespace {

constexpr std::size_t kChunk = 512;
constexpr double kProbFloor = 1e-12;

// Calls body(i) for every sample, chunked across threads. Each sample's
// arithmetic is independent, so the result does not depend on thread count.
template <typename Body>
void for_each_sample(std::size_t n, Body&& body) {
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t end = std::min(n, (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i) {
            body(i);
        }
    });
}

std::string method_name(std::string_view aggregation, AgreementFn fn) {
    return fmt::format("{}-{}", aggregation, to_string(fn));
}

void check_labels(std::span<const Label> labels, std::size_t n, std::size_t classes) {
    if (labels.size() != n) {
        throw std::invalid_argument(fmt::format("label count {} does not match {} samples", labels.size(), n));
    }
    for (auto y : labels) {
        if (y >= classes) {
            throw std::invalid_argument("label out of range for trajectory class count");
        }
    }
}

class AccumulatorBase : public TrajectoryAccumulator {
public:
    AccumulatorBase(std::span<const Label> labels, std::size_t classes, AgreementFn fn, EpochWindow window)
        : labels_(labels.begin(), labels.end()), classes_(classes), fn_(fn), window_(window) {
        if (window.start >= window.end) {
            throw std::invalid_argument("aggregation: empty epoch window");
        }
        check_labels(labels, labels.size(), classes);
    }

    void observe(std::size_t epoch, std::span<const float> logits) final {
        if (epoch < window_.start || epoch >= window_.end) {
            return;
        }
        if (logits.size() != labels_.size() * classes_) {
            throw std::invalid_argument("aggregation: epoch logits have the wrong size");
        }
        if (seen_ > 0 && epoch <= last_epoch_) {
            throw std::invalid_argument("aggregation: epochs must be observed in increasing order");
        }
        consume(logits);
        last_epoch_ = epoch;
        ++seen_;
    }

    [[nodiscard]] ScoreVector finish() const final {
        if (seen_ != window_.size()) {
            throw std::logic_error(
                fmt::format("aggregation: window [{}, {}) saw {} epochs", window_.start, window_.end, seen_));
        }
        return produce();
    }

protected:
    virtual void consume(std::span<const float> logits) = 0;
    [[nodiscard]] virtual ScoreVector produce() const = 0;

    [[nodiscard]] std::size_t samples() const noexcept { return labels_.size(); }

    Labels labels_;
    std::size_t classes_;
    AgreementFn fn_;
    EpochWindow window_;
    std::size_t seen_ = 0;
    std::size_t last_epoch_ = 0;
};

class LastAccumulator final : public AccumulatorBase {
public:
    using AccumulatorBase::AccumulatorBase;

protected:
    void consume(std::span<const float> logits) override { last_.assign(logits.begin(), logits.end()); }

    [[nodiscard]] ScoreVector produce() const override {
        ScoreVector out{std::vector<double>(samples()), method_name("last", fn_)};
        for_each_sample(samples(), [&](std::size_t i) {
            std::vector<double> z(last_.begin() + static_cast<std::ptrdiff_t>(i * classes_),
                                  last_.begin() + static_cast<std::ptrdiff_t>((i + 1) * classes_));
            out.scores[i] = agreement(fn_, z, labels_[i]);
        });
        return out;
    }

private:
    std::vector<float> last_;
};

class MeanAccumulator final : public AccumulatorBase {
public:
    MeanAccumulator(std::span<const Label> labels, std::size_t classes, AgreementFn fn, EpochWindow window)
        : AccumulatorBase(labels, classes, fn, window), sums_(labels.size(), 0.0) {}

protected:
    void consume(std::span<const float> logits) override {
        for_each_sample(samples(), [&](std::size_t i) {
            std::vector<double> z(logits.begin() + static_cast<std::ptrdiff_t>(i * classes_),
                                  logits.begin() + static_cast<std::ptrdiff_t>((i + 1) * classes_));
            sums_[i] += agreement(fn_, z, labels_[i]);
        });
    }

    [[nodiscard]] ScoreVector produce() const override {
        ScoreVector out{std::vector<double>(samples()), method_name("mean", fn_)};
        const auto count = static_cast<double>(seen_);
        for (std::size_t i = 0; i < samples(); ++i) {
            out.scores[i] = sums_[i] / count;
        }
        return out;
    }

private:
    std::vector<double> sums_;
};

class MeanProbAccumulator final : public AccumulatorBase {
public:
    MeanProbAccumulator(std::span<const Label> labels, std::size_t classes, AgreementFn fn, EpochWindow window)
        : AccumulatorBase(labels, classes, fn, window), sums_(labels.size() * classes, 0.0) {}

protected:
    void consume(std::span<const float> logits) override {
        for_each_sample(samples(), [&](std::size_t i) {
            std::vector<double> z(logits.begin() + static_cast<std::ptrdiff_t>(i * classes_),
                                  logits.begin() + static_cast<std::ptrdiff_t>((i + 1) * classes_));
            std::vector<double> p(classes_);
            softmax_into(z, p);
            for (std::size_t k = 0; k < classes_; ++k) {
                sums_[i * classes_ + k] += p[k];
            }
        });
    }

    [[nodiscard]] ScoreVector produce() const override {
        ScoreVector out{std::vector<double>(samples()), method_name("mean_prob", fn_)};
        const auto count = static_cast<double>(seen_);
        for_each_sample(samples(), [&](std::size_t i) {
            std::vector<double> z(classes_);
            for (std::size_t k = 0; k < classes_; ++k) {
                z[k] = std::log(std::max(sums_[i * classes_ + k] / count, kProbFloor));
            }
            out.scores[i] = agreement(fn_, z, labels_[i]);
        });
        return out;
    }

private:
    std::vector<double> sums_;
};

ScoreVector run_accumulator(TrajectoryAccumulator& acc, const LogitTrajectory& traj, EpochWindow window) {
    window.validate(traj.epochs());
    for (std::size_t e = window.start; e < window.end; ++e) {
        acc.observe(e, traj.epoch(e));
    }
    return acc.finish();
}

}  // namespace

std::unique_ptr<TrajectoryAccumulator> make_accumulator(Aggregation aggregation, std::span<const Label> labels,
                                                        std::size_t classes, AgreementFn fn, EpochWindow window) {
    switch (aggregation) {
        case Aggregation::Last: {
            // Only the final epoch of the window matters.
            return std::make_unique<LastAccumulator>(labels, classes, fn, EpochWindow{window.end - 1, window.end});
        }
        case Aggregation::Mean:
            return std::make_unique<MeanAccumulator>(labels, classes, fn, window);
        case Aggregation::MeanProb:
            return std::make_unique<MeanProbAccumulator>(labels, classes, fn, window);
    }
    throw std::invalid_argument("unknown aggregation");
}

ScoreVector aggregate_last(const LogitTrajectory& traj, std::span<const Label> labels, AgreementFn fn,
                           EpochWindow window) {
    window.validate(traj.epochs());
    check_labels(labels, traj.samples(), traj.classes());
    auto acc = make_accumulator(Aggregation::Last, labels, traj.classes(), fn, window);
    return run_accumulator(*acc, traj, {window.end - 1, window.end});
}

ScoreVector aggregate_mean(const LogitTrajectory& traj, std::span<const Label> labels, AgreementFn fn,
                           EpochWindow window) {
    window.validate(traj.epochs());
    check_labels(labels, traj.samples(), traj.classes());
    auto acc = make_accumulator(Aggregation::Mean, labels, traj.classes(), fn, window);
    return run_accumulator(*acc, traj, window);
}

ScoreVector aggregate_mean_prob(const LogitTrajectory& traj, std::span<const Label> labels, AgreementFn fn,
                                EpochWindow window) {
    window.validate(traj.epochs());
    check_labels(labels, traj.samples(), traj.classes());
    auto acc = make_accumulator(Aggregation::MeanProb, labels, traj.classes(), fn, window);
    return run_accumulator(*acc, traj, window);
}

ScoreVector aggregate_swa(const TrainRun& run, const FeatureMatrix& features, std::span<const Label> labels,
                          AgreementFn fn, EpochWindow window) {
    window.validate(run.epochs);
    check_labels(labels, static_cast<std::size_t>(features.rows()), run.classes);
    MlpParams averaged;
    if (window == run.swa_window && run.swa_params.size() > 0) {
        averaged = run.swa_params;
    } else if (run.snapshots.size() == run.epochs && run.epochs > 0) {
        // Same summation order as the trainer's running sum.
        averaged = MlpParams(run.snapshots.front().widths());
        for (std::size_t e = window.start; e < window.end; ++e) {
            averaged.values() += run.snapshots[e].values();
        }
        averaged.values() /= static_cast<double>(window.size());
    } else {
        throw UnsupportedMethod(fmt::format(
            "SWA over window [{}, {}) needs per-epoch parameter snapshots or a matching running average",
            window.start, window.end));
    }
    const Eigen::MatrixXd logits = predict_logits(averaged, features);
    ScoreVector out{std::vector<double>(labels.size()), method_name("swa", fn)};
    for_each_sample(labels.size(), [&](std::size_t i) {
        std::vector<double> z(logits.cols());
        for (Eigen::Index k = 0; k < logits.cols(); ++k) {
            z[static_cast<std::size_t>(k)] = logits(static_cast<Eigen::Index>(i), k);
        }
        out.scores[i] = agreement(fn, z, labels[i]);
    });
    return out;
}

// ---------------------------------------------------------------------------
// CTRL

AgreementRecorder::AgreementRecorder(std::span<const Label> labels, std::size_t classes, std::size_t epochs,
                                     AgreementFn fn)
    : labels_(labels.begin(), labels.end()),
      classes_(classes),
      fn_(fn),
      matrix_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(epochs), static_cast<Eigen::Index>(labels.size()))) {
    check_labels(labels, labels.size(), classes);
}

void AgreementRecorder::observe(std::size_t epoch, std::span<const float> logits) {
    if (epoch >= static_cast<std::size_t>(matrix_.rows())) {
        throw std::invalid_argument("AgreementRecorder: epoch out of range");
    }
    if (logits.size() != labels_.size() * classes_) {
        throw std::invalid_argument("AgreementRecorder: epoch logits have the wrong size");
    }
    for_each_sample(labels_.size(), [&](std::size_t i) {
        std::vector<double> z(logits.begin() + static_cast<std::ptrdiff_t>(i * classes_),
                              logits.begin() + static_cast<std::ptrdiff_t>((i + 1) * classes_));
        matrix_(static_cast<Eigen::Index>(epoch), static_cast<Eigen::Index>(i)) = agreement(fn_, z, labels_[i]);
    });
}

ScoreVector AgreementRecorder::finish() const {
    throw std::logic_error("AgreementRecorder has no scores; pass matrix() to ctrl_from_agreement");
}

Eigen::MatrixXd agreement_matrix(const LogitTrajectory& traj, std::span<const Label> labels, AgreementFn fn) {
    check_labels(labels, traj.samples(), traj.classes());
    AgreementRecorder recorder(labels, traj.classes(), traj.epochs(), fn);
    for (std::size_t e = 0; e < traj.epochs(); ++e) {
        recorder.observe(e, traj.epoch(e));
    }
    return recorder.matrix();
}

void CtrlParams::validate(std::size_t epochs) const {
    if (num_windows == 0) {
        throw std::invalid_argument("CTRL: num_windows must be >= 1");
    }
    if (!(selected >= 1 && selected < clusters)) {
        throw std::invalid_argument(
            fmt::format("CTRL: need 1 <= selected < clusters, got selected={} clusters={}", selected, clusters));
    }
    if (epochs < num_windows) {
        throw std::invalid_argument(fmt::format("CTRL: {} epochs cannot form {} windows", epochs, num_windows));
    }
    if (!(clip_quantile > 0.0 && clip_quantile <= 1.0)) {
        throw std::invalid_argument("CTRL: clip_quantile must be in (0, 1]");
    }
    if (smooth_width % 2 == 0) {
        throw std::invalid_argument("CTRL: smooth_width must be odd");
    }
}

Eigen::MatrixXd ctrl_preprocess(const Eigen::MatrixXd& agreement, double clip_quantile, std::size_t smooth_width) {
    const Eigen::Index epochs = agreement.rows();
    const Eigen::Index n = agreement.cols();
    Eigen::MatrixXd clipped = agreement;
    std::vector<double> sorted(static_cast<std::size_t>(n));
    for (Eigen::Index e = 0; e < epochs; ++e) {
        for (Eigen::Index i = 0; i < n; ++i) {
            sorted[static_cast<std::size_t>(i)] = agreement(e, i);
        }
        std::sort(sorted.begin(), sorted.end());
        const double cap = quantile_linear(sorted, clip_quantile);
        for (Eigen::Index i = 0; i < n; ++i) {
            clipped(e, i) = std::min(clipped(e, i), cap);
        }
    }
    const auto half = static_cast<Eigen::Index>(smooth_width / 2);
    if (half == 0) {
        return clipped;
    }
    Eigen::MatrixXd smoothed(epochs, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index e = 0; e < epochs; ++e) {
            const Eigen::Index lo = std::max<Eigen::Index>(0, e - half);
            const Eigen::Index hi = std::min<Eigen::Index>(epochs - 1, e + half);
            double sum = 0.0;
            for (Eigen::Index t = lo; t <= hi; ++t) {
                sum += clipped(t, i);
            }
            smoothed(e, i) = sum / static_cast<double>(hi - lo + 1);
        }
    }
    return smoothed;
}

std::vector<EpochWindow> ctrl_windows(std::size_t epochs, std::size_t num_windows) {
    if (num_windows == 0 || epochs < num_windows) {
        throw std::invalid_argument("ctrl_windows: need 1 <= num_windows <= epochs");
    }
    std::vector<EpochWindow> windows;
    for (std::size_t w = 0; w < num_windows; ++w) {
        windows.push_back({w * epochs / num_windows, (w + 1) * epochs / num_windows});
    }
    return windows;
}

CtrlOutput ctrl_vote(const Eigen::MatrixXd& preprocessed, std::span<const Label> labels, std::size_t classes,
                     const CtrlParams& params) {
    const auto epochs = static_cast<std::size_t>(preprocessed.rows());
    const auto n = static_cast<std::size_t>(preprocessed.cols());
    params.validate(epochs);
    check_labels(labels, n, classes);

    std::vector<std::vector<std::size_t>> members(classes);
    for (std::size_t i = 0; i < n; ++i) {
        members[labels[i]].push_back(i);
    }
    const auto windows = ctrl_windows(epochs, params.num_windows);

    // One task per (class, window); each writes only its own flag slots.
    const std::size_t tasks = classes * windows.size();
    std::vector<std::vector<std::size_t>> flagged(tasks);
    std::vector<std::string> task_warnings(tasks);
    parallel_for(tasks, [&](std::size_t task) {
        const std::size_t c = task / windows.size();
        const std::size_t w = task % windows.size();
        const auto& idx = members[c];
        if (idx.empty()) {
            return;
        }
        const auto [start, end] = windows[w];
        std::size_t k = params.clusters;
        if (idx.size() < k) {
            task_warnings[task] = fmt::format("CTRL: class {} has {} samples (< {} clusters) in window {}; using k={}",
                                              c, idx.size(), params.clusters, w, idx.size());
            k = idx.size();
        }
        const std::size_t s = std::min(params.selected, k - 1);
        if (s == 0) {
            return;
        }
        Eigen::MatrixXd points(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(end - start));
        for (std::size_t r = 0; r < idx.size(); ++r) {
            points.row(static_cast<Eigen::Index>(r)) =
                preprocessed.block(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(idx[r]),
                                   static_cast<Eigen::Index>(end - start), 1)
                    .transpose();
        }
        KMeansOptions options;
        options.clusters = k;
        options.seed = derive_seed(params.kmeans_seed, static_cast<std::uint64_t>(task));
        const auto result = kmeans(points, options);

        std::vector<std::size_t> order(k);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::vector<double> level(k);
        for (std::size_t j = 0; j < k; ++j) {
            level[j] = result.centroids.row(static_cast<Eigen::Index>(j)).mean();
        }
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return level[a] > level[b]; });
        std::vector<bool> high(k, false);
        for (std::size_t j = 0; j < s; ++j) {
            high[order[j]] = true;
        }
        for (std::size_t r = 0; r < idx.size(); ++r) {
            if (high[result.assignment[r]]) {
                flagged[task].push_back(idx[r]);
            }
        }
    });

    CtrlOutput out;
    out.scores.scores.assign(n, 0.0);
    out.scores.method_id = "ctrl";
    std::vector<std::size_t> votes(n, 0);
    for (std::size_t task = 0; task < tasks; ++task) {
        for (auto i : flagged[task]) {
            ++votes[i];
        }
        if (!task_warnings[task].empty()) {
            out.warnings.push_back(std::move(task_warnings[task]));
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        out.scores.scores[i] = static_cast<double>(votes[i]) / static_cast<double>(windows.size());
    }
    return out;
}

CtrlOutput ctrl_from_agreement(const Eigen::MatrixXd& agreement, std::span<const Label> labels, std::size_t classes,
                               const CtrlParams& params) {
    params.validate(static_cast<std::size_t>(agreement.rows()));
    return ctrl_vote(ctrl_preprocess(agreement, params.clip_quantile, params.smooth_width), labels, classes, params);
}

ScoreVector ctrl_scores(const LogitTrajectory& traj, std::span<const Label> labels, AgreementFn fn,
                        const CtrlParams& params, std::vector<std::string>* warnings) {
    params.validate(traj.epochs());
    auto out = ctrl_from_agreement(agreement_matrix(traj, labels, fn), labels, traj.classes(), params);
    out.scores.method_id = method_name("ctrl", fn);
    if (warnings != nullptr) {
        *warnings = std::move(out.warnings);
    }
    return std::move(out.scores);
}

// ---------------------------------------------------------------------------
// Scores CSV

void write_scores_csv(const ScoreVector& scores, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(path, "cannot open for writing");
    }
    out << "index,score,method_id\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out << fmt::format("{},{:.17g},{}\n", i, scores.scores[i], scores.method_id);
    }
    if (!out) {
        throw IoError(path, "write failed");
    }
}

ScoreVector read_scores_csv(const std::filesystem::path& path) {
    const auto table = read_csv(path);
    if (table.header != std::vector<std::string>{"index", "score", "method_id"}) {
        throw FormatError(FormatError::Kind::Malformed, path.string() + ": expected header index,score,method_id");
    }
    ScoreVector out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        std::size_t index = 0;
        double score = 0.0;
        try {
            std::size_t used = 0;
            index = std::stoul(row[0], &used);
            if (used != row[0].size()) {
                throw std::invalid_argument("index");
            }
            score = std::stod(row[1], &used);
            if (used != row[1].size()) {
                throw std::invalid_argument("score");
            }
        } catch (const std::exception&) {
            throw FormatError(FormatError::Kind::Malformed, fmt::format("{}: bad number on row {}", path.string(), r + 1));
        }
        if (index != r) {
            throw FormatError(FormatError::Kind::Malformed,
                              fmt::format("{}: row {} has index {}, expected {}", path.string(), r + 1, index, r));
        }
        if (!std::isfinite(score)) {
            throw FormatError(FormatError::Kind::Malformed, fmt::format("{}: non-finite score on row {}", path.string(), r + 1));
        }
        if (r == 0) {
            out.method_id = row[2];
        }
        out.scores.push_back(score);
    }
    return out;
}

}  // namespace labelsift
