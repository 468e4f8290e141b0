#include "labelsift/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "labelsift/errors.hpp"
#include "labelsift/random.hpp"

namespace labelsift {

void EpochWindow::validate(std::size_t epochs) const {
    if (!(start < end && end <= epochs)) {
        throw std::invalid_argument(
            fmt::format("invalid epoch window [{}, {}) for {} epochs (need start < end <= epochs)", start, end, epochs));
    }
}

void MlpConfig::validate() const {
    if (epochs == 0) {
        throw std::invalid_argument("MlpConfig: epochs must be >= 1");
    }
    if (batch_size == 0) {
        throw std::invalid_argument("MlpConfig: batch_size must be >= 1");
    }
    if (!(lr >= 0.0)) {
        throw std::invalid_argument("MlpConfig: lr must be >= 0");
    }
    if (!(weight_decay >= 0.0)) {
        throw std::invalid_argument("MlpConfig: weight_decay must be >= 0");
    }
    if (lr_milestones.size() != lr_multipliers.size()) {
        throw std::invalid_argument("MlpConfig: lr_milestones and lr_multipliers differ in length");
    }
    if (!std::is_sorted(lr_milestones.begin(), lr_milestones.end())) {
        throw std::invalid_argument("MlpConfig: lr_milestones must be ascending");
    }
    for (auto h : hidden) {
        if (h == 0) {
            throw std::invalid_argument("MlpConfig: hidden widths must be positive");
        }
    }
}

double MlpConfig::lr_at(std::size_t epoch) const {
    double multiplier = 1.0;
    for (std::size_t j = 0; j < lr_milestones.size(); ++j) {
        if (epoch >= lr_milestones[j]) {
            multiplier = lr_multipliers[j];
        }
    }
    return lr * multiplier;
}

namespace {

std::vector<std::size_t> layer_widths(std::size_t input, const std::vector<std::size_t>& hidden, std::size_t output) {
    std::vector<std::size_t> widths{input};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(output);
    return widths;
}

class Optimizer {
public:
    Optimizer(const MlpConfig& config, std::size_t size)
        : config_(config),
          first_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
          second_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))) {}

    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
        ++steps_;
        Eigen::VectorXd update;
        if (config_.optimizer == OptimizerKind::Adam) {
            first_ = config_.beta1 * first_ + (1.0 - config_.beta1) * grad;
            second_ = config_.beta2 * second_ + (1.0 - config_.beta2) * grad.cwiseAbs2();
            const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
            const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
            update = (first_ / c1).array() / ((second_ / c2).array().sqrt() + config_.eps);
        } else {
            first_ = steps_ == 1 ? grad : Eigen::VectorXd(config_.momentum * first_ + grad);
            update = first_;
        }
        // Decoupled decay: shrink the parameters directly, outside the gradient.
        params -= lr * (update + config_.weight_decay * params);
    }

private:
    const MlpConfig& config_;
    Eigen::VectorXd first_;
    Eigen::VectorXd second_;
    std::size_t steps_ = 0;
};

bool all_finite(std::span<const float> values) {
    return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
}

}  // namespace

TrainRun train(const NoisyDataset& dataset, const MlpConfig& config, const TrainOptions& options) {
    config.validate();
    dataset.validate();
    const std::size_t n = dataset.size();
    const std::size_t k = dataset.num_classes();
    const std::size_t epochs = config.epochs;

    TrainRun run;
    run.epochs = epochs;
    run.samples = n;
    run.classes = k;
    run.swa_window = options.swa_window.value_or(EpochWindow::full(epochs));
    run.swa_window.validate(epochs);
    if (options.keep_trajectory) {
        run.trajectory = LogitTrajectory(epochs, n, k);
    }

    MlpParams params = MlpParams::he_uniform(layer_widths(static_cast<std::size_t>(dataset.features.cols()),
                                                         config.hidden, k),
                                             derive_seed(config.seed, "init"));
    Optimizer optimizer(config, params.size());
    Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
    MlpParams swa_sum(params.widths());
    std::size_t swa_count = 0;

    std::vector<float> captured(n * k);
    FeatureMatrix batch_x;
    Labels batch_y;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        const double lr = config.lr_at(epoch);
        const auto order = permutation(n, shuffle_rng);
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
            const std::size_t end = std::min(n, begin + config.batch_size);
            const auto rows = static_cast<Eigen::Index>(end - begin);
            batch_x.resize(rows, dataset.features.cols());
            batch_y.resize(end - begin);
            for (std::size_t b = begin; b < end; ++b) {
                batch_x.row(static_cast<Eigen::Index>(b - begin)) =
                    dataset.features.row(static_cast<Eigen::Index>(order[b]));
                batch_y[b - begin] = dataset.labels.noisy[order[b]];
            }
            auto lg = loss_and_gradient(params, batch_x, batch_y);
            if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) {
                throw DivergenceError(static_cast<int>(epoch));
            }
            loss_sum += lg.loss * static_cast<double>(end - begin);
            if (config.capture == CaptureMode::AtStep) {
                for (std::size_t b = begin; b < end; ++b) {
                    for (std::size_t c = 0; c < k; ++c) {
                        captured[order[b] * k + c] =
                            static_cast<float>(lg.logits(static_cast<Eigen::Index>(b - begin), static_cast<Eigen::Index>(c)));
                    }
                }
            }
            optimizer.step(params.values(), lg.gradient, lr);
        }
        if (!params.values().allFinite()) {
            throw DivergenceError(static_cast<int>(epoch));
        }
        if (config.capture == CaptureMode::EndOfEpoch) {
            const Eigen::MatrixXd logits = predict_logits(params, dataset.features);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t c = 0; c < k; ++c) {
                    captured[i * k + c] = static_cast<float>(logits(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
                }
            }
        }
        if (!all_finite(captured)) {
            throw DivergenceError(static_cast<int>(epoch));
        }
        run.loss_history.push_back(loss_sum / static_cast<double>(n));

        if (epoch >= run.swa_window.start && epoch < run.swa_window.end) {
            swa_sum.values() += params.values();
            ++swa_count;
        }
        if (options.keep_snapshots) {
            run.snapshots.push_back(params);
        }
        if (options.keep_trajectory) {
            std::copy(captured.begin(), captured.end(), run.trajectory.epoch(epoch).begin());
        }
        if (options.observer) {
            options.observer(epoch, captured, params);
        }
    }
    swa_sum.values() /= static_cast<double>(swa_count);
    run.swa_params = std::move(swa_sum);
    run.final_params = std::move(params);
    return run;
}

std::string GradientCheckReport::summary() const {
    return fmt::format("{}: max relative error {:.3e} at parameter {} ({} checked, {} skipped at ReLU kinks, {} total)",
                       passed ? "pass" : "FAIL", max_relative_error, worst_parameter, checked, skipped,
                       parameter_count);
}

namespace {

// Sign pattern of every hidden pre-activation, used to detect kink crossings.
std::vector<bool> relu_pattern(const MlpParams& params, const FeatureMatrix& x) {
    std::vector<bool> pattern;
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l + 1 < params.layers(); ++l) {
        Eigen::MatrixXd z = a * params.weight(l).transpose();
        z.rowwise() += params.bias(l).transpose();
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            pattern.push_back(z.data()[i] > 0.0);
        }
        a = z.cwiseMax(0.0);
    }
    return pattern;
}

}  // namespace

GradientCheckReport loss_gradient_check(const MlpConfig& config, std::size_t input_dim, std::size_t classes,
                                        std::size_t samples, double tolerance) {
    if (input_dim == 0 || classes < 2 || samples == 0) {
        throw std::invalid_argument("loss_gradient_check: need input_dim >= 1, classes >= 2, samples >= 1");
    }
    Rng rng(derive_seed(config.seed, "gradient_check"));
    MlpParams params = MlpParams::he_uniform(layer_widths(input_dim, config.hidden, classes), derive_seed(config.seed, "init"));
    if (params.size() > 100) {
        throw std::invalid_argument(
            fmt::format("loss_gradient_check: network has {} parameters, limit is 100", params.size()));
    }
    for (std::size_t l = 0; l < params.layers(); ++l) {
        auto b = params.bias(l);
        for (Eigen::Index i = 0; i < b.size(); ++i) {
            b(i) = rng.uniform(-0.1, 0.1);
        }
    }
    FeatureMatrix x(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(input_dim));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x.data()[i] = rng.normal();
    }
    Labels y(samples);
    for (auto& label : y) {
        label = static_cast<Label>(rng.below(classes));
    }

    constexpr double h = 1e-5;
    const auto analytic = loss_and_gradient(params, x, y).gradient;
    const auto base_pattern = relu_pattern(params, x);

    GradientCheckReport report;
    report.parameter_count = params.size();
    for (std::size_t p = 0; p < params.size(); ++p) {
        const auto idx = static_cast<Eigen::Index>(p);
        const double original = params.values()(idx);
        params.values()(idx) = original + h;
        const double plus = loss_and_gradient(params, x, y).loss;
        const bool plus_same = relu_pattern(params, x) == base_pattern;
        params.values()(idx) = original - h;
        const double minus = loss_and_gradient(params, x, y).loss;
        const bool minus_same = relu_pattern(params, x) == base_pattern;
        params.values()(idx) = original;
        if (!plus_same || !minus_same) {
            ++report.skipped;
            continue;
        }
        const double numeric = (plus - minus) / (2.0 * h);
        const double a = analytic(idx);
        const double scale = std::max(std::abs(a), std::abs(numeric));
        // Below this magnitude a relative error only measures finite-difference noise.
        const double error = scale < 1e-7 ? std::abs(a - numeric) : std::abs(a - numeric) / scale;
        ++report.checked;
        if (report.checked == 1 || error > report.max_relative_error) {
            report.max_relative_error = error;
            report.worst_parameter = p;
        }
    }
    report.passed = report.max_relative_error <= tolerance;
    return report;
}

}  // namespace labelsift
