#include <cmath>

#include <gtest/gtest.h>

#include "labelsift/agreement.hpp"
#include "labelsift/dataset.hpp"
#include "labelsift/errors.hpp"
#include "labelsift/mlp.hpp"
#include "labelsift/random.hpp"
#include "labelsift/run_config.hpp"
#include "labelsift/trainer.hpp"

using namespace labelsift;

namespace {

double accuracy(const MlpParams& params, const NoisyDataset& ds) {
    const auto logits = predict_logits(params, ds.features);
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best = 0;
        logits.row(i).maxCoeff(&best);
        correct += static_cast<Label>(best) == ds.labels.noisy[static_cast<std::size_t>(i)] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

MlpConfig small_config() {
    MlpConfig c;
    c.hidden = {16};
    c.batch_size = 32;
    c.epochs = 5;
    c.seed = 3;
    return c;
}

std::vector<std::size_t> widths_for(const NoisyDataset& ds, const MlpConfig& c) {
    std::vector<std::size_t> w{static_cast<std::size_t>(ds.features.cols())};
    w.insert(w.end(), c.hidden.begin(), c.hidden.end());
    w.push_back(ds.num_classes());
    return w;
}

}  // namespace

TEST(Mlp, ZeroParametersGiveZeroLogits) {
    const MlpParams params({3, 4, 2});
    FeatureMatrix x = FeatureMatrix::Random(5, 3);
    const auto logits = predict_logits(params, x);
    EXPECT_TRUE(logits.isZero(0.0));
    const std::vector<double> row{logits(0, 0), logits(0, 1)};
    EXPECT_DOUBLE_EQ(softmax(row)[0], 0.5);
}

TEST(Mlp, LinearLayerOnOneHotInputsReadsWeights) {
    MlpParams params({3, 2});
    params.weight(0) << 1, 2, 3, 4, 5, 6;
    params.bias(0) << 0.5, -0.5;
    const FeatureMatrix x = FeatureMatrix::Identity(3, 3);
    const auto logits = predict_logits(params, x);
    for (Eigen::Index i = 0; i < 3; ++i) {
        EXPECT_DOUBLE_EQ(logits(i, 0), params.weight(0)(0, i) + 0.5);
        EXPECT_DOUBLE_EQ(logits(i, 1), params.weight(0)(1, i) - 0.5);
    }
    EXPECT_THROW((void)predict_logits(params, FeatureMatrix::Zero(2, 4)), std::invalid_argument);
}

TEST(Mlp, HeUniformBoundsAndDeterminism) {
    const auto a = MlpParams::he_uniform({10, 20, 3}, 4);
    const auto b = MlpParams::he_uniform({10, 20, 3}, 4);
    EXPECT_EQ(a, b);
    EXPECT_LE(a.weight(0).cwiseAbs().maxCoeff(), std::sqrt(6.0 / 10.0));
    EXPECT_LE(a.weight(1).cwiseAbs().maxCoeff(), std::sqrt(6.0 / 20.0));
    EXPECT_TRUE(a.bias(0).isZero(0.0));
    EXPECT_EQ(a.size(), 10u * 20 + 20 + 20 * 3 + 3);
}

TEST(Mlp, GradientMatchesFiniteDifferencesAtRandomPoint) {
    const auto params0 = MlpParams::he_uniform({3, 5, 4}, 8);
    Rng rng(8);
    FeatureMatrix x(6, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x.data()[i] = rng.normal();
    }
    const Labels y{0, 1, 2, 3, 1, 0};
    const auto lg = loss_and_gradient(params0, x, y);
    // Mean cross-entropy oracle straight from the forward pass.
    double oracle_loss = 0.0;
    for (Eigen::Index i = 0; i < 6; ++i) {
        std::vector<double> z(4);
        for (int c = 0; c < 4; ++c) {
            z[static_cast<std::size_t>(c)] = lg.logits(i, c);
        }
        oracle_loss += cross_entropy(z, y[static_cast<std::size_t>(i)]) / 6.0;
    }
    EXPECT_NEAR(lg.loss, oracle_loss, 1e-12);
    MlpParams params = params0;
    const std::size_t p = 7;
    const double h = 1e-6;
    params.values()(p) += h;
    const double plus = loss_and_gradient(params, x, y).loss;
    params.values()(p) -= 2 * h;
    const double minus = loss_and_gradient(params, x, y).loss;
    EXPECT_NEAR(lg.gradient(p), (plus - minus) / (2 * h), 1e-6);
}

TEST(GradientCheck, TwoTwoTwoNetPasses) {
    MlpConfig config;
    config.hidden = {2};
    const auto report = loss_gradient_check(config, 2, 2, 5);
    EXPECT_TRUE(report.passed) << report.summary();
    EXPECT_LE(report.max_relative_error, 1e-4);
    EXPECT_EQ(report.parameter_count, 12u);
    EXPECT_GT(report.checked, 0u);
}

TEST(GradientCheck, LinearNetIsNearlyExact) {
    MlpConfig config;
    config.hidden = {};
    const auto report = loss_gradient_check(config, 4, 3, 8);
    EXPECT_TRUE(report.passed);
    EXPECT_EQ(report.skipped, 0u);
    EXPECT_LE(report.max_relative_error, 1e-7);
}

TEST(GradientCheck, RejectsLargeNetworks) {
    MlpConfig config;
    config.hidden = {20};
    EXPECT_THROW((void)loss_gradient_check(config, 4, 3, 5), std::invalid_argument);
}

TEST(Trainer, SeparableBlobsAreLearned) {
    const auto ds = synth_blobs(100, 3, 2, 0.3, 1);
    auto config = small_config();
    config.epochs = 50;
    const auto run = train(ds, config);
    EXPECT_GT(accuracy(run.final_params, ds), 0.99);
    EXPECT_EQ(run.trajectory.epochs(), 50u);
    EXPECT_EQ(run.trajectory.samples(), 300u);
    EXPECT_EQ(run.trajectory.classes(), 3u);
    EXPECT_EQ(run.loss_history.size(), 50u);
}

TEST(Trainer, LossEventuallyDecreases) {
    const auto ds = synth_blobs(100, 3, 2, 0.8, 2);
    auto config = small_config();
    config.epochs = 30;
    const auto run = train(ds, config);
    const auto trailing = [&](std::size_t end) {
        double s = 0.0;
        for (std::size_t e = end - 5; e < end; ++e) {
            s += run.loss_history[e];
        }
        return s / 5.0;
    };
    EXPECT_LT(trailing(30), trailing(15));
    EXPECT_LT(trailing(15), trailing(5));
}

TEST(Trainer, BitwiseDeterministic) {
    const auto ds = synth_blobs(40, 3, 3, 1.0, 3);
    const auto config = small_config();
    const auto a = train(ds, config);
    const auto b = train(ds, config);
    EXPECT_EQ(a.trajectory, b.trajectory);
    EXPECT_EQ(a.final_params, b.final_params);
    EXPECT_EQ(a.loss_history, b.loss_history);
    auto other = config;
    other.seed = 4;
    EXPECT_NE(train(ds, other).trajectory, a.trajectory);
}

TEST(Trainer, ZeroLearningRateGivesConstantTrajectory) {
    const auto ds = synth_blobs(20, 2, 2, 1.0, 4);
    for (auto capture : {CaptureMode::AtStep, CaptureMode::EndOfEpoch}) {
        auto config = small_config();
        config.lr = 0.0;
        config.capture = capture;
        const auto run = train(ds, config);
        for (std::size_t e = 1; e < run.trajectory.epochs(); ++e) {
            for (std::size_t i = 0; i < ds.size(); ++i) {
                for (std::size_t c = 0; c < 2; ++c) {
                    ASSERT_EQ(run.trajectory.at(e, i, c), run.trajectory.at(0, i, c));
                }
            }
        }
    }
}

TEST(Trainer, EndOfEpochCaptureIgnoresShuffleOrder) {
    const auto ds = synth_blobs(25, 3, 2, 1.0, 5);
    auto config = small_config();
    config.lr = 0.0;
    config.capture = CaptureMode::EndOfEpoch;
    const auto a = train(ds, config);
    config.batch_size = 7;
    const auto b = train(ds, config);
    EXPECT_EQ(a.trajectory, b.trajectory);
    const auto init = MlpParams::he_uniform(widths_for(ds, config), derive_seed(config.seed, "init"));
    const auto logits = predict_logits(init, ds.features);
    EXPECT_EQ(a.trajectory.at(2, 9, 1), static_cast<float>(logits(9, 1)));
}

TEST(Trainer, AtStepCapturesPreUpdateBatchLogits) {
    // One sample per batch: the captured logits are those before that sample's own update.
    const auto ds = synth_blobs(3, 2, 2, 1.0, 6);
    auto config = small_config();
    config.batch_size = ds.size();
    config.epochs = 2;
    TrainOptions options;
    options.keep_snapshots = true;
    const auto run = train(ds, config, options);
    const auto init = MlpParams::he_uniform(widths_for(ds, config), derive_seed(config.seed, "init"));
    const auto first = predict_logits(init, ds.features);
    const auto second = predict_logits(run.snapshots[0], ds.features);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_FLOAT_EQ(run.trajectory.at(0, i, 0), static_cast<float>(first(static_cast<Eigen::Index>(i), 0)));
        EXPECT_FLOAT_EQ(run.trajectory.at(1, i, 1), static_cast<float>(second(static_cast<Eigen::Index>(i), 1)));
    }
}

TEST(Trainer, SingleSgdStepMatchesHandUpdate) {
    const auto ds = synth_blobs(4, 2, 2, 1.0, 7);
    for (double wd : {0.0, 0.1}) {
        MlpConfig config;
        config.hidden = {3};
        config.optimizer = OptimizerKind::Sgd;
        config.lr = 0.05;
        config.weight_decay = wd;
        config.batch_size = ds.size();
        config.epochs = 1;
        config.seed = 9;
        const auto run = train(ds, config);
        const auto init = MlpParams::he_uniform(widths_for(ds, config), derive_seed(config.seed, "init"));
        const auto grad = loss_and_gradient(init, ds.features, ds.labels.noisy).gradient;
        const Eigen::VectorXd expected = init.values() - config.lr * (grad + wd * init.values());
        EXPECT_LT((run.final_params.values() - expected).cwiseAbs().maxCoeff(), 1e-12) << "wd " << wd;
    }
}

TEST(Trainer, SingleAdamStepMatchesHandUpdate) {
    const auto ds = synth_blobs(4, 2, 2, 1.0, 8);
    MlpConfig config;
    config.hidden = {3};
    config.lr = 0.01;
    config.weight_decay = 0.0;
    config.batch_size = ds.size();
    config.epochs = 1;
    const auto run = train(ds, config);
    const auto init = MlpParams::he_uniform(widths_for(ds, config), derive_seed(config.seed, "init"));
    const Eigen::VectorXd g = loss_and_gradient(init, ds.features, ds.labels.noisy).gradient;
    // First bias-corrected Adam step: m_hat = g, v_hat = g^2.
    const Eigen::VectorXd step = (g.array() / (g.array().abs() + config.eps)).matrix();
    const Eigen::VectorXd expected = init.values() - config.lr * step;
    EXPECT_LT((run.final_params.values() - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Trainer, SwaParamsAverageSnapshots) {
    const auto ds = synth_blobs(20, 3, 2, 1.0, 9);
    auto config = small_config();
    TrainOptions options;
    options.keep_snapshots = true;
    options.swa_window = EpochWindow{1, 4};
    const auto run = train(ds, config, options);
    ASSERT_EQ(run.snapshots.size(), config.epochs);
    Eigen::VectorXd mean = (run.snapshots[1].values() + run.snapshots[2].values() + run.snapshots[3].values()) / 3.0;
    EXPECT_LT((run.swa_params.values() - mean).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(run.final_params, run.snapshots.back());
    EXPECT_EQ(run.swa_window, (EpochWindow{1, 4}));
}

TEST(Trainer, ObserverSeesTrajectoryEpochs) {
    const auto ds = synth_blobs(10, 2, 2, 1.0, 10);
    const auto config = small_config();
    std::vector<std::vector<float>> seen;
    TrainOptions options;
    options.observer = [&](std::size_t epoch, std::span<const float> logits, const MlpParams&) {
        EXPECT_EQ(epoch, seen.size());
        seen.emplace_back(logits.begin(), logits.end());
    };
    const auto run = train(ds, config, options);
    ASSERT_EQ(seen.size(), config.epochs);
    for (std::size_t e = 0; e < config.epochs; ++e) {
        const auto epoch = run.trajectory.epoch(e);
        EXPECT_TRUE(std::equal(epoch.begin(), epoch.end(), seen[e].begin()));
    }
    seen.clear();
    options.keep_trajectory = false;
    EXPECT_TRUE(train(ds, config, options).trajectory.empty());
}

TEST(Trainer, DivergenceNamesTheEpoch) {
    auto ds = synth_blobs(10, 2, 2, 1.0, 11);
    ds.features *= 1e150;
    MlpConfig config = small_config();
    config.optimizer = OptimizerKind::Sgd;
    config.lr = 1e200;
    try {
        (void)train(ds, config);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_EQ(e.epoch(), 0);
    }
}

TEST(Trainer, LearningRateSchedule) {
    MlpConfig config;
    config.lr = 0.1;
    config.lr_milestones = {0, 50, 80};
    config.lr_multipliers = {1.0, 0.1, 0.01};
    EXPECT_DOUBLE_EQ(config.lr_at(0), 0.1);
    EXPECT_DOUBLE_EQ(config.lr_at(49), 0.1);
    EXPECT_DOUBLE_EQ(config.lr_at(50), 0.1 * 0.1);
    EXPECT_DOUBLE_EQ(config.lr_at(99), 0.1 * 0.01);
    config.lr_multipliers.pop_back();
    EXPECT_THROW(config.validate(), std::invalid_argument);
}

TEST(Trainer, RejectsInvalidConfigs) {
    const auto ds = synth_blobs(5, 2, 2, 1.0, 12);
    auto config = small_config();
    config.epochs = 0;
    EXPECT_THROW((void)train(ds, config), std::invalid_argument);
    config = small_config();
    config.batch_size = 0;
    EXPECT_THROW((void)train(ds, config), std::invalid_argument);
    config = small_config();
    config.lr = -1;
    EXPECT_THROW((void)train(ds, config), std::invalid_argument);
    TrainOptions options;
    options.swa_window = EpochWindow{3, 9};
    EXPECT_THROW((void)train(ds, small_config(), options), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST(RunConfig, ParsesCommentsAndTypes) {
    const auto cfg = RunConfig::parse(
        "# trainer\n"
        "hidden = 64, 32   # two layers\n"
        "optimizer = sgd\n"
        "\n"
        "lr = 0.05\n"
        "epochs = 12\n"
        "lr_milestones = 0,5\n"
        "lr_multipliers = 1.0,0.1\n");
    const auto config = mlp_config_from(cfg);
    EXPECT_EQ(config.hidden, (std::vector<std::size_t>{64, 32}));
    EXPECT_EQ(config.optimizer, OptimizerKind::Sgd);
    EXPECT_DOUBLE_EQ(config.lr, 0.05);
    EXPECT_EQ(config.epochs, 12u);
    EXPECT_EQ(config.lr_milestones, (std::vector<std::size_t>{0, 5}));
    EXPECT_EQ(config.batch_size, MlpConfig{}.batch_size);
}

TEST(RunConfig, EmptyHiddenMeansLinearModel) {
    EXPECT_TRUE(mlp_config_from(RunConfig::parse("hidden =\n")).hidden.empty());
}

TEST(RunConfig, RejectsDuplicatesUnknownKeysAndBadValues) {
    EXPECT_THROW((void)RunConfig::parse("lr = 1\nlr = 2\n"), std::invalid_argument);
    EXPECT_THROW((void)RunConfig::parse("no equals sign\n"), std::invalid_argument);
    EXPECT_THROW(RunConfig::parse("learning_rate = 1\n").require_known(trainer_keys()), std::invalid_argument);
    EXPECT_THROW((void)mlp_config_from(RunConfig::parse("lr = fast\n")), std::invalid_argument);
    EXPECT_THROW((void)mlp_config_from(RunConfig::parse("optimizer = rmsprop\n")), std::invalid_argument);
}

TEST(RunConfig, RunFileRoundTrip) {
    MlpConfig config;
    config.hidden = {7, 5};
    config.optimizer = OptimizerKind::Sgd;
    config.lr = 0.0123;
    config.momentum = 0.8;
    config.weight_decay = 1e-3;
    config.batch_size = 17;
    config.epochs = 33;
    config.seed = 99;
    config.capture = CaptureMode::EndOfEpoch;
    config.lr_milestones = {0, 10};
    config.lr_multipliers = {1.0, 0.5};
    const auto back = mlp_config_from(RunConfig::parse(to_run_file(config)));
    EXPECT_EQ(back.hidden, config.hidden);
    EXPECT_EQ(back.optimizer, config.optimizer);
    EXPECT_EQ(back.lr, config.lr);
    EXPECT_EQ(back.momentum, config.momentum);
    EXPECT_EQ(back.weight_decay, config.weight_decay);
    EXPECT_EQ(back.batch_size, config.batch_size);
    EXPECT_EQ(back.epochs, config.epochs);
    EXPECT_EQ(back.seed, config.seed);
    EXPECT_EQ(back.capture, config.capture);
    EXPECT_EQ(back.lr_milestones, config.lr_milestones);
    EXPECT_EQ(back.lr_multipliers, config.lr_multipliers);
}
