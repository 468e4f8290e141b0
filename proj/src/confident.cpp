#include "labelsift/confident.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "labelsift/agreement.hpp"
#include "labelsift/parallel.hpp"
#include "labelsift/random.hpp"

namespace labelsift {
namespace {

void check_inputs(const OutOfSampleProbs& oos, std::span<const Label> labels) {
    if (labels.size() != oos.size()) {
        throw std::invalid_argument("confident learning: label count differs from probability rows");
    }
    for (auto y : labels) {
        if (y >= oos.classes()) {
            throw std::invalid_argument("confident learning: label out of range");
        }
    }
}

std::size_t argmax_row(const OutOfSampleProbs& oos, std::size_t i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < oos.classes(); ++k) {
        if (oos.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) >
            oos.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best))) {
            best = k;
        }
    }
    return best;
}

double prob(const OutOfSampleProbs& oos, std::size_t i, std::size_t k) {
    return oos.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
}

std::vector<std::size_t> class_counts(std::span<const Label> labels, std::size_t classes) {
    std::vector<std::size_t> counts(classes, 0);
    for (auto y : labels) {
        ++counts[y];
    }
    return counts;
}

ScoreVector binary_scores(const std::vector<bool>& flags, std::string id) {
    ScoreVector out;
    out.method_id = std::move(id);
    out.scores.reserve(flags.size());
    for (bool f : flags) {
        out.scores.push_back(f ? 1.0 : 0.0);
    }
    return out;
}

}  // namespace

void OutOfSampleProbs::validate() const {
    if (fold_id.size() != size()) {
        throw std::invalid_argument("OutOfSampleProbs: fold ids do not match rows");
    }
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        if (std::abs(probs.row(i).sum() - 1.0) > 1e-9 || (probs.row(i).array() < 0.0).any()) {
            throw std::invalid_argument(fmt::format("OutOfSampleProbs: row {} is not a probability vector", i));
        }
    }
}

std::vector<std::size_t> stratified_folds(std::span<const Label> labels, std::size_t classes, std::size_t folds,
                                          std::uint64_t seed) {
    const std::size_t n = labels.size();
    if (folds < 2) {
        throw std::invalid_argument("kfold: need at least 2 folds");
    }
    if (folds > n) {
        throw std::invalid_argument(fmt::format("kfold: {} folds for {} samples", folds, n));
    }
    std::vector<std::size_t> fold(n);
    if (folds == n) {
        std::iota(fold.begin(), fold.end(), std::size_t{0});
        return fold;
    }
    std::vector<std::vector<std::size_t>> members(classes);
    for (std::size_t i = 0; i < n; ++i) {
        members.at(labels[i]).push_back(i);
    }
    Rng rng(seed);
    std::size_t next = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        if (!members[c].empty() && members[c].size() < folds) {
            throw std::invalid_argument(
                fmt::format("kfold: class {} has {} samples, fewer than {} folds", c, members[c].size(), folds));
        }
        rng.shuffle(members[c]);
        for (auto i : members[c]) {
            fold[i] = next;
            next = (next + 1) % folds;
        }
    }
    return fold;
}

OutOfSampleProbs kfold_out_of_sample(const NoisyDataset& dataset, const MlpConfig& config, std::size_t folds,
                                     std::uint64_t seed) {
    dataset.validate();
    const std::size_t n = dataset.size();
    const std::size_t k = dataset.num_classes();
    OutOfSampleProbs oos;
    oos.fold_id = stratified_folds(dataset.labels.noisy, k, folds, derive_seed(seed, "folds"));
    oos.probs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));

    std::vector<std::vector<std::size_t>> held_out(folds);
    for (std::size_t i = 0; i < n; ++i) {
        held_out[oos.fold_id[i]].push_back(i);
    }
    std::vector<Eigen::MatrixXd> fold_probs(folds);
    parallel_for(folds, [&](std::size_t f) {
        std::vector<std::size_t> train_rows;
        train_rows.reserve(n - held_out[f].size());
        for (std::size_t i = 0; i < n; ++i) {
            if (oos.fold_id[i] != f) {
                train_rows.push_back(i);
            }
        }
        MlpConfig fold_config = config;
        fold_config.seed = derive_seed(seed, static_cast<std::uint64_t>(f));
        TrainOptions options;
        options.keep_trajectory = false;
        const auto run = train(take_rows(dataset, train_rows), fold_config, options);
        const auto held = take_rows(dataset, held_out[f]);
        const Eigen::MatrixXd logits = predict_logits(run.final_params, held.features);
        Eigen::MatrixXd probs(logits.rows(), logits.cols());
        std::vector<double> z(k);
        std::vector<double> p(k);
        for (Eigen::Index r = 0; r < logits.rows(); ++r) {
            for (std::size_t c = 0; c < k; ++c) {
                z[c] = logits(r, static_cast<Eigen::Index>(c));
            }
            softmax_into(z, p);
            for (std::size_t c = 0; c < k; ++c) {
                probs(r, static_cast<Eigen::Index>(c)) = p[c];
            }
        }
        fold_probs[f] = std::move(probs);
    });
    for (std::size_t f = 0; f < folds; ++f) {
        for (std::size_t r = 0; r < held_out[f].size(); ++r) {
            oos.probs.row(static_cast<Eigen::Index>(held_out[f][r])) = fold_probs[f].row(static_cast<Eigen::Index>(r));
        }
    }
    return oos;
}

ConfidentJoint confident_joint(const OutOfSampleProbs& oos, std::span<const Label> labels) {
    check_inputs(oos, labels);
    const std::size_t k = oos.classes();
    ConfidentJoint joint;
    joint.classes = k;
    joint.counts.assign(k * k, 0);
    joint.thresholds.assign(k, std::numeric_limits<double>::infinity());

    const auto sizes = class_counts(labels, k);
    std::vector<double> sums(k, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        sums[labels[i]] += prob(oos, i, labels[i]);
    }
    for (std::size_t j = 0; j < k; ++j) {
        if (sizes[j] == 0) {
            joint.warnings.push_back(fmt::format("class {} has no samples; its threshold is +inf", j));
        } else {
            joint.thresholds[j] = sums[j] / static_cast<double>(sizes[j]);
        }
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::size_t best = k;
        for (std::size_t j = 0; j < k; ++j) {
            const double p = prob(oos, i, j);
            // Relative slack so a member equal to its class mean is not lost to summation rounding.
            if (p >= joint.thresholds[j] * (1.0 - 1e-12) && (best == k || p > prob(oos, i, best))) {
                best = j;
            }
        }
        if (best < k) {
            ++joint.counts[labels[i] * k + best];
        }
    }
    return joint;
}

std::vector<std::size_t> calibrate_joint(const ConfidentJoint& joint, std::span<const Label> labels) {
    const std::size_t k = joint.classes;
    const auto sizes = class_counts(labels, k);
    std::vector<double> scaled(k * k, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t row = 0;
        for (std::size_t c = 0; c < k; ++c) {
            row += joint.at(j, c);
        }
        if (row == 0) {
            continue;
        }
        for (std::size_t c = 0; c < k; ++c) {
            scaled[j * k + c] = static_cast<double>(joint.at(j, c)) * static_cast<double>(sizes[j]) / static_cast<double>(row);
            total += scaled[j * k + c];
        }
    }
    std::vector<std::size_t> out(k * k, 0);
    if (total == 0.0) {
        return out;
    }
    const auto n = static_cast<double>(labels.size());
    for (std::size_t idx = 0; idx < k * k; ++idx) {
        // std::nearbyint honours the default round-half-to-even mode.
        out[idx] = static_cast<std::size_t>(std::nearbyint(scaled[idx] * n / total));
    }
    return out;
}

ScoreVector detect_cc(const OutOfSampleProbs& oos, std::span<const Label> labels) {
    check_inputs(oos, labels);
    std::vector<bool> flags(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        flags[i] = argmax_row(oos, i) != labels[i];
    }
    return binary_scores(flags, "cl-cc");
}

ScoreVector detect_pbc(const OutOfSampleProbs& oos, std::span<const Label> labels) {
    const auto joint = confident_joint(oos, labels);
    const auto calibrated = calibrate_joint(joint, labels);
    const std::size_t k = oos.classes();
    std::vector<bool> flags(labels.size(), false);
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t off_diagonal = 0;
        for (std::size_t c = 0; c < k; ++c) {
            off_diagonal += c == j ? 0 : calibrated[j * k + c];
        }
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == j) {
                members.push_back(i);
            }
        }
        const std::size_t take = std::min(off_diagonal, members.size());
        std::stable_sort(members.begin(), members.end(),
                         [&](std::size_t a, std::size_t b) { return prob(oos, a, j) < prob(oos, b, j); });
        for (std::size_t r = 0; r < take; ++r) {
            flags[members[r]] = true;
        }
    }
    return binary_scores(flags, "cl-pbc");
}

ScoreVector detect_pbnr(const OutOfSampleProbs& oos, std::span<const Label> labels) {
    const auto joint = confident_joint(oos, labels);
    const auto calibrated = calibrate_joint(joint, labels);
    const std::size_t k = oos.classes();
    std::vector<bool> flags(labels.size(), false);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t c = 0; c < k; ++c) {
            if (c == j || calibrated[j * k + c] == 0) {
                continue;
            }
            std::vector<std::size_t> candidates;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (labels[i] == j && !flags[i]) {
                    candidates.push_back(i);
                }
            }
            const auto margin = [&](std::size_t i) { return prob(oos, i, c) - prob(oos, i, j); };
            std::stable_sort(candidates.begin(), candidates.end(),
                             [&](std::size_t a, std::size_t b) { return margin(a) > margin(b); });
            const std::size_t take = std::min(calibrated[j * k + c], candidates.size());
            for (std::size_t r = 0; r < take; ++r) {
                flags[candidates[r]] = true;
            }
        }
    }
    return binary_scores(flags, "cl-pbnr");
}

}  // namespace labelsift
