#include "labelsift/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "labelsift/random.hpp"

namespace labelsift {

MlpParams::MlpParams(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) {
        throw std::invalid_argument("MlpParams: need at least input and output widths");
    }
    for (auto w : widths_) {
        if (w == 0) {
            throw std::invalid_argument("MlpParams: layer widths must be positive");
        }
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        offsets_.push_back(offset);
        offset += widths_[l + 1] * widths_[l] + widths_[l + 1];
    }
    offsets_.push_back(offset);
    values_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

MlpParams MlpParams::he_uniform(std::vector<std::size_t> widths, std::uint64_t seed) {
    MlpParams params(std::move(widths));
    Rng rng(seed);
    for (std::size_t l = 0; l < params.layers(); ++l) {
        const double bound = std::sqrt(6.0 / static_cast<double>(params.widths_[l]));
        auto w = params.weight(l);
        // Row-major draw order so the values do not depend on storage layout.
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                w(r, c) = rng.uniform(-bound, bound);
            }
        }
    }
    return params;
}

Eigen::Map<const Eigen::MatrixXd> MlpParams::weight(std::size_t layer) const {
    return {values_.data() + offsets_.at(layer), static_cast<Eigen::Index>(widths_[layer + 1]),
            static_cast<Eigen::Index>(widths_[layer])};
}

Eigen::Map<Eigen::MatrixXd> MlpParams::weight(std::size_t layer) {
    return {values_.data() + offsets_.at(layer), static_cast<Eigen::Index>(widths_[layer + 1]),
            static_cast<Eigen::Index>(widths_[layer])};
}

Eigen::Map<const Eigen::VectorXd> MlpParams::bias(std::size_t layer) const {
    return {values_.data() + offsets_.at(layer) + widths_[layer + 1] * widths_[layer],
            static_cast<Eigen::Index>(widths_[layer + 1])};
}

Eigen::Map<Eigen::VectorXd> MlpParams::bias(std::size_t layer) {
    return {values_.data() + offsets_.at(layer) + widths_[layer + 1] * widths_[layer],
            static_cast<Eigen::Index>(widths_[layer + 1])};
}

namespace {

void check_input(const MlpParams& params, const FeatureMatrix& features) {
    if (params.layers() == 0) {
        throw std::invalid_argument("predict_logits: empty network");
    }
    if (static_cast<std::size_t>(features.cols()) != params.input_dim()) {
        throw std::invalid_argument("predict_logits: feature dimension does not match network input");
    }
}

// Activations of every layer; acts[0] is the input, acts.back() the logits.
std::vector<Eigen::MatrixXd> forward(const MlpParams& params, const FeatureMatrix& features) {
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(params.layers() + 1);
    acts.emplace_back(features);
    for (std::size_t l = 0; l < params.layers(); ++l) {
        Eigen::MatrixXd z = acts.back() * params.weight(l).transpose();
        z.rowwise() += params.bias(l).transpose();
        if (l + 1 < params.layers()) {
            z = z.cwiseMax(0.0);
        }
        acts.push_back(std::move(z));
    }
    return acts;
}

}  // namespace

Eigen::MatrixXd predict_logits(const MlpParams& params, const FeatureMatrix& features) {
    check_input(params, features);
    return std::move(forward(params, features).back());
}

LossGradient loss_and_gradient(const MlpParams& params, const FeatureMatrix& features, std::span<const Label> labels) {
    check_input(params, features);
    if (static_cast<std::size_t>(features.rows()) != labels.size() || labels.empty()) {
        throw std::invalid_argument("loss_and_gradient: label count does not match batch");
    }
    auto acts = forward(params, features);
    const auto batch = static_cast<double>(labels.size());
    const Eigen::MatrixXd& logits = acts.back();

    // d(mean CE)/d logits = (softmax - onehot) / B
    Eigen::MatrixXd delta(logits.rows(), logits.cols());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        double sum = 0.0;
        for (Eigen::Index k = 0; k < logits.cols(); ++k) {
            delta(i, k) = std::exp(logits(i, k) - m);
            sum += delta(i, k);
        }
        const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
        if (y >= logits.cols()) {
            throw std::invalid_argument("loss_and_gradient: label out of range");
        }
        loss += m + std::log(sum) - logits(i, y);
        delta.row(i) /= sum;
        delta(i, y) -= 1.0;
    }
    delta /= batch;

    LossGradient out;
    out.loss = loss / batch;
    out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size()));
    MlpParams grad(params.widths());
    for (std::size_t l = params.layers(); l-- > 0;) {
        grad.weight(l).noalias() = delta.transpose() * acts[l];
        grad.bias(l) = delta.colwise().sum().transpose();
        if (l > 0) {
            Eigen::MatrixXd back = delta * params.weight(l);
            // ReLU derivative; the kink at exactly 0 is treated as inactive.
            delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
        }
    }
    out.gradient = std::move(grad.values());
    out.logits = std::move(acts.back());
    return out;
}

}  // namespace labelsift
