#include "labelsift/agreement.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace labelsift {
namespace {

void check_label(std::span<const double> values, Label label) {
    if (values.size() < 2) {
        throw std::invalid_argument("agreement: need at least 2 classes");
    }
    if (label >= values.size()) {
        throw std::invalid_argument("agreement: label out of range");
    }
}

double logsumexp(std::span<const double> logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) {
        sum += std::exp(z - m);
    }
    return m + std::log(sum);
}

// x * log(x / y) with 0 log 0 = 0.
double xlogx_over_y(double x, double y) {
    return x > 0.0 ? x * std::log(x / y) : 0.0;
}

}  // namespace

std::string_view to_string(AgreementFn fn) noexcept {
    switch (fn) {
        case AgreementFn::CE:
            return "ce";
        case AgreementFn::JS:
            return "js";
        case AgreementFn::LM:
            return "lm";
    }
    return "?";
}

AgreementFn parse_agreement(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "ce") {
        return AgreementFn::CE;
    }
    if (lower == "js") {
        return AgreementFn::JS;
    }
    if (lower == "lm") {
        return AgreementFn::LM;
    }
    throw std::invalid_argument("unknown agreement function '" + std::string(name) + "' (expected ce, js or lm)");
}

void softmax_into(std::span<const double> logits, std::span<double> out) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out[k] = std::exp(logits[k] - m);
        sum += out[k];
    }
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out[k] /= sum;
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) {
        throw std::invalid_argument("softmax: empty input");
    }
    std::vector<double> out(logits.size());
    softmax_into(logits, out);
    return out;
}

double cross_entropy(std::span<const double> logits, Label label) {
    check_label(logits, label);
    // Rounding can leave a hair below zero when the label dominates.
    return std::max(0.0, logsumexp(logits) - logits[label]);
}

double jensen_shannon_onehot(double p) {
    p = std::clamp(p, 0.0, 1.0);
    const double m = 0.5 * (1.0 + p);
    // KL(p || m) over the label entry plus the off-label entries (where m = p_k / 2),
    // and KL(onehot || m) which only sees the label entry.
    const double kl_p = xlogx_over_y(p, m) + (1.0 - p) * std::numbers::ln2;
    const double kl_e = -std::log(m);
    return std::clamp(0.5 * (kl_p + kl_e), 0.0, std::numbers::ln2);
}

double jensen_shannon_probs(std::span<const double> probs, Label label) {
    check_label(probs, label);
    return jensen_shannon_onehot(probs[label]);
}

double jensen_shannon(std::span<const double> logits, Label label) {
    // p = softmax(z)[label] = exp(-CE), so JS is a monotone function of CE
    // and the two rank samples identically.
    return jensen_shannon_onehot(std::exp(-cross_entropy(logits, label)));
}

double logit_margin(std::span<const double> logits, Label label) {
    check_label(logits, label);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < logits.size(); ++k) {
        if (k != label) {
            best = std::max(best, logits[k]);
        }
    }
    return best - logits[label];
}

double agreement(AgreementFn fn, std::span<const double> logits, Label label) {
    switch (fn) {
        case AgreementFn::CE:
            return cross_entropy(logits, label);
        case AgreementFn::JS:
            return jensen_shannon(logits, label);
        case AgreementFn::LM:
            return logit_margin(logits, label);
    }
    throw std::invalid_argument("agreement: unknown function");
}

}  // namespace labelsift
