#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelsift/dataset.hpp"

namespace labelsift {

/// Label agreement function. Larger values mean stronger disagreement
/// between the model output and the assigned label.
enum class AgreementFn { CE, JS, LM };

std::string_view to_string(AgreementFn fn) noexcept;
/// Accepts "ce", "js", "lm" (case-insensitive).
AgreementFn parse_agreement(std::string_view name);

/// Numerically stable softmax (max subtraction).
std::vector<double> softmax(std::span<const double> logits);
void softmax_into(std::span<const double> logits, std::span<double> out);

/// -log softmax(logits)[label], evaluated as logsumexp(logits) - logits[label].
double cross_entropy(std::span<const double> logits, Label label);

/// Jensen-Shannon divergence between the one-hot label and the softmax of
/// the logits, natural log, in [0, ln 2].
double jensen_shannon(std::span<const double> logits, Label label);

/// Same, from an already normalised probability vector.
double jensen_shannon_probs(std::span<const double> probs, Label label);

/// Closed form of the one-hot JS divergence as a function of p = probs[label].
double jensen_shannon_onehot(double p);

/// max_{k != label} logits[k] - logits[label].
double logit_margin(std::span<const double> logits, Label label);

double agreement(AgreementFn fn, std::span<const double> logits, Label label);

}  // namespace labelsift
