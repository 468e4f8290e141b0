#include "labelsift/registry.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

#include "labelsift/errors.hpp"

namespace labelsift {
namespace {

MethodDescriptor in_sample(std::string id, MethodKind kind, AgreementFn fn) {
    MethodDescriptor d;
    d.id = std::move(id);
    d.family = MethodFamily::InSample;
    d.kind = kind;
    d.agreement = fn;
    d.requires_parameters = kind == MethodKind::Swa;
    return d;
}

MethodDescriptor out_of_sample(std::string id, MethodKind kind) {
    MethodDescriptor d;
    d.id = std::move(id);
    d.family = MethodFamily::OutOfSample;
    d.kind = kind;
    d.requires_folds = true;
    return d;
}

std::vector<MethodDescriptor> build_methods() {
    using enum MethodKind;
    return {
        in_sample("last-ce_js", Last, AgreementFn::CE),
        in_sample("last-lm", Last, AgreementFn::LM),
        in_sample("mean-ce", Mean, AgreementFn::CE),
        in_sample("mean-js", Mean, AgreementFn::JS),
        in_sample("mean-lm", Mean, AgreementFn::LM),
        in_sample("mean_prob-ce_js", MeanProb, AgreementFn::CE),
        in_sample("mean_prob-lm", MeanProb, AgreementFn::LM),
        in_sample("swa-ce_js", Swa, AgreementFn::CE),
        in_sample("swa-lm", Swa, AgreementFn::LM),
        in_sample("ctrl-ce", Ctrl, AgreementFn::CE),
        in_sample("ctrl-js", Ctrl, AgreementFn::JS),
        in_sample("ctrl-lm", Ctrl, AgreementFn::LM),
        out_of_sample("cl-cc", ConfidentCounting),
        out_of_sample("cl-pbc", PruneByClass),
        out_of_sample("cl-pbnr", PruneByNoiseRate),
    };
}

const LogitTrajectory& need_trajectory(const MethodDescriptor& method, const MethodInputs& inputs) {
    if (inputs.trajectory == nullptr) {
        throw UnsupportedMethod(fmt::format("method '{}' needs a logit trajectory", method.id));
    }
    return *inputs.trajectory;
}

}  // namespace

const std::vector<MethodDescriptor>& list_methods() {
    static const std::vector<MethodDescriptor> methods = build_methods();
    return methods;
}

const MethodDescriptor& find_method(std::string_view id) {
    const auto& methods = list_methods();
    const auto it = std::find_if(methods.begin(), methods.end(), [&](const auto& m) { return m.id == id; });
    if (it == methods.end()) {
        throw UnsupportedMethod(fmt::format("unknown method '{}'", id));
    }
    return *it;
}

ScoreVector run_method(const MethodDescriptor& method, const MethodInputs& inputs) {
    ScoreVector out;
    switch (method.kind) {
        case MethodKind::Last:
        case MethodKind::Mean:
        case MethodKind::MeanProb: {
            const auto& traj = need_trajectory(method, inputs);
            const auto window = inputs.window.value_or(EpochWindow::full(traj.epochs()));
            if (method.kind == MethodKind::Last) {
                out = aggregate_last(traj, inputs.labels, *method.agreement, window);
            } else if (method.kind == MethodKind::Mean) {
                out = aggregate_mean(traj, inputs.labels, *method.agreement, window);
            } else {
                out = aggregate_mean_prob(traj, inputs.labels, *method.agreement, window);
            }
            break;
        }
        case MethodKind::Swa: {
            if (inputs.run == nullptr || inputs.features == nullptr) {
                throw UnsupportedMethod(fmt::format(
                    "method '{}' needs model parameters from the built-in trainer; imported trajectories carry none",
                    method.id));
            }
            const auto window = inputs.window.value_or(EpochWindow::full(inputs.run->epochs));
            out = aggregate_swa(*inputs.run, *inputs.features, inputs.labels, *method.agreement, window);
            break;
        }
        case MethodKind::Ctrl: {
            const auto& traj = need_trajectory(method, inputs);
            out = ctrl_scores(traj, inputs.labels, *method.agreement, inputs.ctrl);
            break;
        }
        case MethodKind::ConfidentCounting:
        case MethodKind::PruneByClass:
        case MethodKind::PruneByNoiseRate: {
            OutOfSampleProbs computed;
            const OutOfSampleProbs* oos = inputs.oos;
            if (oos == nullptr) {
                if (inputs.dataset == nullptr || inputs.trainer == nullptr) {
                    throw UnsupportedMethod(fmt::format(
                        "method '{}' needs a dataset and trainer config (or held-out probabilities)", method.id));
                }
                computed = kfold_out_of_sample(*inputs.dataset, *inputs.trainer, inputs.folds, inputs.seed);
                oos = &computed;
            }
            if (method.kind == MethodKind::ConfidentCounting) {
                out = detect_cc(*oos, inputs.labels);
            } else if (method.kind == MethodKind::PruneByClass) {
                out = detect_pbc(*oos, inputs.labels);
            } else {
                out = detect_pbnr(*oos, inputs.labels);
            }
            break;
        }
    }
    out.method_id = method.id;
    return out;
}

}  // namespace labelsift
