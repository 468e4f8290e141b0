#include "labelsift/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>

#include <fmt/format.h>

#include "labelsift/confident.hpp"
#include "labelsift/errors.hpp"
#include "labelsift/metrics.hpp"
#include "labelsift/random.hpp"
#include "labelsift/registry.hpp"

namespace labelsift {

std::uint64_t noise_seed(std::uint64_t run_seed) {
    return derive_seed(run_seed, "noise");
}

std::uint64_t trainer_seed(std::uint64_t run_seed) {
    return derive_seed(run_seed, "trainer");
}

const BenchmarkSummary& BenchmarkResults::find(const std::string& method) const {
    const auto it = std::find_if(summary.begin(), summary.end(), [&](const auto& s) { return s.method == method; });
    if (it == summary.end()) {
        throw std::out_of_range("no benchmark summary for method '" + method + "'");
    }
    return *it;
}

namespace {

Aggregation streaming_kind(MethodKind kind) {
    switch (kind) {
        case MethodKind::Last:
            return Aggregation::Last;
        case MethodKind::Mean:
            return Aggregation::Mean;
        default:
            return Aggregation::MeanProb;
    }
}

bool streams(MethodKind kind) {
    return kind == MethodKind::Last || kind == MethodKind::Mean || kind == MethodKind::MeanProb;
}

std::map<std::string, ScoreVector> score_one_seed(const NoisyDataset& noisy,
                                                  const std::vector<const MethodDescriptor*>& methods,
                                                  const BenchmarkConfig& config, std::uint64_t seed,
                                                  const std::function<void(const std::string&)>& progress) {
    std::map<std::string, ScoreVector> scores;
    const auto& labels = noisy.labels.noisy;
    const std::size_t k = noisy.num_classes();

    const bool needs_training = std::any_of(methods.begin(), methods.end(),
                                            [](const auto* m) { return m->family == MethodFamily::InSample; });
    if (needs_training) {
        MlpConfig trainer = config.trainer;
        trainer.seed = trainer_seed(seed);
        const EpochWindow full = EpochWindow::full(trainer.epochs);

        std::vector<std::pair<const MethodDescriptor*, std::unique_ptr<TrajectoryAccumulator>>> accumulators;
        std::map<AgreementFn, std::unique_ptr<AgreementRecorder>> recorders;
        for (const auto* m : methods) {
            if (streams(m->kind)) {
                accumulators.emplace_back(m, make_accumulator(streaming_kind(m->kind), labels, k, *m->agreement, full));
            } else if (m->kind == MethodKind::Ctrl && !recorders.contains(*m->agreement)) {
                recorders[*m->agreement] =
                    std::make_unique<AgreementRecorder>(labels, k, trainer.epochs, *m->agreement);
            }
        }
        TrainOptions options;
        options.keep_trajectory = false;
        options.observer = [&](std::size_t epoch, std::span<const float> logits, const MlpParams&) {
            for (auto& [m, acc] : accumulators) {
                acc->observe(epoch, logits);
            }
            for (auto& [fn, rec] : recorders) {
                rec->observe(epoch, logits);
            }
            if (progress && ((epoch + 1) % 100 == 0 || epoch + 1 == trainer.epochs)) {
                progress(fmt::format("seed {}: epoch {}/{}", seed, epoch + 1, trainer.epochs));
            }
        };
        const TrainRun run = train(noisy, trainer, options);

        for (auto& [m, acc] : accumulators) {
            scores[m->id] = acc->finish();
        }
        for (const auto* m : methods) {
            if (m->kind == MethodKind::Swa) {
                scores[m->id] = aggregate_swa(run, noisy.features, labels, *m->agreement, full);
            } else if (m->kind == MethodKind::Ctrl) {
                CtrlParams ctrl = config.ctrl;
                ctrl.kmeans_seed = derive_seed(seed, m->id);
                scores[m->id] = ctrl_from_agreement(recorders.at(*m->agreement)->matrix(), labels, k, ctrl).scores;
            }
        }
    }

    const bool needs_folds = std::any_of(methods.begin(), methods.end(), [](const auto* m) { return m->requires_folds; });
    if (needs_folds) {
        if (progress) {
            progress(fmt::format("seed {}: {}-fold out-of-sample training", seed, config.folds));
        }
        const auto oos = kfold_out_of_sample(noisy, config.trainer, config.folds, derive_seed(seed, "confident"));
        MethodInputs inputs;
        inputs.labels = labels;
        inputs.oos = &oos;
        for (const auto* m : methods) {
            if (m->requires_folds) {
                scores[m->id] = run_method(*m, inputs);
            }
        }
    }
    return scores;
}

}  // namespace

BenchmarkResults run_benchmark(const NoisyDataset& dataset, const BenchmarkConfig& config,
                               const std::function<void(const std::string&)>& progress) {
    if (config.methods.empty()) {
        throw std::invalid_argument("benchmark: no methods requested");
    }
    if (config.seeds.empty()) {
        throw std::invalid_argument("benchmark: no seeds given");
    }
    std::vector<const MethodDescriptor*> methods;
    for (const auto& id : config.methods) {
        const auto* m = &find_method(id);
        if (std::find(methods.begin(), methods.end(), m) != methods.end()) {
            throw std::invalid_argument("benchmark: method '" + id + "' listed twice");
        }
        methods.push_back(m);
    }
    if (config.noise) {
        config.noise->validate();
    }
    config.trainer.validate();

    BenchmarkResults results;
    for (auto seed : config.seeds) {
        NoisyDataset noisy = dataset;
        if (config.noise) {
            NoiseSpec spec = *config.noise;
            spec.seed = noise_seed(seed);
            noisy = inject_noise(dataset, spec);
        }
        const NoiseMask mask = noisy.labels.resolved_mask();
        const double eta = noise_rate(mask);
        const auto scores = score_one_seed(noisy, methods, config, seed, progress);
        for (const auto* m : methods) {
            const auto& s = scores.at(m->id);
            results.runs.push_back({m->id, seed, eta, fnr_at_budget(s.scores, mask, eta).fnr});
        }
    }

    for (const auto* m : methods) {
        std::vector<double> values;
        for (const auto& r : results.runs) {
            if (r.method == m->id) {
                values.push_back(r.fnr);
            }
        }
        BenchmarkSummary s;
        s.method = m->id;
        s.runs = values.size();
        double sum = 0.0;
        for (double v : values) {
            sum += v;
        }
        s.mean_fnr = sum / static_cast<double>(values.size());
        if (values.size() > 1) {
            double ss = 0.0;
            for (double v : values) {
                ss += (v - s.mean_fnr) * (v - s.mean_fnr);
            }
            const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
            s.se_fnr = sd / std::sqrt(static_cast<double>(values.size()));
        }
        results.summary.push_back(s);
    }
    return results;
}

void write_results_csv(const BenchmarkResults& results, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(path, "cannot open for writing");
    }
    out << "method,runs,mean_fnr_pct,se_pct\n";
    for (const auto& s : results.summary) {
        out << fmt::format("{},{},{:.17g},{:.17g}\n", s.method, s.runs, 100.0 * s.mean_fnr, 100.0 * s.se_fnr);
    }
    if (!out) {
        throw IoError(path, "write failed");
    }
}

void write_runs_csv(const BenchmarkResults& results, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(path, "cannot open for writing");
    }
    out << "method,seed,eta,fnr\n";
    for (const auto& r : results.runs) {
        out << fmt::format("{},{},{:.17g},{:.17g}\n", r.method, r.seed, r.eta, r.fnr);
    }
    if (!out) {
        throw IoError(path, "write failed");
    }
}

std::string format_results_table(const BenchmarkResults& results) {
    std::size_t width = std::string_view("method").size();
    for (const auto& s : results.summary) {
        width = std::max(width, s.method.size());
    }
    std::string out = fmt::format("{:<{}}  {:>5}  {:>16}\n", "method", width, "runs", "FNR(eta) %");
    for (const auto& s : results.summary) {
        out += fmt::format("{:<{}}  {:>5}  {:>16}\n", s.method, width, s.runs,
                           fmt::format("{:.2f} ± {:.2f}", 100.0 * s.mean_fnr, 100.0 * s.se_fnr));
    }
    return out;
}

}  // namespace labelsift
