// labelsift command-line front end: noisy dataset -> scores -> threshold -> evaluation.

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "labelsift/aggregation.hpp"
#include "labelsift/benchmark.hpp"
#include "labelsift/confident.hpp"
#include "labelsift/dataset.hpp"
#include "labelsift/errors.hpp"
#include "labelsift/metrics.hpp"
#include "labelsift/noise.hpp"
#include "labelsift/registry.hpp"
#include "labelsift/run_config.hpp"
#include "labelsift/trainer.hpp"
#include "labelsift/trajectory.hpp"
#include "labelsift/tuning.hpp"

namespace ls = labelsift;

namespace {

double parse_double(const std::string& text, const std::string& what) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw std::invalid_argument(fmt::format("{}: expected a number, got '{}'", what, text));
    }
    return value;
}

std::size_t parse_size(const std::string& text, const std::string& what) {
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw std::invalid_argument(fmt::format("{}: expected a non-negative integer, got '{}'", what, text));
    }
    return value;
}

// "name" or "name:arg" -> preprocessing step.
ls::PreprocessStep parse_step(const std::string& text) {
    const auto colon = text.find(':');
    const std::string name = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    if (name == "sample_rows") {
        return ls::preprocess::SampleRows{parse_size(arg, "sample_rows")};
    }
    if (name == "quantile_clip") {
        const auto comma = arg.find(',');
        if (comma == std::string::npos) {
            throw std::invalid_argument("quantile_clip expects quantile_clip:LO,HI");
        }
        return ls::preprocess::QuantileClip{parse_double(arg.substr(0, comma), "quantile_clip"),
                                            parse_double(arg.substr(comma + 1), "quantile_clip"),
                                            {}};
    }
    if (name == "standard_scale") {
        return ls::preprocess::StandardScale{};
    }
    if (name == "drop_constant") {
        return ls::preprocess::DropConstant{};
    }
    if (name == "one_hot") {
        ls::preprocess::OneHot step;
        std::size_t begin = 0;
        while (begin < arg.size()) {
            const auto comma = arg.find(',', begin);
            step.columns.push_back(arg.substr(begin, comma == std::string::npos ? std::string::npos : comma - begin));
            if (comma == std::string::npos) {
                break;
            }
            begin = comma + 1;
        }
        return step;
    }
    throw std::invalid_argument("unknown preprocessing step '" + name +
                                "' (sample_rows:N, quantile_clip:LO,HI, standard_scale, one_hot[:COLS], drop_constant)");
}

ls::EpochWindow parse_window(const std::string& text, std::size_t epochs) {
    if (text.empty()) {
        return ls::EpochWindow::full(epochs);
    }
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw std::invalid_argument("--window expects START:END");
    }
    ls::EpochWindow w{parse_size(text.substr(0, colon), "--window"), parse_size(text.substr(colon + 1), "--window")};
    w.validate(epochs);
    return w;
}

ls::NoisyDataset load_dataset(const std::string& features_path, const std::string& labels_path) {
    ls::NoisyDataset ds;
    ds.features = ls::read_features_csv(features_path, &ds.feature_names);
    ds.labels = ls::read_labels(labels_path);
    ds.validate();
    return ds;
}

ls::MlpConfig load_trainer(const std::string& path) {
    if (path.empty()) {
        return {};
    }
    const auto config = ls::RunConfig::load(path);
    config.require_known(ls::trainer_keys());
    return ls::mlp_config_from(config);
}

double resolve_budget(const std::string& text, const ls::NoiseMask& mask) {
    if (text == "eta") {
        return ls::noise_rate(mask);
    }
    return parse_double(text, "--budget");
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::size_t per_class = 100;
    std::size_t classes = 3;
    std::size_t dims = 2;
    double spread = 1.0;
    std::uint64_t seed = 0;
    std::string features;
    std::string labels;
};

void cmd_synth(const SynthArgs& a) {
    const auto ds = ls::synth_blobs(a.per_class, a.classes, a.dims, a.spread, a.seed);
    ls::write_features_csv(ds.features, ds.feature_names, a.features);
    ls::write_labels(ds.labels, a.labels);
    fmt::print("wrote {} samples, {} classes, {} features\n", ds.size(), ds.num_classes(), a.dims);
}

struct IngestArgs {
    std::string csv;
    std::string label_column;
    std::vector<std::string> steps;
    std::uint64_t seed = 0;
    std::string features;
    std::string labels;
};

void cmd_ingest(const IngestArgs& a) {
    ls::PreprocessSpec spec;
    for (const auto& s : a.steps) {
        spec.steps.push_back(parse_step(s));
    }
    const auto ds = ls::load_csv_dataset(a.csv, a.label_column, spec, a.seed);
    ls::write_features_csv(ds.features, ds.feature_names, a.features);
    ls::write_labels(ds.labels, a.labels);
    fmt::print("wrote {} samples, {} classes, {} features\n", ds.size(), ds.num_classes(), ds.features.cols());
}

struct InjectArgs {
    std::string labels;
    std::string kind = "symmetric";
    double rate = 0.2;
    std::uint64_t seed = 0;
    std::string out;
    std::string contingency;
};

void cmd_inject(const InjectArgs& a) {
    const auto labels = ls::read_labels(a.labels);
    ls::NoiseSpec spec{ls::parse_noise_kind(a.kind), a.rate, a.seed};
    const auto noisy = ls::inject_noise(labels, spec);
    ls::write_labels(noisy, a.out);
    if (!a.contingency.empty()) {
        ls::write_contingency_csv(ls::contingency(noisy), a.contingency);
    }
    fmt::print("realized noise rate {:.6f}\n", ls::noise_rate(*noisy.mask));
}

struct TrainArgs {
    std::string features;
    std::string labels;
    std::string config;
    std::string traj;
    std::string loss;
};

void cmd_train(const TrainArgs& a) {
    const auto ds = load_dataset(a.features, a.labels);
    const auto config = load_trainer(a.config);
    const auto run = ls::train(ds, config);
    ls::write_trajectory(run.trajectory, a.traj);
    if (!a.loss.empty()) {
        std::ofstream out(a.loss, std::ios::binary | std::ios::trunc);
        out << "epoch,loss\n";
        for (std::size_t e = 0; e < run.loss_history.size(); ++e) {
            out << fmt::format("{},{:.17g}\n", e, run.loss_history[e]);
        }
    }
    fmt::print("trained {} epochs; final mean loss {:.6f}\n", run.epochs, run.loss_history.back());
}

struct DetectArgs {
    std::string method;
    std::string traj;
    std::string labels;
    std::string features;
    std::string config;
    std::string window;
    std::string out;
    std::size_t folds = 4;
    std::uint64_t seed = 0;
    std::size_t ctrl_windows = 4;
    std::size_t ctrl_clusters = 2;
    std::size_t ctrl_selected = 1;
};

void cmd_detect(const DetectArgs& a) {
    const auto& method = ls::find_method(a.method);
    const auto labels = ls::read_labels(a.labels);
    ls::MethodInputs inputs;
    inputs.labels = labels.noisy;
    inputs.seed = a.seed;
    inputs.folds = a.folds;
    inputs.ctrl.num_windows = a.ctrl_windows;
    inputs.ctrl.clusters = a.ctrl_clusters;
    inputs.ctrl.selected = a.ctrl_selected;
    inputs.ctrl.kmeans_seed = a.seed;

    ls::LogitTrajectory traj;
    if (!a.traj.empty()) {
        traj = ls::read_trajectory(a.traj);
        inputs.trajectory = &traj;
        inputs.window = parse_window(a.window, traj.epochs());
    }
    ls::NoisyDataset ds;
    ls::MlpConfig trainer;
    if (!a.features.empty()) {
        ds = load_dataset(a.features, a.labels);
        trainer = load_trainer(a.config);
        inputs.dataset = &ds;
        inputs.trainer = &trainer;
    }
    const auto scores = ls::run_method(method, inputs);
    ls::write_scores_csv(scores, a.out);
    fmt::print("wrote {} scores for {}\n", scores.size(), scores.method_id);
}

struct EvaluateArgs {
    std::string scores;
    std::string labels;
    std::string budget = "eta";
    std::string out;
};

void cmd_evaluate(const EvaluateArgs& a) {
    const auto scores = ls::read_scores_csv(a.scores);
    const auto mask = ls::read_labels(a.labels).resolved_mask();
    const double budget = resolve_budget(a.budget, mask);
    const auto outcome = ls::fnr_at_budget(scores.scores, mask, budget);
    fmt::print("FNR {:.6f} at budget {:.6f} ({})\n", outcome.fnr, budget, scores.method_id);
    if (!a.out.empty()) {
        nlohmann::json j;
        j["method_id"] = scores.method_id;
        j["budget"] = outcome.budget;
        j["eta"] = ls::noise_rate(mask);
        j["tp"] = outcome.tp;
        j["fp"] = outcome.fp;
        j["fn"] = outcome.fn;
        j["tn"] = outcome.tn;
        j["fnr"] = outcome.fnr;
        j["selected"] = outcome.selected;
        std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ls::IoError(a.out, "cannot open for writing");
        }
        out << j.dump(2) << '\n';
    }
}

struct CurveArgs {
    std::string scores;
    std::string labels;
    std::string out;
};

void cmd_curve(const CurveArgs& a) {
    const auto scores = ls::read_scores_csv(a.scores);
    const auto mask = ls::read_labels(a.labels).resolved_mask();
    const auto curve = ls::fnr_curve(scores.scores, mask);
    ls::write_curve_csv(curve, a.out);
    fmt::print("wrote {} curve points (eta {:.6f})\n", curve.points.size(), curve.eta);
}

struct TuneArgs {
    std::string traj;
    std::string labels;
    std::vector<std::string> methods;
    std::vector<double> fractions{0.01, 0.05, 0.10};
    std::uint64_t seed = 0;
    std::string out;
};

void cmd_tune(const TuneArgs& a) {
    const auto traj = ls::read_trajectory(a.traj);
    const auto labels = ls::read_labels(a.labels);
    const auto mask = labels.resolved_mask();
    std::vector<ls::TuningReportRow> rows;
    for (double fraction : a.fractions) {
        const auto split = ls::make_tuning_split(traj.samples(), fraction, a.seed);
        for (const auto& id : a.methods) {
            const auto& m = ls::find_method(id);
            const std::string tag = fmt::format("{}@{}", m.id, fraction);
            if (m.kind == ls::MethodKind::Ctrl) {
                ls::CtrlParams base;
                base.kmeans_seed = a.seed;
                const auto r = ls::search_ctrl(traj, labels.noisy, split, mask, *m.agreement, base);
                rows.push_back({tag,
                                fmt::format("W={} k={} s={}", r.params.num_windows, r.params.clusters, r.params.selected),
                                r.tuning_fnr, r.eval_fnr});
                continue;
            }
            ls::Aggregation agg{};
            if (m.kind == ls::MethodKind::Last) {
                agg = ls::Aggregation::Last;
            } else if (m.kind == ls::MethodKind::Mean) {
                agg = ls::Aggregation::Mean;
            } else if (m.kind == ls::MethodKind::MeanProb) {
                agg = ls::Aggregation::MeanProb;
            } else {
                throw ls::UnsupportedMethod(fmt::format("method '{}' has no tunable window on a trajectory", id));
            }
            const auto r = ls::search_window(traj, labels.noisy, agg, *m.agreement, split, mask);
            rows.push_back({tag, fmt::format("window={}:{}", r.window.start, r.window.end), r.tuning_fnr, r.eval_fnr});
        }
    }
    ls::write_tuning_report(rows, a.out);
    for (const auto& r : rows) {
        fmt::print("{:<24} {:<20} tuning {:.4f}  eval {:.4f}\n", r.method, r.param, r.tuning_fnr, r.eval_fnr);
    }
}

struct BenchArgs {
    std::string features;
    std::string labels;
    std::string config;
    std::vector<std::string> methods;
    std::vector<std::uint64_t> seeds{0};
    std::string noise_kind;
    double noise_rate = 0.2;
    std::size_t folds = 4;
    std::string out;
    std::string runs;
    bool quiet = false;
};

void cmd_bench(const BenchArgs& a) {
    const auto ds = load_dataset(a.features, a.labels);
    ls::BenchmarkConfig config;
    config.methods = a.methods;
    if (config.methods.empty()) {
        for (const auto& m : ls::list_methods()) {
            config.methods.push_back(m.id);
        }
    }
    config.seeds = a.seeds;
    config.trainer = load_trainer(a.config);
    config.folds = a.folds;
    if (!a.noise_kind.empty()) {
        config.noise = ls::NoiseSpec{ls::parse_noise_kind(a.noise_kind), a.noise_rate, 0};
    }
    const auto progress = [&](const std::string& line) {
        if (!a.quiet) {
            std::cerr << line << '\n';
        }
    };
    const auto results = ls::run_benchmark(ds, config, progress);
    ls::write_results_csv(results, a.out);
    if (!a.runs.empty()) {
        ls::write_runs_csv(results, a.runs);
    }
    fmt::print("{}", ls::format_results_table(results));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"labelsift: label-noise detection from training dynamics"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate Gaussian blobs on a simplex");
    s->add_option("--per-class", synth.per_class, "Samples per class")->required();
    s->add_option("--classes", synth.classes, "Number of classes")->required();
    s->add_option("--dims", synth.dims, "Feature dimensions (>= classes - 1)")->required();
    s->add_option("--spread", synth.spread, "Per-coordinate standard deviation")->required();
    s->add_option("--seed", synth.seed, "Random seed")->required();
    s->add_option("--features", synth.features, "Output features CSV")->required();
    s->add_option("--labels", synth.labels, "Output LLBL file")->required();

    IngestArgs ingest;
    auto* g = app.add_subcommand("ingest", "Load a CSV dataset and preprocess it");
    g->add_option("--csv", ingest.csv, "Input CSV with header")->required();
    g->add_option("--label-column", ingest.label_column, "Name of the label column")->required();
    g->add_option("--step", ingest.steps,
                  "Preprocessing step, applied in the given order: sample_rows:N, quantile_clip:LO,HI, "
                  "standard_scale, one_hot[:COL,...], drop_constant");
    g->add_option("--seed", ingest.seed, "Seed for sample_rows");
    g->add_option("--features", ingest.features, "Output features CSV")->required();
    g->add_option("--labels", ingest.labels, "Output LLBL file")->required();

    InjectArgs inject;
    auto* n = app.add_subcommand("inject", "Inject synthetic label noise");
    n->add_option("--labels", inject.labels, "Input LLBL (clean labels)")->required();
    n->add_option("--kind", inject.kind, "symmetric | pairflip");
    n->add_option("--rate", inject.rate, "Flip probability in [0, 1)")->required();
    n->add_option("--seed", inject.seed, "Random seed")->required();
    n->add_option("--out", inject.out, "Output LLBL with clean labels and mask")->required();
    n->add_option("--contingency", inject.contingency, "Optional K x K contingency CSV");

    TrainArgs trainargs;
    auto* t = app.add_subcommand("train", "Train the MLP and write its logit trajectory");
    t->add_option("--features", trainargs.features, "Features CSV")->required();
    t->add_option("--labels", trainargs.labels, "LLBL labels (noisy labels are trained on)")->required();
    t->add_option("--config", trainargs.config, "Run file (key = value)");
    t->add_option("--traj", trainargs.traj, "Output LTRJ trajectory")->required();
    t->add_option("--loss", trainargs.loss, "Optional per-epoch loss CSV");

    DetectArgs detect;
    auto* d = app.add_subcommand("detect", "Score samples with one detection method");
    d->add_option("--method", detect.method, "Method id (see `labelsift methods`)")->required();
    d->add_option("--traj", detect.traj, "LTRJ trajectory (in-sample methods)");
    d->add_option("--labels", detect.labels, "LLBL labels")->required();
    d->add_option("--features", detect.features, "Features CSV (confident learning)");
    d->add_option("--config", detect.config, "Run file for fold training (confident learning)");
    d->add_option("--window", detect.window, "Epoch window START:END (default: all epochs)");
    d->add_option("--folds", detect.folds, "Folds for confident learning");
    d->add_option("--seed", detect.seed, "Seed for folds / k-means");
    d->add_option("--ctrl-windows", detect.ctrl_windows, "CTRL time windows");
    d->add_option("--ctrl-clusters", detect.ctrl_clusters, "CTRL clusters per window");
    d->add_option("--ctrl-selected", detect.ctrl_selected, "CTRL high-loss clusters flagged");
    d->add_option("--out", detect.out, "Output scores CSV")->required();

    EvaluateArgs evaluate;
    auto* e = app.add_subcommand("evaluate", "FNR of a score file at a budget");
    e->add_option("--scores", evaluate.scores, "Scores CSV")->required();
    e->add_option("--labels", evaluate.labels, "LLBL with clean labels or mask")->required();
    e->add_option("--budget", evaluate.budget, "Budget in [0, 1] or 'eta' for the realized noise rate");
    e->add_option("--out", evaluate.out, "Optional outcome JSON");

    CurveArgs curve;
    auto* c = app.add_subcommand("curve", "Budget x FNR curve over all achievable budgets");
    c->add_option("--scores", curve.scores, "Scores CSV")->required();
    c->add_option("--labels", curve.labels, "LLBL with clean labels or mask")->required();
    c->add_option("--out", curve.out, "Output curve CSV")->required();

    TuneArgs tune;
    auto* u = app.add_subcommand("tune", "Search detection hyperparameters on a labelled tuning subset");
    u->add_option("--traj", tune.traj, "LTRJ trajectory")->required();
    u->add_option("--labels", tune.labels, "LLBL with clean labels or mask")->required();
    u->add_option("--method", tune.methods, "Method ids (Last/Mean/Mean-Prob/CTRL)")->required();
    u->add_option("--fraction", tune.fractions, "Tuning fractions (each <= 0.1)");
    u->add_option("--seed", tune.seed, "Split / k-means seed");
    u->add_option("--out", tune.out, "Output tuning report CSV")->required();

    BenchArgs bench;
    auto* b = app.add_subcommand("bench", "Benchmark methods across seeds");
    b->add_option("--features", bench.features, "Features CSV")->required();
    b->add_option("--labels", bench.labels, "LLBL labels")->required();
    b->add_option("--config", bench.config, "Run file (key = value)");
    b->add_option("--method", bench.methods, "Method ids (default: all 15)");
    b->add_option("--seed", bench.seeds, "Run seeds");
    b->add_option("--noise-kind", bench.noise_kind, "Inject symmetric | pairflip noise per seed");
    b->add_option("--noise-rate", bench.noise_rate, "Noise rate for --noise-kind");
    b->add_option("--folds", bench.folds, "Folds for confident learning");
    b->add_option("--out", bench.out, "Output results CSV")->required();
    b->add_option("--runs", bench.runs, "Optional per-run CSV");
    b->add_flag("--quiet", bench.quiet, "No progress on stderr");

    auto* m = app.add_subcommand("methods", "List method ids");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err);
    }

    try {
        if (s->parsed()) {
            cmd_synth(synth);
        } else if (g->parsed()) {
            cmd_ingest(ingest);
        } else if (n->parsed()) {
            cmd_inject(inject);
        } else if (t->parsed()) {
            cmd_train(trainargs);
        } else if (d->parsed()) {
            cmd_detect(detect);
        } else if (e->parsed()) {
            cmd_evaluate(evaluate);
        } else if (c->parsed()) {
            cmd_curve(curve);
        } else if (u->parsed()) {
            cmd_tune(tune);
        } else if (b->parsed()) {
            cmd_bench(bench);
        } else if (m->parsed()) {
            for (const auto& method : ls::list_methods()) {
                fmt::print("{}\n", method.id);
            }
        }
    } catch (const std::exception& ex) {
        std::cerr << "labelsift: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
