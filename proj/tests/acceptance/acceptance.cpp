// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <string>
#include <vector>

#include <fmt/core.h>
#include <fmt/ranges.h>
#include <unistd.h>

#include "labelsift/aggregation.hpp"
#include "labelsift/agreement.hpp"
#include "labelsift/benchmark.hpp"
#include "labelsift/confident.hpp"
#include "labelsift/dataset.hpp"
#include "labelsift/metrics.hpp"
#include "labelsift/noise.hpp"
#include "labelsift/random.hpp"
#include "labelsift/trainer.hpp"

namespace fs = std::filesystem;
using namespace labelsift;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

const fs::path kData = LABELSIFT_DATA_DIR;

std::vector<std::uint64_t> three_seeds() { return {0, 1, 2}; }

// Benchmark results are shared by the Letter criteria.
const BenchmarkResults& letter_results() {
    static const BenchmarkResults results = [] {
        PreprocessSpec spec;
        spec.steps = {preprocess::SampleRows{15000}, preprocess::QuantileClip{0.01, 0.99, {}},
                      preprocess::StandardScale{}};
        const auto ds = load_csv_dataset(kData / "letter.csv", "lettr", spec, 0);
        BenchmarkConfig config;
        config.methods = {"mean-lm", "mean_prob-lm", "last-ce_js"};
        config.seeds = three_seeds();
        config.noise = NoiseSpec{NoiseKind::Symmetric, 0.2, 0};
        config.trainer.hidden = {128};
        config.trainer.optimizer = OptimizerKind::Adam;
        config.trainer.lr = 1e-3;
        config.trainer.weight_decay = 0.0;
        config.trainer.batch_size = 1024;
        config.trainer.epochs = 785;
        return run_benchmark(ds, config);
    }();
    return results;
}

double pct(double fraction) { return 100.0 * fraction; }

Verdict letter_mean_lm() {
    const double fnr = pct(letter_results().find("mean-lm").mean_fnr);
    const double se = pct(letter_results().find("mean-lm").se_fnr);
    return {std::abs(fnr - 3.03) <= 2.0,
            fmt::format("Letter mean-lm FNR(eta) {:.2f} +- {:.2f}% over 3 seeds; target 3.03 +- 2.0", fnr, se)};
}

Verdict mushroom_mean_ce() {
    PreprocessSpec spec;
    spec.steps = {preprocess::SampleRows{4233}, preprocess::DropConstant{}, preprocess::OneHot{},
                  preprocess::StandardScale{}};
    const auto ds = load_csv_dataset(kData / "mushroom.csv", "class", spec, 0);
    BenchmarkConfig config;
    config.methods = {"mean-ce"};
    config.seeds = three_seeds();
    config.noise = NoiseSpec{NoiseKind::Symmetric, 0.2, 0};
    config.trainer.hidden = {512};
    config.trainer.lr = 1e-4;
    config.trainer.weight_decay = 1e-3;
    config.trainer.batch_size = 1024;
    config.trainer.epochs = 344;
    const auto r = run_benchmark(ds, config);
    const double fnr = pct(r.find("mean-ce").mean_fnr);
    return {fnr <= 2.0, fmt::format("Mushroom mean-ce FNR(eta) {:.2f} +- {:.2f}%; bound <= 2.0", fnr,
                                    pct(r.find("mean-ce").se_fnr))};
}

Verdict ordering() {
    const auto& letter = letter_results();
    const double l_prob = pct(letter.find("mean_prob-lm").mean_fnr);
    const double l_last = pct(letter.find("last-ce_js").mean_fnr);

    const auto blobs = synth_blobs(1000, 5, 4, 1.0, 0);
    BenchmarkConfig config;
    config.methods = {"mean_prob-lm", "last-ce_js"};
    config.seeds = three_seeds();
    config.noise = NoiseSpec{NoiseKind::Pairflip, 0.2, 0};
    config.trainer.epochs = 100;
    config.trainer.batch_size = 128;
    config.trainer.lr = 1e-3;
    const auto r = run_benchmark(blobs, config);
    const double b_prob = pct(r.find("mean_prob-lm").mean_fnr);
    const double b_last = pct(r.find("last-ce_js").mean_fnr);
    return {l_prob <= l_last && b_prob <= b_last,
            fmt::format("mean_prob-lm vs last-ce_js: Letter {:.2f} <= {:.2f}, blobs {:.2f} <= {:.2f}", l_prob,
                        l_last, b_prob, b_last)};
}

// No pair of samples is ordered strictly one way by `a` and strictly the
// other way by `b`; ties in either are allowed.
bool same_order(const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a.size(); ++j) {
            if ((a[i] < a[j] && b[i] > b[j]) || (b[i] < b[j] && a[i] > a[j])) {
                return false;
            }
        }
    }
    return true;
}

Verdict ce_js_identity() {
    Rng rng(2024);
    std::size_t mismatches = 0;
    const std::size_t trials = 1000;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t e = 1 + rng.below(8);
        const std::size_t n = 20 + rng.below(40);
        const std::size_t k = 2 + rng.below(8);
        const double scale = 0.5 + 8.0 * rng.uniform();
        std::vector<float> values(e * n * k);
        for (auto& v : values) {
            v = static_cast<float>(scale * rng.normal());
        }
        const LogitTrajectory traj(e, n, k, std::move(values));
        Labels y(n);
        for (auto& v : y) {
            v = static_cast<Label>(rng.below(k));
        }
        const std::size_t start = rng.below(e);
        const EpochWindow w{start, start + 1 + rng.below(e - start)};
        mismatches += same_order(aggregate_last(traj, y, AgreementFn::CE, w).scores,
                                 aggregate_last(traj, y, AgreementFn::JS, w).scores)
                          ? 0
                          : 1;
        mismatches += same_order(aggregate_mean_prob(traj, y, AgreementFn::CE, w).scores,
                                 aggregate_mean_prob(traj, y, AgreementFn::JS, w).scores)
                          ? 0
                          : 1;

        // SWA needs parameters: train a small net for every trial.
        auto ds = synth_blobs(5 + rng.below(10), k, k, 0.5 + rng.uniform(), rng.next());
        MlpConfig config;
        config.hidden = {4 + rng.below(8)};
        config.epochs = e + 1;
        config.batch_size = 16;
        config.lr = 1e-2;
        config.seed = rng.next();
        TrainOptions options;
        options.keep_trajectory = false;
        options.keep_snapshots = true;
        const auto run = train(ds, config, options);
        const EpochWindow sw{start, std::min(w.end + 1, run.epochs)};
        mismatches += same_order(aggregate_swa(run, ds.features, ds.labels.noisy, AgreementFn::CE, sw).scores,
                                 aggregate_swa(run, ds.features, ds.labels.noisy, AgreementFn::JS, sw).scores)
                          ? 0
                          : 1;
    }
    return {mismatches == 0,
            fmt::format("{} trajectories x (Last, Mean-Probability, SWA): {} ranking mismatches", trials, mismatches)};
}

Verdict metric_oracle() {
    Rng rng(77);
    std::size_t instances = 0;
    std::size_t mismatches = 0;
    for (std::size_t n = 1; n <= 8; ++n) {
        for (std::uint32_t bits = 1; bits < (1U << n); ++bits) {
            NoiseMask mask(n);
            for (std::size_t i = 0; i < n; ++i) {
                mask[i] = (bits >> i) & 1U;
            }
            std::vector<double> scores(n);
            for (auto& s : scores) {
                s = rng.uniform();
            }
            // Oracle: count how many samples outscore each one.
            const std::size_t noisy = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
            for (std::size_t k = 0; k <= n; ++k) {
                std::size_t caught = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    std::size_t above = 0;
                    for (std::size_t j = 0; j < n; ++j) {
                        above += scores[j] > scores[i] ? 1 : 0;
                    }
                    caught += (above < k && mask[i] != 0) ? 1 : 0;
                }
                const double oracle = static_cast<double>(noisy - caught) / static_cast<double>(noisy);
                const auto got = fnr_at_budget(scores, mask, static_cast<double>(k) / static_cast<double>(n));
                mismatches += got.fnr == oracle && got.tp == caught ? 0 : 1;
                ++instances;
            }
        }
    }
    return {instances >= 1000 && mismatches == 0,
            fmt::format("{} exhaustive instances (N <= 8, all masks, all k/N): {} mismatches", instances, mismatches)};
}

Verdict curve_invariants() {
    Rng rng(5);
    bool monotone = true;
    bool endpoints = true;
    bool ideal_exact = true;
    const std::size_t n = 1000;
    const std::size_t seeds = 100;
    std::vector<double> budgets;
    for (std::size_t k = 0; k <= n; k += 10) {
        budgets.push_back(static_cast<double>(k) / static_cast<double>(n));
    }
    std::vector<double> mean_fnr(budgets.size(), 0.0);
    for (std::size_t s = 0; s < seeds; ++s) {
        NoiseMask mask(n);
        std::vector<double> random_scores(n);
        std::vector<double> ideal_scores(n);
        for (std::size_t i = 0; i < n; ++i) {
            mask[i] = rng.uniform() < 0.2 ? 1 : 0;
            random_scores[i] = rng.uniform();
            ideal_scores[i] = mask[i] + 0.5 * rng.uniform();
        }
        if (std::count(mask.begin(), mask.end(), 1) == 0) {
            mask[0] = 1;
        }
        const auto curve = fnr_curve(random_scores, mask, budgets);
        for (std::size_t b = 0; b < budgets.size(); ++b) {
            mean_fnr[b] += curve.points[b].fnr / static_cast<double>(seeds);
            if (b > 0 && curve.points[b].fnr > curve.points[b - 1].fnr) {
                monotone = false;
            }
        }
        endpoints = endpoints && curve.points.front().fnr == 1.0 && curve.points.back().fnr == 0.0;
        const auto all = fnr_curve(ideal_scores, mask);
        for (const auto& p : all.points) {
            ideal_exact = ideal_exact && std::abs(p.fnr - ideal_fnr(p.budget, all.eta)) <= 1e-12;
        }
    }
    double worst = 0.0;
    for (std::size_t b = 0; b < budgets.size(); ++b) {
        worst = std::max(worst, std::abs(mean_fnr[b] - (1.0 - budgets[b])));
    }
    return {monotone && endpoints && ideal_exact && worst <= 0.05,
            fmt::format("monotone={} endpoints={} ideal_exact={} random max |mean FNR - (1-b)| = {:.4f} (<= 0.05)",
                        monotone, endpoints, ideal_exact, worst)};
}

Verdict confident_hand() {
    OutOfSampleProbs oos;
    oos.probs.resize(4, 2);
    oos.probs << 0.9, 0.1, 0.6, 0.4, 0.2, 0.8, 0.4, 0.6;
    oos.fold_id = {0, 1, 2, 3};
    const Labels y{0, 0, 1, 1};
    const auto joint = confident_joint(oos, y);
    const bool thresholds =
        std::abs(joint.thresholds[0] - 0.75) <= 1e-12 && std::abs(joint.thresholds[1] - 0.70) <= 1e-12;
    const bool counts = joint.counts == std::vector<std::size_t>{1, 0, 0, 1};
    return {thresholds && counts,
            fmt::format("thresholds [{:.4f}, {:.4f}], counts [[{}, {}], [{}, {}]]", joint.thresholds[0],
                        joint.thresholds[1], joint.at(0, 0), joint.at(0, 1), joint.at(1, 0), joint.at(1, 1))};
}

Verdict gradient_check() {
    MlpConfig one;
    one.hidden = {8};
    MlpConfig two;
    two.hidden = {5, 4};
    const auto a = loss_gradient_check(one, 5, 4, 12);
    const auto b = loss_gradient_check(two, 4, 3, 12);
    const bool pass = a.passed && b.passed && a.parameter_count <= 100 && b.parameter_count <= 100 &&
                      a.max_relative_error <= 1e-4 && b.max_relative_error <= 1e-4 && a.checked > 0 &&
                      b.checked > 0;
    return {pass, fmt::format("{}; {}", a.summary(), b.summary())};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict bench_determinism() {
    const fs::path dir = fs::temp_directory_path() / fmt::format("labelsift_acceptance_{}", ::getpid());
    fs::create_directories(dir);
    const auto ds = synth_blobs(60, 4, 4, 1.0, 3);
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
        names.push_back(fmt::format("x{}", j));
    }
    write_features_csv(ds.features, names, dir / "x.csv");
    write_labels(ds.labels, dir / "y.llbl");
    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "hidden = 16\nepochs = 16\nbatch_size = 32\nlr = 0.01\n";
    }
    const auto command = [&](const std::string& tag) {
        return fmt::format("'{}' bench --quiet --features '{}' --labels '{}' --config '{}' --noise-kind symmetric "
                           "--noise-rate 0.2 --seed 0 --seed 1 --folds 3 --out '{}' --runs '{}' > '{}'",
                           LABELSIFT_CLI_PATH, (dir / "x.csv").string(), (dir / "y.llbl").string(),
                           (dir / "run.cfg").string(), (dir / (tag + "_results.csv")).string(),
                           (dir / (tag + "_runs.csv")).string(), (dir / (tag + "_stdout.txt")).string());
    };
    const int ra = std::system(command("a").c_str());
    const int rb = std::system(command("b").c_str());
    const bool ok = ra == 0 && rb == 0;
    const bool same = ok && slurp(dir / "a_results.csv") == slurp(dir / "b_results.csv") &&
                      slurp(dir / "a_runs.csv") == slurp(dir / "b_runs.csv") &&
                      slurp(dir / "a_stdout.txt") == slurp(dir / "b_stdout.txt");
    const auto rows = std::count(std::istreambuf_iterator<char>(std::ifstream(dir / "a_runs.csv").rdbuf()),
                                 std::istreambuf_iterator<char>(), '\n');
    fs::remove_all(dir);
    return {same && rows == 31, fmt::format("bench over 15 methods x 2 seeds run twice: exit {} / {}, {} per-run rows, "
                                            "outputs {}",
                                            ra, rb, rows - 1, same ? "byte-identical" : "DIFFER")};
}

Verdict reference_op_toy() {
    const std::vector<double> reference{0, 0, 1, 0, 0, 1};
    const std::vector<double> scores{0.1, 0.9, 0.4, 0.8, 0.2, 0.3};
    const NoiseMask mask{0, 1, 0, 1, 1, 0};
    const auto out = fnr_at_reference_op(scores, mask, reference);
    const auto ref_self = fnr_at_reference_op(reference, mask, reference);
    std::vector<std::size_t> selected = out.selected;
    std::sort(selected.begin(), selected.end());
    const bool pass = std::abs(out.budget - 1.0 / 3.0) <= 1e-12 && selected == std::vector<std::size_t>{1, 3} &&
                      std::abs(out.fnr - 1.0 / 3.0) <= 1e-12 && ref_self.fnr == 1.0;
    return {pass, fmt::format("budget {:.4f}, selected {{{}}}, FNR {:.4f}; reference itself FNR {:.4f}", out.budget,
                              fmt::join(selected, ","), out.fnr, ref_self.fnr)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"letter-mean-lm", letter_mean_lm},
        {"mushroom-mean-ce", mushroom_mean_ce},
        {"ordering-mean_prob-vs-last", ordering},
        {"ce-js-rank-identity", ce_js_identity},
        {"metric-oracle", metric_oracle},
        {"curve-invariants", curve_invariants},
        {"confident-joint-hand", confident_hand},
        {"gradient-check", gradient_check},
        {"bench-determinism", bench_determinism},
        {"reference-op-toy", reference_op_toy},
    };
    int failed = 0;
    std::size_t index = 0;
    for (const auto& [name, check] : criteria) {
        ++index;
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, fmt::format("exception: {}", e.what())};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += v.pass ? 0 : 1;
        std::printf("%s [%zu] %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", index, name.c_str(), v.detail.c_str(),
                    secs);
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed == 0 ? 0 : 1;
}
