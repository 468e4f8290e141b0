#include <array>
#include <cstdio>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "labelsift/aggregation.hpp"
#include "labelsift/dataset.hpp"
#include "labelsift/metrics.hpp"
#include "labelsift/noise.hpp"
#include "labelsift/trajectory.hpp"
#include "test_util.hpp"

using namespace labelsift;
using labelsift::testing::read_bytes;
using labelsift::testing::read_text;
using labelsift::testing::TempDir;
using labelsift::testing::write_text;

namespace {

struct Result {
    int status = -1;
    std::string out;
    std::string err;
};

Result run(const TempDir& dir, const std::string& args) {
    const auto err_path = dir / "stderr.txt";
    const std::string cmd = std::string(LABELSIFT_CLI_PATH) + " " + args + " 2>" + err_path.string();
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) {
        return r;
    }
    std::array<char, 4096> buf{};
    std::size_t got = 0;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) {
        r.out.append(buf.data(), got);
    }
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.err = read_text(err_path);
    return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

class Cli : public ::testing::Test {
protected:
    TempDir dir;

    void SetUp() override {
        write_text(dir / "run.cfg", "hidden = 8\nepochs = 10\nbatch_size = 32\nlr = 0.01\n");
        ASSERT_EQ(run(dir, "synth --per-class 40 --classes 3 --dims 3 --spread 1.0 --seed 1 --features " +
                               q(dir / "x.csv") + " --labels " + q(dir / "clean.llbl"))
                      .status,
                  0);
        const auto r = run(dir, "inject --labels " + q(dir / "clean.llbl") + " --rate 0.2 --seed 2 --out " +
                                    q(dir / "noisy.llbl") + " --contingency " + q(dir / "cont.csv"));
        ASSERT_EQ(r.status, 0) << r.err;
        ASSERT_NE(r.out.find("realized noise rate"), std::string::npos);
    }
};

}  // namespace

TEST_F(Cli, TrainDetectEvaluatePipeline) {
    auto r = run(dir, "train --features " + q(dir / "x.csv") + " --labels " + q(dir / "noisy.llbl") + " --config " +
                          q(dir / "run.cfg") + " --traj " + q(dir / "t.ltrj") + " --loss " + q(dir / "loss.csv"));
    ASSERT_EQ(r.status, 0) << r.err;
    const auto traj = read_trajectory(dir / "t.ltrj");
    EXPECT_EQ(traj.epochs(), 10u);
    EXPECT_EQ(traj.samples(), 120u);
    EXPECT_EQ(traj.classes(), 3u);

    r = run(dir, "detect --method mean-lm --window 2:10 --traj " + q(dir / "t.ltrj") + " --labels " +
                     q(dir / "noisy.llbl") + " --out " + q(dir / "s.csv"));
    ASSERT_EQ(r.status, 0) << r.err;
    const auto labels = read_labels(dir / "noisy.llbl");
    const auto scores = read_scores_csv(dir / "s.csv");
    EXPECT_EQ(scores.method_id, "mean-lm");
    EXPECT_EQ(scores.scores, aggregate_mean(traj, labels.noisy, AgreementFn::LM, {2, 10}).scores);

    r = run(dir, "evaluate --scores " + q(dir / "s.csv") + " --labels " + q(dir / "noisy.llbl") + " --out " +
                     q(dir / "e.json"));
    ASSERT_EQ(r.status, 0) << r.err;
    const auto mask = labels.resolved_mask();
    const auto expected = fnr_at_budget(scores.scores, mask, noise_rate(mask));
    const auto json = nlohmann::json::parse(read_text(dir / "e.json"));
    EXPECT_EQ(json["method_id"], "mean-lm");
    EXPECT_DOUBLE_EQ(json["fnr"].get<double>(), expected.fnr);
    EXPECT_EQ(json["tp"].get<std::size_t>(), expected.tp);
    EXPECT_EQ(r.out.rfind("FNR ", 0), 0u);

    r = run(dir, "curve --scores " + q(dir / "s.csv") + " --labels " + q(dir / "noisy.llbl") + " --out " +
                     q(dir / "c.csv"));
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_EQ(read_text(dir / "c.csv").rfind("budget,fnr", 0), 0u);
}

TEST_F(Cli, DetectConfidentLearningAndTune) {
    auto r = run(dir, "detect --method cl-pbnr --features " + q(dir / "x.csv") + " --labels " +
                          q(dir / "noisy.llbl") + " --config " + q(dir / "run.cfg") + " --folds 3 --out " +
                          q(dir / "cl.csv"));
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_EQ(read_scores_csv(dir / "cl.csv").scores.size(), 120u);

    ASSERT_EQ(run(dir, "train --features " + q(dir / "x.csv") + " --labels " + q(dir / "noisy.llbl") +
                           " --config " + q(dir / "run.cfg") + " --traj " + q(dir / "t.ltrj"))
                  .status,
              0);
    r = run(dir, "tune --traj " + q(dir / "t.ltrj") + " --labels " + q(dir / "noisy.llbl") +
                     " --method mean-ce --method last-lm --fraction 0.1 --out " + q(dir / "tune.csv"));
    ASSERT_EQ(r.status, 0) << r.err;
    const auto report = read_text(dir / "tune.csv");
    EXPECT_NE(report.find("mean-ce@0.1"), std::string::npos);
    EXPECT_NE(report.find("last-lm@0.1"), std::string::npos);
}

TEST_F(Cli, FailuresExitNonZeroWithOneLine) {
    for (const auto& args : std::vector<std::string>
         {"evaluate --scores " + q(dir / "missing.csv") + " --labels " + q(dir / "noisy.llbl"),
          "detect --method median-ce --traj " + q(dir / "none.ltrj") + " --labels " + q(dir / "noisy.llbl") +
              " --out " + q(dir / "o.csv"),
          "train --features " + q(dir / "x.csv") + " --labels " + q(dir / "noisy.llbl") + " --traj " +
              q(dir / "bad.ltrj") + " --config " + q(dir / "cont.csv")}) {
        const auto r = run(dir, args);
        EXPECT_NE(r.status, 0) << args;
        ASSERT_FALSE(r.err.empty()) << args;
        EXPECT_EQ(r.err.find('\n'), r.err.size() - 1) << r.err;
        EXPECT_EQ(r.err.rfind("labelsift: ", 0), 0u) << r.err;
    }
}

TEST_F(Cli, BenchIsByteReproducible) {
    const std::string common = "bench --quiet --features " + q(dir / "x.csv") + " --labels " +
                               q(dir / "clean.llbl") + " --config " + q(dir / "run.cfg") +
                               " --noise-kind symmetric --noise-rate 0.2 --seed 0 --seed 1"
                               " --method mean-lm --method ctrl-ce --method cl-cc --folds 3";
    const auto a = run(dir, common + " --out " + q(dir / "a.csv") + " --runs " + q(dir / "ar.csv"));
    const auto b = run(dir, common + " --out " + q(dir / "b.csv") + " --runs " + q(dir / "br.csv"));
    ASSERT_EQ(a.status, 0) << a.err;
    ASSERT_EQ(b.status, 0) << b.err;
    EXPECT_EQ(read_bytes(dir / "a.csv"), read_bytes(dir / "b.csv"));
    EXPECT_EQ(read_bytes(dir / "ar.csv"), read_bytes(dir / "br.csv"));
    EXPECT_EQ(a.out, b.out);
    EXPECT_TRUE(a.err.empty());
}
