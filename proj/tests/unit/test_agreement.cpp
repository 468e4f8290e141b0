#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "labelsift/agreement.hpp"
#include "labelsift/random.hpp"

using namespace labelsift;

namespace {

using Vec = std::vector<double>;

// Direct definition: average of KL(p || m) and KL(e || m), m = (p + e) / 2.
double js_oracle(const Vec& probs, Label label) {
    double js = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        const double e = k == label ? 1.0 : 0.0;
        const double m = 0.5 * (probs[k] + e);
        if (probs[k] > 0.0) {
            js += 0.5 * probs[k] * std::log(probs[k] / m);
        }
        if (e > 0.0) {
            js += 0.5 * e * std::log(e / m);
        }
    }
    return js;
}

double ce_oracle(const Vec& logits, Label label) {
    double denom = 0.0;
    for (double z : logits) {
        denom += std::exp(z);
    }
    return -std::log(std::exp(logits[label]) / denom);
}

Vec random_logits(Rng& rng, std::size_t k, double scale) {
    Vec z(k);
    for (auto& v : z) {
        v = scale * rng.normal();
    }
    return z;
}

// Dense ranks with ties sharing the lowest rank; equal vectors <=> identical orderings up to ties.
std::vector<std::size_t> ranks(const Vec& values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    std::vector<std::size_t> rank(values.size());
    std::size_t r = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i > 0 && values[order[i]] != values[order[i - 1]]) {
            r = i;
        }
        rank[order[i]] = r;
    }
    return rank;
}

}  // namespace

TEST(Softmax, BasicCases) {
    const auto half = softmax(Vec{0, 0});
    EXPECT_DOUBLE_EQ(half[0], 0.5);
    EXPECT_DOUBLE_EQ(half[1], 0.5);
    for (double c : {-50.0, 0.0, 3.0, 700.0}) {
        const auto p = softmax(Vec{c, c, c, c});
        for (double v : p) {
            EXPECT_DOUBLE_EQ(v, 0.25);
        }
    }
    const auto big = softmax(Vec{1000, 0});
    EXPECT_TRUE(std::isfinite(big[0]) && std::isfinite(big[1]));
    EXPECT_NEAR(big[0], 1.0, 1e-15);
    EXPECT_GE(big[1], 0.0);
}

TEST(Softmax, SumsToOne) {
    Rng rng(1);
    for (int t = 0; t < 200; ++t) {
        const auto p = softmax(random_logits(rng, 2 + rng.below(20), 10.0));
        EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    }
}

TEST(CrossEntropy, HandValues) {
    EXPECT_NEAR(cross_entropy(Vec{0, 0}, 0), std::log(2.0), 1e-15);
    EXPECT_NEAR(cross_entropy(Vec{2, 5, 1}, 0), 3.065884, 1e-6);
    EXPECT_NEAR(cross_entropy(Vec{2, 5, 1}, 0), ce_oracle(Vec{2, 5, 1}, 0), 1e-12);
    // softmax[label] = 1 - eps  =>  CE ~ eps.
    const double ce = cross_entropy(Vec{20, 0}, 0);
    EXPECT_NEAR(ce, std::exp(-20.0), 1e-15);
    EXPECT_GE(cross_entropy(Vec{1e6, 0}, 0), 0.0);
}

TEST(JensenShannon, HandValues) {
    EXPECT_NEAR(jensen_shannon_probs(Vec{0.5, 0.5}, 0), 0.215762, 1e-6);
    EXPECT_NEAR(jensen_shannon_probs(Vec{0.5, 0.5}, 0), js_oracle(Vec{0.5, 0.5}, 0), 1e-12);
    EXPECT_NEAR(jensen_shannon_probs(Vec{1, 0, 0}, 0), 0.0, 1e-15);
    EXPECT_NEAR(jensen_shannon_probs(Vec{0, 1, 0}, 0), std::log(2.0), 1e-15);
}

TEST(JensenShannon, MatchesDefinitionOnRandomInputs) {
    Rng rng(2);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t k = 2 + rng.below(10);
        const auto z = random_logits(rng, k, 3.0);
        const auto label = static_cast<Label>(rng.below(k));
        const auto p = softmax(z);
        EXPECT_NEAR(jensen_shannon(z, label), js_oracle(p, label), 1e-9);
        EXPECT_NEAR(jensen_shannon_probs(p, label), js_oracle(p, label), 1e-9);
        const double v = jensen_shannon(z, label);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, std::log(2.0));
    }
}

TEST(LogitMargin, HandValues) {
    EXPECT_DOUBLE_EQ(logit_margin(Vec{2, 5, 1}, 0), 3.0);
    EXPECT_DOUBLE_EQ(logit_margin(Vec{4, 4}, 0), 0.0);
    EXPECT_DOUBLE_EQ(logit_margin(Vec{2, 5, 1}, 1), -3.0);
}

TEST(LogitMargin, ShiftInvariantAndEqualsNegativeLogRatio) {
    Rng rng(3);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t k = 2 + rng.below(8);
        auto z = random_logits(rng, k, 4.0);
        const auto label = static_cast<Label>(rng.below(k));
        const double m = logit_margin(z, label);
        const auto p = softmax(z);
        double best = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (c != label) {
                best = std::max(best, p[c]);
            }
        }
        EXPECT_NEAR(m, -std::log(p[label] / best), 1e-9);
        const double shift = rng.uniform(-100, 100);
        for (auto& v : z) {
            v += shift;
        }
        EXPECT_NEAR(logit_margin(z, label), m, 1e-9);
    }
}

TEST(Agreement, CeAndJsRankIdenticallyOnRandomVectors) {
    Rng rng(4);
    Vec ce;
    Vec js;
    for (int t = 0; t < 1000; ++t) {
        const auto z = random_logits(rng, 5, 3.0);
        const auto label = static_cast<Label>(rng.below(5));
        ce.push_back(cross_entropy(z, label));
        js.push_back(jensen_shannon(z, label));
    }
    EXPECT_EQ(ranks(ce), ranks(js));
}

TEST(Agreement, DispatchAndParsing) {
    const Vec z{0.3, -1.0, 2.0};
    EXPECT_EQ(agreement(AgreementFn::CE, z, 1), cross_entropy(z, 1));
    EXPECT_EQ(agreement(AgreementFn::JS, z, 1), jensen_shannon(z, 1));
    EXPECT_EQ(agreement(AgreementFn::LM, z, 1), logit_margin(z, 1));
    EXPECT_EQ(parse_agreement("CE"), AgreementFn::CE);
    EXPECT_EQ(parse_agreement("js"), AgreementFn::JS);
    EXPECT_EQ(parse_agreement("Lm"), AgreementFn::LM);
    EXPECT_EQ(to_string(AgreementFn::LM), "lm");
    EXPECT_THROW((void)parse_agreement("mae"), std::invalid_argument);
}
