#include <cmath>
#include <vector>

#include "doctest.h"
#include "mlenit/error.hpp"
#include "mlenit/metrics.hpp"
#include "mlenit/rng.hpp"

using namespace mlenit;

namespace {

ScoredSet make_set(std::vector<double> scores, std::vector<int> labels,
                   bool probabilistic = true) {
    return ScoredSet{std::move(scores), std::move(labels), "test", probabilistic};
}

// O(n_pos * n_neg) reference with half credit for ties.
double pairwise_auc(const ScoredSet& s) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
        if (s.labels[i] != 1) continue;
        for (std::size_t j = 0; j < s.scores.size(); ++j) {
            if (s.labels[j] != 0) continue;
            ++pairs;
            if (s.scores[i] > s.scores[j]) wins += 1.0;
            else if (s.scores[i] == s.scores[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("confusion counts use a strict threshold") {
    const ScoredSet s = make_set({0.5, 0.5000001, 0.49, 0.7}, {1, 1, 0, 0});
    const ConfusionCounts c = confusion_at_threshold(s, 0.5);
    CHECK(c.tp == 1);  // only 0.5000001 clears the bar
    CHECK(c.fn == 1);  // 0.5 itself is a negative call
    CHECK(c.fp == 1);  // 0.7
    CHECK(c.tn == 1);  // 0.49
    CHECK(c.total() == 4);
}

TEST_CASE("metric report reproduces balanced accuracy from sens/spec") {
    ConfusionCounts c;
    c.tp = 71;
    c.fn = 29;
    c.tn = 79;
    c.fp = 21;
    const MetricReport r = metric_report(c);
    REQUIRE(r.sensitivity.has_value());
    REQUIRE(r.specificity.has_value());
    REQUIRE(r.thresholded_auc.has_value());
    CHECK(*r.sensitivity == doctest::Approx(0.71).epsilon(1e-12));
    CHECK(*r.specificity == doctest::Approx(0.79).epsilon(1e-12));
    CHECK(*r.thresholded_auc == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(*r.accuracy == doctest::Approx(150.0 / 200.0).epsilon(1e-12));
    const double f1 = 2.0 * 71 / (2.0 * 71 + 21 + 29);
    CHECK(*r.f1 == doctest::Approx(f1).epsilon(1e-12));
}

TEST_CASE("metrics with an empty class stay unset instead of NaN") {
    ConfusionCounts c;
    c.tn = 5;
    c.fp = 5;
    const MetricReport r = metric_report(c);
    CHECK_FALSE(r.sensitivity.has_value());
    CHECK(r.specificity.has_value());
    CHECK_FALSE(r.thresholded_auc.has_value());
    ConfusionCounts zero;
    CHECK_THROWS_AS(metric_report(zero), DataError);
}

TEST_CASE("probability AUC endpoints and tie handling") {
    CHECK(probability_auc(make_set({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0})) == 1.0);
    CHECK(probability_auc(make_set({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0})) == 0.0);
    CHECK(probability_auc(make_set({0.5, 0.5, 0.5}, {1, 0, 1})) == 0.5);
    const ScoredSet tied = make_set({0.9, 0.9, 0.5, 0.5, 0.3, 0.1}, {1, 0, 1, 0, 1, 0});
    CHECK(probability_auc(tied) == doctest::Approx(5.0 / 9.0).epsilon(1e-14));
    CHECK(probability_auc(tied) == doctest::Approx(0.55555555555555558).epsilon(1e-14));
    CHECK_THROWS_WITH_AS(probability_auc(make_set({0.1, 0.2}, {1, 1})),
                         doctest::Contains("AUC undefined"), DataError);
}

TEST_CASE("rank AUC equals brute-force pairwise AUC on random tied sets") {
    Rng rng(31);
    for (int it = 0; it < 200; ++it) {
        const std::size_t n = 2 + rng.below(40);
        std::vector<double> scores;
        std::vector<int> labels;
        bool has0 = false, has1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            scores.push_back(static_cast<double>(rng.below(8)) / 8.0);  // force ties
            const int y = static_cast<int>(rng.below(2));
            labels.push_back(y);
            (y == 1 ? has1 : has0) = true;
        }
        if (!has0 || !has1) continue;
        const ScoredSet s = make_set(scores, labels);
        CHECK(probability_auc(s) == doctest::Approx(pairwise_auc(s)).epsilon(1e-12));
    }
}

TEST_CASE("roc curve shape, endpoints, and trapezoid area") {
    const ScoredSet s = make_set({0.9, 0.8, 0.8, 0.3}, {1, 1, 0, 0});
    const std::vector<RocPoint> curve = roc_curve(s);
    REQUIRE(curve.size() == 4);  // (0,0) + three distinct scores
    CHECK(curve.front().fpr == 0.0);
    CHECK(curve.front().tpr == 0.0);
    CHECK(std::isinf(curve.front().threshold));
    CHECK(curve[1].fpr == 0.0);
    CHECK(curve[1].tpr == 0.5);
    CHECK(curve[2].fpr == 0.5);
    CHECK(curve[2].tpr == 1.0);
    CHECK(curve.back().fpr == 1.0);
    CHECK(curve.back().tpr == 1.0);
    CHECK(trapezoid_area(curve) == doctest::Approx(0.875).epsilon(1e-12));
    CHECK(trapezoid_area(curve) == doctest::Approx(probability_auc(s)).epsilon(1e-12));
}

TEST_CASE("trapezoid area equals rank AUC on random sets") {
    Rng rng(77);
    for (int it = 0; it < 100; ++it) {
        const std::size_t n = 2 + rng.below(60);
        std::vector<double> scores;
        std::vector<int> labels;
        bool has0 = false, has1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            scores.push_back(static_cast<double>(rng.below(10)) / 10.0);
            const int y = static_cast<int>(rng.below(2));
            labels.push_back(y);
            (y == 1 ? has1 : has0) = true;
        }
        if (!has0 || !has1) continue;
        const ScoredSet s = make_set(scores, labels);
        CHECK(trapezoid_area(roc_curve(s)) == doctest::Approx(probability_auc(s)).epsilon(1e-12));
    }
}

TEST_CASE("binarized rank AUC equals balanced accuracy at the same threshold") {
    Rng rng(13);
    for (int it = 0; it < 100; ++it) {
        const std::size_t n = 4 + rng.below(50);
        std::vector<double> scores;
        std::vector<int> labels;
        bool has0 = false, has1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            scores.push_back(rng.uniform());
            const int y = static_cast<int>(rng.below(2));
            labels.push_back(y);
            (y == 1 ? has1 : has0) = true;
        }
        if (!has0 || !has1) continue;
        const ScoredSet s = make_set(scores, labels);
        const double t = rng.uniform(0.1, 0.9);
        const ConfusionCounts c = confusion_at_threshold(s, t);
        const double sens = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
        const double spec = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
        CHECK(probability_auc(binarize(s, t)) ==
              doctest::Approx(0.5 * (sens + spec)).epsilon(1e-12));
    }
}

TEST_CASE("scored-set validation rejects malformed inputs") {
    CHECK_THROWS_AS(validate_scored_set(make_set({}, {}), true), DataError);
    CHECK_THROWS_AS(validate_scored_set(make_set({0.5, 0.2}, {1}), true), DataError);
    CHECK_THROWS_AS(validate_scored_set(make_set({std::nan("")}, {1}), true), DataError);
    CHECK_THROWS_AS(validate_scored_set(make_set({1.2}, {1}), true), DataError);
    CHECK_THROWS_AS(validate_scored_set(make_set({0.5}, {2}), true), DataError);
    CHECK_NOTHROW(validate_scored_set(make_set({4.7}, {1}, false), true));  // raw score axis
    CHECK_NOTHROW(validate_scored_set(make_set({0.5}, {}), false));
    CHECK_THROWS_AS(validate_scored_set(make_set({0.5}, {}), true), DataError);
}
