#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "mlenit/calibration.hpp"
#include "mlenit/cohort.hpp"
#include "mlenit/error.hpp"
#include "mlenit/evalharness.hpp"
#include "mlenit/metrics.hpp"
#include "mlenit/rng.hpp"
#include "mlenit/sdnn.hpp"

using namespace mlenit;

namespace {

ScoredSet random_set(std::size_t n, std::uint64_t seed) {
    ScoredSet s;
    s.source = "rand";
    s.probabilistic = true;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        s.scores.push_back(rng.uniform(0.0, 1.0));
        s.labels.push_back(static_cast<int>(rng.below(2)));
    }
    return s;
}

// A fixed network that reads only the standardized AST column:
// prob = sigmoid(4 * z_ast). Every other input column is dead weight.
SdnnModel ast_only_model() {
    SdnnModel m;
    m.architecture = {5, {3, 3}, 1};
    m.params.layers.push_back({3, 5,
                               {0, 0, 1, 0, 0,
                                0, 0, -1, 0, 0,
                                0, 0, 0, 0, 0},
                               {0, 0, 0}});
    m.params.layers.push_back({3, 3,
                               {1, 0, 0,
                                0, 1, 0,
                                0, 0, 0},
                               {0, 0, 0}});
    m.params.layers.push_back({1, 3, {4, -4, 0}, {0}});
    m.standardizer.features.assign(kAllFeatures.begin(), kAllFeatures.end());
    m.standardizer.means = {55.0, 2.0, 55.0, 200.0, 60.0};
    m.standardizer.sds = {10.0, 1.0, 15.0, 40.0, 20.0};
    return m;
}

Cohort ast_signal_cohort(std::size_t n, std::uint64_t seed) {
    Cohort c;
    c.name = "ast-signal";
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        PatientRecord r;
        const int y = i % 2 == 0 ? 1 : 0;
        r.age = 50.0 + rng.uniform(-10, 10);
        r.ast = (y == 1 ? 70.0 : 40.0) + rng.uniform(-5, 5);
        r.alt = 40.0 + rng.uniform(-10, 10);
        r.plt = 210.0 + rng.uniform(-40, 40);
        r.fib4 = compute_fib4(r.age, r.ast, r.alt, r.plt);
        r.label = y;
        c.records.push_back(r);
    }
    return c;
}

// AST carries the class signal; fib4 is forced to pure class-independent
// noise by back-solving age. The identity fib4 = age*ast/(plt*sqrt(alt))
// always lets a strong enough model reconstruct AST from the rest, so the
// nuisance columns get wide multiplicative spreads: the reconstruction is
// then heavily nonlinear in standardized raw space and out of reach of the
// small, briefly trained network, while the direct AST channel stays easy.
Cohort ablation_cohort(std::size_t n, std::uint64_t seed) {
    Cohort c;
    c.name = "ablate";
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        PatientRecord r;
        const int y = i % 2 == 0 ? 1 : 0;
        r.ast = (60.0 + 30.0 * y) * std::exp(rng.normal() * 0.1);
        r.plt = 200.0 * std::exp(rng.normal() * 0.4);
        r.alt = 60.0 * std::exp(rng.normal() * 0.5);
        const double noise = std::exp(rng.normal() * 0.8);
        r.age = 2.0 * noise * r.plt * std::sqrt(r.alt) / r.ast;
        r.fib4 = compute_fib4(r.age, r.ast, r.alt, r.plt);
        r.label = y;
        c.records.push_back(r);
    }
    return c;
}

}  // namespace

TEST_CASE("statistic names round trip") {
    CHECK(statistic_from_name("thresholded_auc") == StatisticKind::ThresholdedAuc);
    CHECK(statistic_from_name("probability_auc") == StatisticKind::ProbabilityAuc);
    CHECK(statistic_from_name("brier") == StatisticKind::Brier);
    CHECK(std::string(statistic_name(StatisticKind::Brier)) == "brier");
    CHECK_THROWS_AS(statistic_from_name("f1"), UsageError);
}

TEST_CASE("evaluate_statistic matches the underlying metrics") {
    const ScoredSet s = random_set(100, 42);
    const ConfusionCounts c = confusion_at_threshold(s, 0.3);
    const double sens = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    const double spec = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    CHECK(evaluate_statistic(s, StatisticKind::ThresholdedAuc, 0.3) ==
          doctest::Approx((sens + spec) / 2.0).epsilon(1e-15));
    CHECK(evaluate_statistic(s, StatisticKind::ProbabilityAuc, 0.5) == probability_auc(s));
    CHECK(evaluate_statistic(s, StatisticKind::Brier, 0.5) == brier(s));

    ScoredSet single = s;
    std::fill(single.labels.begin(), single.labels.end(), 1);
    CHECK_THROWS_AS(evaluate_statistic(single, StatisticKind::ThresholdedAuc, 0.5), DataError);
    CHECK_THROWS_AS(evaluate_statistic(single, StatisticKind::ProbabilityAuc, 0.5), DataError);
    CHECK_NOTHROW(evaluate_statistic(single, StatisticKind::Brier, 0.5));

    ScoredSet raw = s;
    raw.probabilistic = false;
    CHECK_THROWS_AS(evaluate_statistic(raw, StatisticKind::Brier, 0.5), DataError);
}

TEST_CASE("bootstrap on a perfectly separated set pins the interval at 1") {
    ScoredSet s;
    s.source = "perfect";
    s.probabilistic = true;
    for (int i = 0; i < 200; ++i) {
        s.labels.push_back(i < 100 ? 1 : 0);
        s.scores.push_back(i < 100 ? 0.9 : 0.1);
    }
    const BootstrapResult r =
        bootstrap_ci(s, StatisticKind::ProbabilityAuc, 0.5, 200, 31);
    CHECK(r.point == 1.0);
    CHECK(r.lo == 1.0);
    CHECK(r.hi == 1.0);
    CHECK(r.b_requested == 200);
    CHECK(r.b_effective == 200);
    CHECK(r.redraws == 0);
}

TEST_CASE("bootstrap point estimate equals the full-sample statistic") {
    const ScoredSet s = random_set(64, 7);
    const BootstrapResult r = bootstrap_ci(s, StatisticKind::Brier, 0.5, 32, 99);
    CHECK(r.point == evaluate_statistic(s, StatisticKind::Brier, 0.5));
    CHECK(r.lo <= r.point);
    CHECK(r.hi >= r.point);
    CHECK(r.seed == 99);
}

TEST_CASE("bootstrap is deterministic and thread-count invariant") {
    const ScoredSet s = random_set(80, 12);
    const BootstrapResult a =
        bootstrap_ci(s, StatisticKind::ThresholdedAuc, 0.5, 64, 5, 1);
    const BootstrapResult b =
        bootstrap_ci(s, StatisticKind::ThresholdedAuc, 0.5, 64, 5, 4);
    CHECK(a.point == b.point);
    CHECK(a.lo == b.lo);
    CHECK(a.hi == b.hi);
    CHECK(a.b_effective == b.b_effective);
    CHECK(a.redraws == b.redraws);

    const BootstrapResult c =
        bootstrap_ci(s, StatisticKind::ThresholdedAuc, 0.5, 64, 6, 1);
    CHECK(c.lo != a.lo);

    CHECK_THROWS_AS(bootstrap_ci(s, StatisticKind::Brier, 0.5, 0, 1), UsageError);
}

TEST_CASE("tiny sets recover via redraws") {
    ScoredSet s;
    s.source = "tiny";
    s.probabilistic = true;
    s.scores = {0.8, 0.2, 0.3};
    s.labels = {1, 0, 0};
    const BootstrapResult r =
        bootstrap_ci(s, StatisticKind::ProbabilityAuc, 0.5, 50, 5);
    CHECK(r.b_effective == 50);
    CHECK(r.redraws > 0);
}

TEST_CASE("brier bootstrap tolerates single-class data") {
    ScoredSet s;
    s.source = "neg-only";
    s.probabilistic = true;
    s.scores = {0.1, 0.2, 0.3, 0.4, 0.15, 0.25};
    s.labels = {0, 0, 0, 0, 0, 0};
    const BootstrapResult r = bootstrap_ci(s, StatisticKind::Brier, 0.5, 30, 2);
    CHECK(r.b_effective == 30);
    CHECK(r.redraws == 0);
}

TEST_CASE("permutation importance isolates the only live input column") {
    const SdnnModel model = ast_only_model();
    const Cohort cohort = ast_signal_cohort(100, 8);
    const std::vector<ImportanceRow> rows =
        permutation_importance(model, cohort, 0.5, 10, 17);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].feature == Feature::Age);
    CHECK(rows[2].feature == Feature::Ast);

    CHECK(rows[2].mean_drop > 0.2);
    for (std::size_t i : {std::size_t{0}, std::size_t{1}, std::size_t{3}, std::size_t{4}}) {
        CHECK(rows[i].mean_drop == 0.0);
        CHECK(rows[i].sd == 0.0);
    }
    for (const ImportanceRow& r : rows) {
        CHECK(r.repeats == 10);
        CHECK(r.seed == 17);
    }

    const std::vector<ImportanceRow> again =
        permutation_importance(model, cohort, 0.5, 10, 17);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(again[i].mean_drop == rows[i].mean_drop);
        CHECK(again[i].sd == rows[i].sd);
    }
    const std::vector<ImportanceRow> other =
        permutation_importance(model, cohort, 0.5, 10, 18);
    CHECK(other[2].mean_drop != rows[2].mean_drop);

    CHECK_THROWS_AS(permutation_importance(model, cohort, 0.5, 0, 1), UsageError);
    Cohort single = cohort;
    for (PatientRecord& r : single.records) r.label = 0;
    CHECK_THROWS_AS(permutation_importance(model, single, 0.5, 3, 1), DataError);
}

TEST_CASE("permutation importance leaves the cohort untouched") {
    const SdnnModel model = ast_only_model();
    const Cohort cohort = ast_signal_cohort(60, 9);
    const Cohort copy = cohort;
    permutation_importance(model, cohort, 0.5, 4, 3);
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        CHECK(cohort.records[i].ast == copy.records[i].ast);
        CHECK(cohort.records[i].age == copy.records[i].age);
    }
}

TEST_CASE("stratified k-fold balances both classes across folds") {
    std::vector<int> labels;
    for (int i = 0; i < 100; ++i) labels.push_back(i % 10 < 3 ? 1 : 0);
    const auto folds = stratified_kfold(labels, 10, 3);
    REQUIRE(folds.size() == 10);
    std::set<std::size_t> seen;
    for (const auto& fold : folds) {
        CHECK(fold.size() == 10);
        CHECK(std::is_sorted(fold.begin(), fold.end()));
        std::size_t pos = 0;
        for (std::size_t idx : fold) {
            CHECK(seen.insert(idx).second);
            pos += static_cast<std::size_t>(labels[idx]);
        }
        CHECK(pos == 3);
    }
    CHECK(seen.size() == 100);

    const auto same = stratified_kfold(labels, 10, 3);
    CHECK(same == folds);
    const auto shifted = stratified_kfold(labels, 10, 4);
    CHECK(shifted != folds);
}

TEST_CASE("k-fold partition property on uneven sizes") {
    Rng rng(2);
    std::vector<int> labels;
    for (int i = 0; i < 57; ++i) labels.push_back(static_cast<int>(rng.below(2)));
    const auto folds = stratified_kfold(labels, 4, 11);
    std::vector<std::size_t> per_class_min(2, 1000), per_class_max(2, 0);
    std::set<std::size_t> seen;
    for (const auto& fold : folds) {
        std::vector<std::size_t> counts(2, 0);
        for (std::size_t idx : fold) {
            CHECK(seen.insert(idx).second);
            ++counts[static_cast<std::size_t>(labels[idx])];
        }
        for (int c = 0; c < 2; ++c) {
            per_class_min[c] = std::min(per_class_min[c], counts[c]);
            per_class_max[c] = std::max(per_class_max[c], counts[c]);
        }
    }
    CHECK(seen.size() == 57);
    for (int c = 0; c < 2; ++c) CHECK(per_class_max[c] - per_class_min[c] <= 1);
}

TEST_CASE("k-fold input guards") {
    std::vector<int> labels{0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    CHECK_THROWS_AS(stratified_kfold(labels, 1, 0), UsageError);
    std::vector<int> rare;
    for (int i = 0; i < 40; ++i) rare.push_back(i < 5 ? 1 : 0);
    CHECK_THROWS_WITH_AS(stratified_kfold(rare, 10, 0),
                         doctest::Contains("class smaller than k"), DataError);
    CHECK_THROWS_AS(stratified_kfold({0, 1, 2, 1}, 2, 0), DataError);
}

TEST_CASE("leave-one-out ablation flags the signal-bearing feature") {
    const Cohort cohort = ablation_cohort(240, 6);
    TrainingConfig cfg;
    cfg.epochs = 30;
    cfg.learning_rate = 5e-3;
    cfg.hidden_widths = {3, 3};
    const std::vector<AblationRow> rows = loo_ablation(cohort, cfg, 3, 21);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].removed == "none");
    CHECK(rows[1].removed == "age");
    CHECK(rows[2].removed == "fib4");
    CHECK(rows[3].removed == "ast");
    CHECK(rows[4].removed == "plt");
    CHECK(rows[5].removed == "alt");
    for (const AblationRow& r : rows) {
        REQUIRE(r.fold_aucs.size() == 3);
        double mean = 0.0;
        for (double a : r.fold_aucs) {
            CHECK(a >= 0.0);
            CHECK(a <= 1.0);
            mean += a;
        }
        CHECK(r.mean_auc == doctest::Approx(mean / 3.0).epsilon(1e-12));
    }
    for (std::size_t i : {std::size_t{1}, std::size_t{2}, std::size_t{4}, std::size_t{5}}) {
        CHECK(rows[3].mean_auc < rows[i].mean_auc);
    }
    CHECK(rows[0].mean_auc > 0.9);

    const std::vector<AblationRow> again = loo_ablation(cohort, cfg, 3, 21);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(again[i].mean_auc == rows[i].mean_auc);
    }
}

TEST_CASE("threshold audit picks the smallest maximizer") {
    ScoredSet s;
    s.source = "band";
    s.probabilistic = true;
    for (int i = 0; i < 12; ++i) {
        const bool pos = i < 5;
        s.labels.push_back(pos ? 1 : 0);
        s.scores.push_back(pos ? 0.68 : 0.34);
    }
    // separating band (0.34, 0.68): the sweep hits it first at 0.35
    const AuditResult r = threshold_audit(s, AuditCriterion::Youden, 0.05);
    CHECK(r.best_value == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.best_threshold == doctest::Approx(0.35).epsilon(1e-9));
    CHECK(r.sweep.size() == 19);
    for (const AuditPoint& p : r.sweep) CHECK(r.best_value >= p.value);
}

TEST_CASE("threshold audit on constant scores degenerates to zero information") {
    ScoredSet s;
    s.source = "flat";
    s.probabilistic = true;
    s.scores.assign(10, 0.4);
    for (int i = 0; i < 10; ++i) s.labels.push_back(i < 4 ? 1 : 0);
    const AuditResult r = threshold_audit(s, AuditCriterion::Youden, 0.1);
    CHECK(r.best_value == 0.0);
    CHECK(r.best_threshold == doctest::Approx(0.1).epsilon(1e-12));
    for (const AuditPoint& p : r.sweep) CHECK(p.value == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("threshold audit against brute force on a hand case") {
    ScoredSet s;
    s.source = "hand";
    s.probabilistic = true;
    s.scores = {0.1, 0.35, 0.35, 0.6, 0.8, 0.9};
    s.labels = {0, 0, 1, 0, 1, 1};
    const AuditResult y = threshold_audit(s, AuditCriterion::Youden, 0.25);
    REQUIRE(y.sweep.size() == 3);
    CHECK(y.sweep[0].value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(y.sweep[1].value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(y.sweep[2].value == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(y.best_threshold == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(y.best_value == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    const AuditResult f = threshold_audit(s, AuditCriterion::F1, 0.25);
    CHECK(f.sweep[0].value == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(f.sweep[1].value == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(f.sweep[2].value == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(f.best_threshold == doctest::Approx(0.75).epsilon(1e-12));

    CHECK_THROWS_AS(threshold_audit(s, AuditCriterion::Youden, 0.0), UsageError);
    CHECK_THROWS_AS(threshold_audit(s, AuditCriterion::Youden, 1.0), UsageError);
    ScoredSet single = s;
    std::fill(single.labels.begin(), single.labels.end(), 0);
    CHECK_THROWS_AS(threshold_audit(single, AuditCriterion::Youden, 0.1), DataError);
    CHECK(criterion_from_name("youden") == AuditCriterion::Youden);
    CHECK(criterion_from_name("f1") == AuditCriterion::F1);
    CHECK_THROWS_AS(criterion_from_name("accuracy"), UsageError);
}

TEST_CASE("prediction import reads plain and permuted layouts") {
    const Cohort cohort = ast_signal_cohort(4, 1);

    std::istringstream plain("prob\n0.9\n0.2\n0.8\n0.1\n");
    const ScoredSet a = import_predictions(plain, cohort, "file-a");
    CHECK(a.scores == std::vector<double>{0.9, 0.2, 0.8, 0.1});
    CHECK(a.labels == cohort.labels());
    CHECK(a.probabilistic);
    CHECK(a.source == "file-a");

    std::istringstream permuted(
        "# produced elsewhere\n"
        "id,prob\n"
        "2,0.8\n"
        "0,0.9\n"
        "3,0.1\n"
        "1,0.2\n");
    const ScoredSet b = import_predictions(permuted, cohort, "file-b");
    CHECK(b.scores == std::vector<double>{0.9, 0.2, 0.8, 0.1});

    std::istringstream labeled("prob,label\n0.9,1\n0.2,0\n0.8,1\n0.1,0\n");
    CHECK_NOTHROW(import_predictions(labeled, cohort, "file-c"));

    Cohort unlabeled = cohort;
    for (PatientRecord& r : unlabeled.records) r.label.reset();
    std::istringstream with_labels("prob,label\n0.9,1\n0.2,0\n0.8,1\n0.1,0\n");
    const ScoredSet d = import_predictions(with_labels, unlabeled, "file-d");
    CHECK(d.labels == std::vector<int>{1, 0, 1, 0});
    std::istringstream bare("prob\n0.9\n0.2\n0.8\n0.1\n");
    const ScoredSet e = import_predictions(bare, unlabeled, "file-e");
    CHECK(e.labels.empty());
}

TEST_CASE("prediction import rejects structural defects") {
    const Cohort cohort = ast_signal_cohort(4, 1);
    auto expect_error = [&](const std::string& text, const std::string& needle) {
        std::istringstream in(text);
        CHECK_THROWS_WITH_AS(import_predictions(in, cohort, "f"),
                             doctest::Contains(needle.c_str()), DataError);
    };
    expect_error("score\n0.1\n0.2\n0.3\n0.4\n", "unknown column:");
    expect_error("prob,prob\n0.1,0.1\n", "duplicate column:");
    expect_error("id,label\n0,1\n", "missing required column: prob");
    expect_error("prob\n0.9\n\n0.8\n0.1\n", "blank line");
    expect_error("prob\n0.9\n0.2,1\n0.8\n0.1\n", "wrong field count");
    expect_error("prob\n0.9\nabc\n0.8\n0.1\n", "unparsable number");
    expect_error("prob\n0.9\n1.2\n0.8\n0.1\n", "probability outside [0,1]");
    expect_error("id,prob\n0,0.9\n4,0.2\n1,0.8\n2,0.1\n", "id outside 0..3");
    expect_error("id,prob\n0,0.9\n0,0.2\n1,0.8\n2,0.1\n", "duplicate id 0");
    expect_error("prob,label\n0.9,2\n0.2,0\n0.8,1\n0.1,0\n", "label outside {0,1}");
    expect_error("prob,label\n0.9,0\n0.2,1\n0.8,1\n0.1,0\n", "label mismatch");
    expect_error("prob\n0.9\n0.2\n0.8\n", "row count mismatch");
    expect_error("prob\n0.9\n0.2\n0.8\n0.1\n0.5\n", "row count mismatch");
    expect_error("", "empty input");
}
