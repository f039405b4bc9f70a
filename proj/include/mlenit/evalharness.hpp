#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mlenit/cohort.hpp"
#include "mlenit/metrics.hpp"
#include "mlenit/sdnn.hpp"

namespace mlenit {

enum class StatisticKind { ThresholdedAuc, ProbabilityAuc, Brier };

const char* statistic_name(StatisticKind kind);
StatisticKind statistic_from_name(const std::string& name);

// Point value of a statistic on a full set; throws DataError when undefined
// (single-class set for the AUCs, non-probabilistic scores for Brier).
double evaluate_statistic(const ScoredSet& set, StatisticKind kind, double threshold);

struct BootstrapResult {
    double point = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t b_requested = 0;
    std::size_t b_effective = 0;
    std::size_t redraws = 0;
    std::uint64_t seed = 0;
};

// Percentile (2.5/97.5, type-7) interval over B resamples of n rows with
// replacement. Each resample draws from an independently sub-seeded stream,
// so sequential and parallel runs are bit-identical. Single-class resamples
// are redrawn up to 10 attempts, then skipped; fewer than 0.9*B usable
// resamples is an error.
BootstrapResult bootstrap_ci(const ScoredSet& set, StatisticKind kind, double threshold,
                             std::size_t B, std::uint64_t seed, unsigned threads = 1);

struct ImportanceRow {
    Feature feature = Feature::Age;
    double mean_drop = 0.0;
    double sd = 0.0;  // population (n) denominator across repeats
    std::size_t repeats = 0;
    std::uint64_t seed = 0;
};

// Mean decrease in thresholded ROC-AUC after shuffling one raw feature column
// (fresh sub-seeded shuffle per repeat); the model's stored standardizer is
// applied to the permuted column, mirroring deployment.
std::vector<ImportanceRow> permutation_importance(const SdnnModel& model, const Cohort& cohort,
                                                  double threshold, std::size_t repeats,
                                                  std::uint64_t seed);

// k disjoint validation index sets partitioning [0, n); per-class counts
// across folds differ by at most 1; each fold sorted ascending.
std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<int>& labels,
                                                       std::size_t k, std::uint64_t seed);

struct AblationRow {
    std::string removed;  // "none" for the full feature set
    double mean_auc = 0.0;
    std::vector<double> fold_aucs;
    std::uint64_t seed = 0;
};

// Leave-one-feature-out ablation under stratified k-fold cross-validation;
// standardizer refit per fold on the training folds only; thresholded
// ROC-AUC at 0.50 on each held-out fold.
std::vector<AblationRow> loo_ablation(const Cohort& cohort, const TrainingConfig& config,
                                      std::size_t k, std::uint64_t seed);

enum class AuditCriterion { Youden, F1 };

const char* criterion_name(AuditCriterion c);
AuditCriterion criterion_from_name(const std::string& name);

struct AuditPoint {
    double threshold = 0.0;
    double value = 0.0;
};

struct AuditResult {
    double best_threshold = 0.0;
    double best_value = 0.0;
    AuditCriterion criterion = AuditCriterion::Youden;
    double step = 0.0;
    std::vector<AuditPoint> sweep;
};

// Sweeps thresholds step, 2*step, ... < 1 and returns the criterion
// maximizer; exact ties keep the smallest threshold.
AuditResult threshold_audit(const ScoredSet& set, AuditCriterion criterion, double step);

// CSV with header `prob[,label][,id]`. Row count must match the cohort; an
// id column is a permutation of 0..n-1 giving each row's cohort position;
// labels, when present in both file and cohort, must agree.
ScoredSet import_predictions(std::istream& in, const Cohort& cohort, const std::string& name);

}  // namespace mlenit
