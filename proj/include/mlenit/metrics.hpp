#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace mlenit {

// Scores paired with outcomes for one cohort/model pair. `probabilistic`
// distinguishes probability outputs (validated to [0,1]) from raw score axes
// such as FIB-4, which run through the same thresholded machinery.
struct ScoredSet {
    std::vector<double> scores;
    std::vector<int> labels;  // empty for scoring-only sets
    std::string source;
    bool probabilistic = true;
};

void validate_scored_set(const ScoredSet& set, bool require_labels);

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double threshold = 0.5;

    std::size_t total() const { return tp + fp + tn + fn; }
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Metrics that are 0/0 at the given counts are left unset rather than NaN.
struct MetricReport {
    std::optional<double> sensitivity, specificity, accuracy, f1;
    std::optional<double> thresholded_auc, probability_auc;
    std::optional<Interval> sensitivity_ci, specificity_ci, accuracy_ci, f1_ci;
    std::optional<Interval> thresholded_auc_ci, probability_auc_ci;
};

// Positive call iff score > threshold (strict).
ConfusionCounts confusion_at_threshold(const ScoredSet& set, double threshold);

MetricReport metric_report(const ConfusionCounts& counts);

// Rank-based AUC with half credit for ties (normalized Mann-Whitney U).
double probability_auc(const ScoredSet& set);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

// (0,0) at threshold +infinity, then one point per distinct score in
// descending order with positives called at score >= threshold; the final
// point is always (1,1).
std::vector<RocPoint> roc_curve(const ScoredSet& set);

double trapezoid_area(const std::vector<RocPoint>& curve);

// Collapse scores to {0,1} at the threshold (strict >), keeping labels.
ScoredSet binarize(const ScoredSet& set, double threshold);

}  // namespace mlenit
