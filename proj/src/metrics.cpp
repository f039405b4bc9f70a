#include "mlenit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mlenit/error.hpp"

namespace mlenit {

void validate_scored_set(const ScoredSet& set, bool require_labels) {
    if (set.scores.empty()) throw DataError("scored set is empty");
    for (double s : set.scores) {
        if (!std::isfinite(s)) throw DataError("non-finite score in set '" + set.source + "'");
        if (set.probabilistic && (s < 0.0 || s > 1.0)) {
            throw DataError("probability outside [0,1] in set '" + set.source + "'");
        }
    }
    if (!set.labels.empty() && set.labels.size() != set.scores.size()) {
        throw DataError("scores and labels differ in length in set '" + set.source + "'");
    }
    if (require_labels && set.labels.empty()) {
        throw DataError("labels required but absent in set '" + set.source + "'");
    }
    for (int y : set.labels) {
        if (y != 0 && y != 1) throw DataError("label outside {0,1} in set '" + set.source + "'");
    }
}

ConfusionCounts confusion_at_threshold(const ScoredSet& set, double threshold) {
    validate_scored_set(set, true);
    ConfusionCounts c;
    c.threshold = threshold;
    for (std::size_t i = 0; i < set.scores.size(); ++i) {
        const bool called = set.scores[i] > threshold;
        if (set.labels[i] == 1) {
            called ? ++c.tp : ++c.fn;
        } else {
            called ? ++c.fp : ++c.tn;
        }
    }
    return c;
}

MetricReport metric_report(const ConfusionCounts& counts) {
    const std::size_t n = counts.total();
    if (n == 0) throw DataError("metric report over zero records");
    MetricReport r;
    if (counts.tp + counts.fn > 0) {
        r.sensitivity = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fn);
    }
    if (counts.tn + counts.fp > 0) {
        r.specificity = static_cast<double>(counts.tn) / static_cast<double>(counts.tn + counts.fp);
    }
    r.accuracy = static_cast<double>(counts.tp + counts.tn) / static_cast<double>(n);
    const std::size_t f1_den = 2 * counts.tp + counts.fp + counts.fn;
    r.f1 = f1_den > 0 ? 2.0 * static_cast<double>(counts.tp) / static_cast<double>(f1_den) : 0.0;
    if (r.sensitivity && r.specificity) {
        r.thresholded_auc = 0.5 * (*r.sensitivity + *r.specificity);
    }
    return r;
}

namespace {

// Average ranks (1-based) with ties sharing their midrank.
std::vector<double> ranks_of(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = midrank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double probability_auc(const ScoredSet& set) {
    validate_scored_set(set, true);
    const std::size_t n = set.scores.size();
    std::size_t n_pos = 0;
    for (int y : set.labels) n_pos += static_cast<std::size_t>(y);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DataError("AUC undefined: single-class set");

    const std::vector<double> ranks = ranks_of(set.scores);
    double rank_sum_pos = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (set.labels[i] == 1) rank_sum_pos += ranks[i];
    }
    const double u_pos =
        rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u_pos / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<RocPoint> roc_curve(const ScoredSet& set) {
    validate_scored_set(set, true);
    const std::size_t n = set.scores.size();
    std::size_t n_pos = 0;
    for (int y : set.labels) n_pos += static_cast<std::size_t>(y);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DataError("ROC curve undefined: single-class set");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return set.scores[a] > set.scores[b]; });

    std::vector<RocPoint> curve;
    curve.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < n) {
        const double v = set.scores[order[i]];
        std::size_t j = i;
        while (j < n && set.scores[order[j]] == v) {
            set.labels[order[j]] == 1 ? ++tp : ++fp;
            ++j;
        }
        curve.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                         static_cast<double>(tp) / static_cast<double>(n_pos), v});
        i = j;
    }
    return curve;
}

double trapezoid_area(const std::vector<RocPoint>& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        area += (curve[i].fpr - curve[i - 1].fpr) * 0.5 * (curve[i].tpr + curve[i - 1].tpr);
    }
    return area;
}

ScoredSet binarize(const ScoredSet& set, double threshold) {
    validate_scored_set(set, false);
    ScoredSet out;
    out.scores.reserve(set.scores.size());
    for (double s : set.scores) out.scores.push_back(s > threshold ? 1.0 : 0.0);
    out.labels = set.labels;
    out.source = set.source + "/binarized";
    out.probabilistic = true;
    return out;
}

}  // namespace mlenit
