#include "mlenit/calibration.hpp"

#include <cmath>

#include "mlenit/error.hpp"

namespace mlenit {

double brier(const ScoredSet& set) {
    validate_scored_set(set, true);
    if (!set.probabilistic) throw DataError("Brier score requires probabilities");
    double sum = 0.0;
    for (std::size_t i = 0; i < set.scores.size(); ++i) {
        const double d = set.scores[i] - static_cast<double>(set.labels[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(set.scores.size());
}

ReliabilityBins reliability_bins(const ScoredSet& set, std::size_t n_bins) {
    validate_scored_set(set, true);
    if (!set.probabilistic) throw DataError("reliability bins require probabilities");
    if (n_bins < 1) throw UsageError("bin count must be at least 1");

    const double nb = static_cast<double>(n_bins);
    ReliabilityBins out;
    out.n = set.scores.size();
    out.bins.resize(n_bins);
    std::vector<double> sum_p(n_bins, 0.0);
    std::vector<std::size_t> sum_y(n_bins, 0);
    for (std::size_t k = 0; k < n_bins; ++k) {
        out.bins[k].lo = static_cast<double>(k) / nb;
        out.bins[k].hi = static_cast<double>(k + 1) / nb;
    }

    for (std::size_t i = 0; i < set.scores.size(); ++i) {
        const double p = set.scores[i];
        std::size_t idx = static_cast<std::size_t>(std::floor(p * nb));
        if (idx >= n_bins) idx = n_bins - 1;
        while (idx > 0 && p < static_cast<double>(idx) / nb) --idx;
        while (idx + 1 < n_bins && p >= static_cast<double>(idx + 1) / nb) ++idx;
        ++out.bins[idx].count;
        sum_p[idx] += p;
        sum_y[idx] += static_cast<std::size_t>(set.labels[i]);
    }

    for (std::size_t k = 0; k < n_bins; ++k) {
        if (out.bins[k].count > 0) {
            const double cnt = static_cast<double>(out.bins[k].count);
            out.bins[k].mean_pred = sum_p[k] / cnt;
            out.bins[k].obs_freq = static_cast<double>(sum_y[k]) / cnt;
        }
    }
    return out;
}

double ece(const ReliabilityBins& bins) {
    if (bins.n == 0) throw DataError("ECE over zero records");
    double total = 0.0;
    for (const ReliabilityBin& b : bins.bins) {
        if (b.count == 0) continue;
        total += static_cast<double>(b.count) / static_cast<double>(bins.n) *
                 std::fabs(*b.obs_freq - *b.mean_pred);
    }
    return total;
}

}  // namespace mlenit
