#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "mlenit/metrics.hpp"

namespace mlenit {

struct ReliabilityBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    std::optional<double> mean_pred;  // confidence: in-bin mean predicted probability
    std::optional<double> obs_freq;   // observed positive fraction
};

struct ReliabilityBins {
    std::vector<ReliabilityBin> bins;
    std::size_t n = 0;
};

// Mean squared error of probabilities against outcomes.
double brier(const ScoredSet& set);

// Equal-width bins [k/B, (k+1)/B), the last closed at 1. Assignment is
// consistent with the literal double edges k/B even when p*B rounds across
// a boundary.
ReliabilityBins reliability_bins(const ScoredSet& set, std::size_t n_bins);

// Count-weighted mean |observed - confidence|; empty bins contribute 0.
double ece(const ReliabilityBins& bins);

}  // namespace mlenit
