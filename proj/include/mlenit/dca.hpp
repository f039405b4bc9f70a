#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mlenit/cohort.hpp"
#include "mlenit/metrics.hpp"
#include "mlenit/stats.hpp"

namespace mlenit {

struct ThresholdGrid {
    double start = 0.05;
    double stop = 0.50;
    double step = 0.01;
};

// "start:stop:step", e.g. "0.05:0.50:0.01".
ThresholdGrid parse_grid(const std::string& text);

// Inclusive endpoints: floor((stop-start)/step) + 1 points.
std::vector<double> grid_points(const ThresholdGrid& grid);

// NB(t) = TP/n - (FP/n) * t/(1-t), positives called at score > t.
double net_benefit(const ScoredSet& set, double t);

struct DcaTable {
    std::vector<double> thresholds;
    // treat_none, treat_all, then one entry per model, in input order.
    std::vector<std::string> strategies;
    std::vector<std::vector<double>> net_benefits;  // [strategy][grid index]
    std::size_t n = 0;
    double prevalence = 0.0;
    std::size_t baseline_count = 2;
};

DcaTable dca_curves(const std::vector<ScoredSet>& models, const ThresholdGrid& grid);

struct DcaRangeSummary {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> mean_net_benefit;  // aligned with DcaTable::strategies
};

struct DcaSummary {
    std::vector<std::string> strategies;
    std::vector<DcaRangeSummary> ranges;
    // Share of grid points where each model strategy holds the maximum net
    // benefit among model strategies; exact ties split equally. Aligned with
    // strategies[baseline_count..); baselines are not ranked.
    std::vector<std::string> model_strategies;
    std::vector<double> best_fraction;
};

DcaSummary summarize_dca(const DcaTable& table,
                         const std::vector<std::pair<double, double>>& ranges);

struct Fib4Calibration {
    LogisticFit fit;
};

// Univariable logistic risk model on fib4, fitted by maximum likelihood.
Fib4Calibration fit_fib4_calibration(const Cohort& train);
ScoredSet apply_fib4_calibration(const Fib4Calibration& calib, const Cohort& cohort);

}  // namespace mlenit
