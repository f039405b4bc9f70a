#pragma once

#include <string>
#include <vector>

#include "mlenit/cohort.hpp"

namespace mlenit {

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

// Welch's two-sample t with Welch-Satterthwaite degrees of freedom and a
// two-sided p from the t distribution. Sample (n-1) variances.
WelchResult welch_t(const std::vector<double>& a, const std::vector<double>& b);

struct MwResult {
    double u = 0.0;  // U statistic of group a
    double p = 1.0;
    bool exact = false;
};

// Midrank U statistic. Exact two-sided p by enumeration when the combined
// size is at most 12 and there are no ties; otherwise a normal approximation
// with tie correction and 0.5 continuity correction.
MwResult mann_whitney(const std::vector<double>& a, const std::vector<double>& b);

// Pearson correlation of midranks.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// Pearson correlation of x with labels coded {0,1}.
double point_biserial(const std::vector<double>& x, const std::vector<int>& labels);

struct LogisticFit {
    double beta0 = 0.0;
    double beta1 = 0.0;
    double se1 = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Newton (IRLS) maximum likelihood for outcome ~ intercept + slope * x.
// SE from the observed-information inverse. |beta| exceeding 15 during
// iteration marks (quasi-)separation and returns non-converged.
LogisticFit fit_univariable_logistic(const std::vector<double>& x, const std::vector<int>& labels,
                                     int max_iter = 200, double tol = 1e-10);

struct OddsRatio {
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool converged = false;
};

// exp(slope) after z-scoring x with its population sd; Wald 95% interval.
OddsRatio standardized_or(const std::vector<double>& x, const std::vector<int>& labels);

struct AssociationRow {
    std::string feature;
    double early_mean = 0.0, early_sd = 0.0;        // sample (n-1) sd
    double advanced_mean = 0.0, advanced_sd = 0.0;
    double welch_t = 0.0, welch_df = 0.0, welch_p = 1.0;  // advanced vs early
    double mw_u = 0.0, mw_p = 1.0;                        // U of the advanced group
    double spearman_rho = 0.0;
    double point_biserial_r = 0.0;
    OddsRatio std_or;
};

// One row per feature in canonical order (age, fib4, ast, plt, alt).
std::vector<AssociationRow> univariable_table(const Cohort& cohort);

std::vector<double> midranks(const std::vector<double>& v);

// Linear-interpolation quantile (the common "type 7" rule) of the values.
double quantile_type7(std::vector<double> values, double q);

}  // namespace mlenit
