#include "mlenit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mlenit/error.hpp"
#include "mlenit/mathfn.hpp"

namespace mlenit {

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_var(const std::vector<double>& v, double mean) {
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size() - 1);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) throw DataError("correlation undefined: constant vector");
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

std::vector<double> midranks(const std::vector<double>& v) {
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

WelchResult welch_t(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw DataError("Welch t requires at least 2 per group");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double ma = mean_of(a), mb = mean_of(b);
    const double va = sample_var(a, ma), vb = sample_var(b, mb);
    if (va <= 0.0 || vb <= 0.0) throw DataError("Welch t undefined: zero-variance group");
    const double qa = va / na, qb = vb / nb;
    const double se2 = qa + qb;
    WelchResult r;
    r.t = (ma - mb) / std::sqrt(se2);
    r.df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    r.p = 2.0 * t_cdf(-std::fabs(r.t), r.df);
    if (r.p > 1.0) r.p = 1.0;
    return r;
}

namespace {

// Exact null distribution of the rank sum of group a: ways[s] counts size-k
// subsets of ranks {1..n} with sum s.
std::vector<double> rank_sum_counts(std::size_t n, std::size_t k) {
    const std::size_t max_sum = n * (n + 1) / 2;
    std::vector<std::vector<double>> ways(k + 1, std::vector<double>(max_sum + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t r = 1; r <= n; ++r) {
        for (std::size_t kk = std::min(k, r); kk >= 1; --kk) {
            for (std::size_t s = max_sum; s >= r; --s) {
                ways[kk][s] += ways[kk - 1][s - r];
            }
        }
    }
    return ways[k];
}

}  // namespace

MwResult mann_whitney(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw DataError("Mann-Whitney requires non-empty groups");
    const std::size_t na = a.size(), nb = b.size(), n = na + nb;

    std::vector<double> combined;
    combined.reserve(n);
    combined.insert(combined.end(), a.begin(), a.end());
    combined.insert(combined.end(), b.begin(), b.end());
    const std::vector<double> ranks = midranks(combined);

    double rank_sum_a = 0.0;
    for (std::size_t i = 0; i < na; ++i) rank_sum_a += ranks[i];
    const double u_a = rank_sum_a - 0.5 * static_cast<double>(na) * static_cast<double>(na + 1);
    const double u_b = static_cast<double>(na) * static_cast<double>(nb) - u_a;

    // tie census over the combined sample
    std::vector<double> sorted = combined;
    std::sort(sorted.begin(), sorted.end());
    bool any_tie = false;
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        if (t > 1.0) {
            any_tie = true;
            tie_term += t * t * t - t;
        }
        i = j + 1;
    }

    MwResult r;
    r.u = u_a;
    if (n <= 12 && !any_tie) {
        r.exact = true;
        const std::vector<double> ways = rank_sum_counts(n, na);
        const double u_small = std::min(u_a, u_b);
        const double base = 0.5 * static_cast<double>(na) * static_cast<double>(na + 1);
        double hits = 0.0, total = 0.0;
        for (std::size_t s = 0; s < ways.size(); ++s) {
            total += ways[s];
            if (static_cast<double>(s) - base <= u_small + 1e-9) hits += ways[s];
        }
        r.p = std::min(1.0, 2.0 * hits / total);
        return r;
    }

    const double nn = static_cast<double>(n);
    const double mu = 0.5 * static_cast<double>(na) * static_cast<double>(nb);
    const double var = static_cast<double>(na) * static_cast<double>(nb) / 12.0 *
                       ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if (var <= 0.0) {
        r.p = 1.0;
        return r;
    }
    const double d = std::fabs(u_a - mu);
    if (d <= 0.5) {
        r.p = 1.0;
        return r;
    }
    const double z = (d - 0.5) / std::sqrt(var);
    r.p = std::erfc(z / std::sqrt(2.0));
    if (r.p > 1.0) r.p = 1.0;
    return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DataError("Spearman requires equal-length vectors");
    if (x.size() < 2) throw DataError("Spearman requires at least 2 observations");
    return pearson(midranks(x), midranks(y));
}

double point_biserial(const std::vector<double>& x, const std::vector<int>& labels) {
    if (x.size() != labels.size()) throw DataError("point-biserial requires equal lengths");
    if (x.size() < 2) throw DataError("point-biserial requires at least 2 observations");
    bool has0 = false, has1 = false;
    std::vector<double> y;
    y.reserve(labels.size());
    for (int v : labels) {
        if (v != 0 && v != 1) throw DataError("point-biserial labels must be 0 or 1");
        (v == 1 ? has1 : has0) = true;
        y.push_back(static_cast<double>(v));
    }
    if (!has0 || !has1) throw DataError("point-biserial requires both classes");
    return pearson(x, y);
}

LogisticFit fit_univariable_logistic(const std::vector<double>& x, const std::vector<int>& labels,
                                     int max_iter, double tol) {
    if (x.size() != labels.size()) throw DataError("logistic fit requires equal lengths");
    const std::size_t n = x.size();
    if (n < 2) throw DataError("logistic fit requires at least 2 observations");
    bool has0 = false, has1 = false;
    for (int v : labels) {
        if (v != 0 && v != 1) throw DataError("logistic fit labels must be 0 or 1");
        (v == 1 ? has1 : has0) = true;
    }
    if (!has0 || !has1) throw DataError("logistic fit requires both classes");
    const double x0 = x[0];
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x0; })) {
        throw DataError("logistic fit requires a non-constant predictor");
    }

    constexpr double kBetaBound = 15.0;
    LogisticFit fit;
    double b0 = 0.0, b1 = 0.0;
    double h00 = 0.0, h01 = 0.0, h11 = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        double g0 = 0.0, g1 = 0.0;
        h00 = h01 = h11 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = logistic(b0 + b1 * x[i]);
            const double w = p * (1.0 - p);
            const double res = static_cast<double>(labels[i]) - p;
            g0 += res;
            g1 += res * x[i];
            h00 += w;
            h01 += w * x[i];
            h11 += w * x[i] * x[i];
        }
        const double det = h00 * h11 - h01 * h01;
        if (!(std::fabs(det) > 1e-300)) {
            fit.beta0 = b0;
            fit.beta1 = b1;
            fit.iterations = it;
            fit.converged = false;
            return fit;
        }
        const double s0 = (h11 * g0 - h01 * g1) / det;
        const double s1 = (h00 * g1 - h01 * g0) / det;
        b0 += s0;
        b1 += s1;
        fit.iterations = it;
        if (std::fabs(b0) > kBetaBound || std::fabs(b1) > kBetaBound) {
            fit.beta0 = b0;
            fit.beta1 = b1;
            fit.converged = false;  // (quasi-)separation: no finite MLE
            return fit;
        }
        if (std::max(std::fabs(s0), std::fabs(s1)) < tol) {
            fit.converged = true;
            break;
        }
    }
    fit.beta0 = b0;
    fit.beta1 = b1;
    const double det = h00 * h11 - h01 * h01;
    if (fit.converged && det > 0.0) {
        fit.se1 = std::sqrt(h00 / det);
    } else {
        fit.converged = false;
    }
    return fit;
}

OddsRatio standardized_or(const std::vector<double>& x, const std::vector<int>& labels) {
    const std::size_t n = x.size();
    if (n < 2) throw DataError("standardized OR requires at least 2 observations");
    const double m = mean_of(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 0.0)) throw DataError("standardized OR requires a non-constant predictor");
    std::vector<double> z;
    z.reserve(n);
    for (double v : x) z.push_back((v - m) / sd);

    const LogisticFit fit = fit_univariable_logistic(z, labels);
    OddsRatio out;
    out.converged = fit.converged;
    if (fit.converged) {
        out.value = std::exp(fit.beta1);
        out.lo = std::exp(fit.beta1 - 1.96 * fit.se1);
        out.hi = std::exp(fit.beta1 + 1.96 * fit.se1);
    }
    return out;
}

std::vector<AssociationRow> univariable_table(const Cohort& cohort) {
    const std::vector<int> labels = cohort.labels();
    std::vector<AssociationRow> rows;
    for (Feature f : kAllFeatures) {
        std::vector<double> all, early, advanced;
        for (std::size_t i = 0; i < cohort.size(); ++i) {
            const double v = feature_value(cohort.records[i], f);
            all.push_back(v);
            (labels[i] == 1 ? advanced : early).push_back(v);
        }
        if (early.size() < 2 || advanced.size() < 2) {
            throw DataError("univariable table requires at least 2 records per class");
        }
        AssociationRow row;
        row.feature = feature_name(f);
        row.early_mean = mean_of(early);
        row.early_sd = std::sqrt(sample_var(early, row.early_mean));
        row.advanced_mean = mean_of(advanced);
        row.advanced_sd = std::sqrt(sample_var(advanced, row.advanced_mean));
        const WelchResult w = welch_t(advanced, early);
        row.welch_t = w.t;
        row.welch_df = w.df;
        row.welch_p = w.p;
        const MwResult mw = mann_whitney(advanced, early);
        row.mw_u = mw.u;
        row.mw_p = mw.p;
        std::vector<double> y;
        y.reserve(labels.size());
        for (int v : labels) y.push_back(static_cast<double>(v));
        row.spearman_rho = spearman(all, y);
        row.point_biserial_r = point_biserial(all, labels);
        row.std_or = standardized_or(all, labels);
        rows.push_back(std::move(row));
    }
    return rows;
}

double quantile_type7(std::vector<double> values, double q) {
    if (values.empty()) throw DataError("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw UsageError("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n == 1) return values[0];
    const double h = q * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace mlenit
