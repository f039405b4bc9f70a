#include "mlenit/dca.hpp"

#include <algorithm>
#include <cmath>

#include "mlenit/error.hpp"
#include "mlenit/mathfn.hpp"
#include "mlenit/textio.hpp"

namespace mlenit {

namespace {

constexpr double kGridEps = 1e-9;

}  // namespace

ThresholdGrid parse_grid(const std::string& text) {
    const std::vector<std::string> parts = split_line(text, ':');
    if (parts.size() != 3) {
        throw UsageError("grid must be start:stop:step, got \"" + text + "\"");
    }
    ThresholdGrid g;
    const auto start = parse_double(parts[0]);
    const auto stop = parse_double(parts[1]);
    const auto step = parse_double(parts[2]);
    if (!start || !stop || !step) {
        throw UsageError("grid must be start:stop:step, got \"" + text + "\"");
    }
    g.start = *start;
    g.stop = *stop;
    g.step = *step;
    if (!(g.start > 0.0 && g.stop < 1.0 && g.start <= g.stop)) {
        throw UsageError("grid endpoints must satisfy 0 < start <= stop < 1");
    }
    if (!(g.step > 0.0)) throw UsageError("grid step must be positive");
    return g;
}

std::vector<double> grid_points(const ThresholdGrid& grid) {
    if (!(grid.start > 0.0 && grid.stop < 1.0 && grid.start <= grid.stop)) {
        throw UsageError("grid endpoints must satisfy 0 < start <= stop < 1");
    }
    if (!(grid.step > 0.0)) throw UsageError("grid step must be positive");
    const std::size_t count =
        static_cast<std::size_t>(std::floor((grid.stop - grid.start) / grid.step + kGridEps)) + 1;
    std::vector<double> points;
    points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        points.push_back(grid.start + static_cast<double>(i) * grid.step);
    }
    return points;
}

double net_benefit(const ScoredSet& set, double t) {
    if (!(t > 0.0 && t < 1.0)) throw UsageError("net benefit threshold must lie in (0, 1)");
    const ConfusionCounts c = confusion_at_threshold(set, t);
    const double n = static_cast<double>(c.total());
    return static_cast<double>(c.tp) / n -
           static_cast<double>(c.fp) / n * (t / (1.0 - t));
}

DcaTable dca_curves(const std::vector<ScoredSet>& models, const ThresholdGrid& grid) {
    if (models.empty()) throw UsageError("decision curves need at least one model strategy");
    for (const ScoredSet& m : models) {
        validate_scored_set(m, true);
        if (!m.probabilistic) {
            throw DataError("decision curves require probabilistic scores: " + m.source);
        }
    }
    const std::vector<int>& labels = models.front().labels;
    for (const ScoredSet& m : models) {
        if (m.labels != labels) {
            throw DataError("label vectors differ between models: " + m.source);
        }
    }

    DcaTable table;
    table.thresholds = grid_points(grid);
    table.n = labels.size();
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += static_cast<std::size_t>(y);
    table.prevalence = static_cast<double>(n_pos) / static_cast<double>(table.n);

    ScoredSet treat_none{std::vector<double>(table.n, 0.0), labels, "treat_none", true};
    ScoredSet treat_all{std::vector<double>(table.n, 1.0), labels, "treat_all", true};

    std::vector<const ScoredSet*> strategies{&treat_none, &treat_all};
    for (const ScoredSet& m : models) strategies.push_back(&m);

    for (const ScoredSet* s : strategies) {
        table.strategies.push_back(s->source);
        std::vector<double> row;
        row.reserve(table.thresholds.size());
        for (double t : table.thresholds) row.push_back(net_benefit(*s, t));
        table.net_benefits.push_back(std::move(row));
    }
    return table;
}

DcaSummary summarize_dca(const DcaTable& table,
                         const std::vector<std::pair<double, double>>& ranges) {
    if (table.strategies.size() != table.net_benefits.size() ||
        table.strategies.size() <= table.baseline_count) {
        throw DataError("decision-curve table has no model strategies");
    }
    for (const std::vector<double>& row : table.net_benefits) {
        if (row.size() != table.thresholds.size()) {
            throw DataError("decision-curve table rows differ in length");
        }
    }

    DcaSummary summary;
    summary.strategies = table.strategies;

    for (const auto& [lo, hi] : ranges) {
        if (!(lo <= hi)) throw UsageError("range lower bound exceeds upper bound");
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < table.thresholds.size(); ++i) {
            const double t = table.thresholds[i];
            if (t >= lo - kGridEps && t <= hi + kGridEps) idx.push_back(i);
        }
        if (idx.empty()) {
            throw DataError("empty range: no grid points in [" + format_double(lo) + ", " +
                            format_double(hi) + "]");
        }
        DcaRangeSummary rs;
        rs.lo = lo;
        rs.hi = hi;
        for (const std::vector<double>& row : table.net_benefits) {
            double sum = 0.0;
            for (std::size_t i : idx) sum += row[i];
            rs.mean_net_benefit.push_back(sum / static_cast<double>(idx.size()));
        }
        summary.ranges.push_back(std::move(rs));
    }

    const std::size_t first_model = table.baseline_count;
    const std::size_t n_models = table.strategies.size() - first_model;
    summary.model_strategies.assign(table.strategies.begin() + first_model,
                                    table.strategies.end());
    summary.best_fraction.assign(n_models, 0.0);
    const std::size_t n_grid = table.thresholds.size();
    for (std::size_t i = 0; i < n_grid; ++i) {
        double best = table.net_benefits[first_model][i];
        for (std::size_t m = 1; m < n_models; ++m) {
            best = std::max(best, table.net_benefits[first_model + m][i]);
        }
        std::vector<std::size_t> tied;
        for (std::size_t m = 0; m < n_models; ++m) {
            if (table.net_benefits[first_model + m][i] == best) tied.push_back(m);
        }
        const double share = 1.0 / (static_cast<double>(tied.size()) * static_cast<double>(n_grid));
        for (std::size_t m : tied) summary.best_fraction[m] += share;
    }
    return summary;
}

Fib4Calibration fit_fib4_calibration(const Cohort& train) {
    const std::vector<int> labels = train.labels();
    std::vector<double> fib4;
    fib4.reserve(train.size());
    for (const PatientRecord& r : train.records) fib4.push_back(r.fib4);
    const LogisticFit fit = fit_univariable_logistic(fib4, labels);
    if (!fit.converged) {
        throw NumericError("FIB-4 calibration fit did not converge");
    }
    return Fib4Calibration{fit};
}

ScoredSet apply_fib4_calibration(const Fib4Calibration& calib, const Cohort& cohort) {
    ScoredSet out;
    out.scores.reserve(cohort.size());
    for (const PatientRecord& r : cohort.records) {
        out.scores.push_back(logistic(calib.fit.beta0 + calib.fit.beta1 * r.fib4));
    }
    if (cohort.fully_labeled()) out.labels = cohort.labels();
    out.source = "fib4_cal";
    out.probabilistic = true;
    return out;
}

}  // namespace mlenit
