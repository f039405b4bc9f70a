#include "mlenit/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <thread>

#include "mlenit/calibration.hpp"
#include "mlenit/error.hpp"
#include "mlenit/stats.hpp"
#include "mlenit/textio.hpp"

namespace mlenit {

const char* statistic_name(StatisticKind kind) {
    switch (kind) {
        case StatisticKind::ThresholdedAuc: return "thresholded_auc";
        case StatisticKind::ProbabilityAuc: return "probability_auc";
        case StatisticKind::Brier: return "brier";
    }
    throw UsageError("unknown statistic kind");
}

StatisticKind statistic_from_name(const std::string& name) {
    if (name == "thresholded_auc") return StatisticKind::ThresholdedAuc;
    if (name == "probability_auc") return StatisticKind::ProbabilityAuc;
    if (name == "brier") return StatisticKind::Brier;
    throw UsageError("unknown statistic: " + name);
}

double evaluate_statistic(const ScoredSet& set, StatisticKind kind, double threshold) {
    switch (kind) {
        case StatisticKind::ThresholdedAuc: {
            validate_scored_set(set, true);
            const ConfusionCounts c = confusion_at_threshold(set, threshold);
            if (c.tp + c.fn == 0 || c.tn + c.fp == 0) {
                throw DataError("AUC undefined: single-class set");
            }
            const double sens = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
            const double spec = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
            return 0.5 * (sens + spec);
        }
        case StatisticKind::ProbabilityAuc:
            return probability_auc(set);
        case StatisticKind::Brier:
            return brier(set);
    }
    throw UsageError("unknown statistic kind");
}

namespace {

struct ResampleOutcome {
    std::optional<double> value;
    std::size_t redraws = 0;
};

bool single_class(const std::vector<int>& labels) {
    for (int y : labels) {
        if (y != labels.front()) return false;
    }
    return true;
}

ResampleOutcome one_resample(const ScoredSet& set, StatisticKind kind, double threshold,
                             std::uint64_t sub_seed) {
    const std::size_t n = set.scores.size();
    Rng rng(sub_seed);
    ScoredSet rs;
    rs.source = set.source;
    rs.probabilistic = set.probabilistic;
    rs.scores.resize(n);
    rs.labels.resize(n);
    const bool needs_both_classes = kind != StatisticKind::Brier;
    constexpr std::size_t kMaxAttempts = 10;
    for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t idx = rng.below(n);
            rs.scores[i] = set.scores[idx];
            rs.labels[i] = set.labels[idx];
        }
        if (needs_both_classes && single_class(rs.labels)) continue;
        const std::size_t redraws = attempt;
        return {evaluate_statistic(rs, kind, threshold), redraws};
    }
    return {std::nullopt, kMaxAttempts - 1};
}

}  // namespace

BootstrapResult bootstrap_ci(const ScoredSet& set, StatisticKind kind, double threshold,
                             std::size_t B, std::uint64_t seed, unsigned threads) {
    if (B == 0) throw UsageError("bootstrap needs a positive resample count");
    BootstrapResult result;
    result.point = evaluate_statistic(set, kind, threshold);
    result.b_requested = B;
    result.seed = seed;

    std::vector<std::optional<double>> values(B);
    std::vector<std::size_t> redraws(B, 0);
    const auto worker = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const ResampleOutcome out = one_resample(set, kind, threshold, derive_seed(seed, i));
            values[i] = out.value;
            redraws[i] = out.redraws;
        }
    };
    if (threads <= 1) {
        worker(0, B);
    } else {
        const std::size_t n_threads = std::min<std::size_t>(threads, B);
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        const std::size_t chunk = (B + n_threads - 1) / n_threads;
        for (std::size_t t = 0; t < n_threads; ++t) {
            const std::size_t lo = t * chunk;
            const std::size_t hi = std::min(lo + chunk, B);
            if (lo >= hi) break;
            pool.emplace_back(worker, lo, hi);
        }
        for (std::thread& th : pool) th.join();
    }

    std::vector<double> defined;
    defined.reserve(B);
    for (std::size_t i = 0; i < B; ++i) {
        result.redraws += redraws[i];
        if (values[i]) defined.push_back(*values[i]);
    }
    result.b_effective = defined.size();
    if (static_cast<double>(result.b_effective) < 0.9 * static_cast<double>(B)) {
        throw NumericError("bootstrap degenerate: only " + std::to_string(result.b_effective) +
                           " of " + std::to_string(B) + " resamples produced a defined statistic");
    }
    result.lo = quantile_type7(defined, 0.025);
    result.hi = quantile_type7(defined, 0.975);
    return result;
}

std::vector<ImportanceRow> permutation_importance(const SdnnModel& model, const Cohort& cohort,
                                                  double threshold, std::size_t repeats,
                                                  std::uint64_t seed) {
    if (repeats == 0) throw UsageError("importance needs a positive repeat count");
    const std::vector<int> labels = cohort.labels();
    if (single_class(labels)) throw DataError("single-class cohort");

    const double base =
        evaluate_statistic(predict(model, cohort), StatisticKind::ThresholdedAuc, threshold);

    std::vector<ImportanceRow> rows;
    rows.reserve(kAllFeatures.size());
    const std::size_t n = cohort.size();
    for (std::size_t f = 0; f < kAllFeatures.size(); ++f) {
        const Feature feature = kAllFeatures[f];
        std::vector<double> column(n);
        for (std::size_t i = 0; i < n; ++i) column[i] = feature_value(cohort.records[i], feature);

        std::vector<double> drops;
        drops.reserve(repeats);
        Cohort mutated = cohort;
        for (std::size_t rep = 0; rep < repeats; ++rep) {
            Rng rng(derive_seed(derive_seed(seed, f), rep));
            const std::vector<std::size_t> perm = rng.permutation(n);
            for (std::size_t i = 0; i < n; ++i) {
                set_feature_value(mutated.records[i], feature, column[perm[i]]);
            }
            const double auc = evaluate_statistic(predict(model, mutated),
                                                  StatisticKind::ThresholdedAuc, threshold);
            drops.push_back(base - auc);
        }
        for (std::size_t i = 0; i < n; ++i) {
            set_feature_value(mutated.records[i], feature, column[i]);
        }

        ImportanceRow row;
        row.feature = feature;
        row.repeats = repeats;
        row.seed = seed;
        double sum = 0.0;
        for (double d : drops) sum += d;
        row.mean_drop = sum / static_cast<double>(repeats);
        double ss = 0.0;
        for (double d : drops) ss += (d - row.mean_drop) * (d - row.mean_drop);
        row.sd = std::sqrt(ss / static_cast<double>(repeats));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<int>& labels,
                                                       std::size_t k, std::uint64_t seed) {
    if (k < 2) throw UsageError("k must be at least 2");
    std::vector<std::size_t> class_idx[2];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw DataError("label outside {0,1}");
        class_idx[labels[i]].push_back(i);
    }
    for (int c = 0; c < 2; ++c) {
        if (class_idx[c].size() < k) throw DataError("class smaller than k");
    }

    std::vector<std::vector<std::size_t>> folds(k);
    for (int c = 0; c < 2; ++c) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        rng.shuffle(class_idx[c]);
        for (std::size_t i = 0; i < class_idx[c].size(); ++i) {
            folds[i % k].push_back(class_idx[c][i]);
        }
    }
    for (std::vector<std::size_t>& fold : folds) std::sort(fold.begin(), fold.end());
    return folds;
}

std::vector<AblationRow> loo_ablation(const Cohort& cohort, const TrainingConfig& config,
                                      std::size_t k, std::uint64_t seed) {
    const std::vector<int> labels = cohort.labels();
    const std::vector<std::vector<std::size_t>> folds = stratified_kfold(labels, k, seed);
    const std::size_t n = cohort.size();

    std::vector<AblationRow> rows;
    for (std::size_t v = 0; v <= kAllFeatures.size(); ++v) {
        std::vector<Feature> features;
        std::string removed = "none";
        for (std::size_t f = 0; f < kAllFeatures.size(); ++f) {
            if (v >= 1 && f == v - 1) continue;
            features.push_back(kAllFeatures[f]);
        }
        if (v >= 1) removed = feature_name(kAllFeatures[v - 1]);

        AblationRow row;
        row.removed = removed;
        row.seed = seed;
        for (std::size_t j = 0; j < folds.size(); ++j) {
            std::vector<char> held(n, 0);
            for (std::size_t idx : folds[j]) held[idx] = 1;
            std::vector<std::size_t> train_rows;
            train_rows.reserve(n - folds[j].size());
            for (std::size_t i = 0; i < n; ++i) {
                if (!held[i]) train_rows.push_back(i);
            }

            const StandardizationParams std_params = fit_standardizer(cohort, features, train_rows);
            const FeatureMatrix train_m = apply_standardizer(std_params, cohort, train_rows);
            const FeatureMatrix val_m = apply_standardizer(std_params, cohort, folds[j]);

            TrainingConfig fold_cfg = config;
            fold_cfg.seed = derive_seed(derive_seed(seed, 100 + v), j);
            const SdnnArchitecture arch{features.size(), config.hidden_widths, 1};
            const FitResult fit = fit_network(train_m, arch, fold_cfg);

            ScoredSet val_set;
            val_set.probabilistic = true;
            val_set.source = "fold";
            val_set.labels = val_m.labels;
            val_set.scores.reserve(val_m.rows);
            for (std::size_t r = 0; r < val_m.rows; ++r) {
                val_set.scores.push_back(
                    forward(fit.params, val_m.values.data() + r * val_m.cols, val_m.cols));
            }
            row.fold_aucs.push_back(
                evaluate_statistic(val_set, StatisticKind::ThresholdedAuc, 0.50));
        }
        double sum = 0.0;
        for (double a : row.fold_aucs) sum += a;
        row.mean_auc = sum / static_cast<double>(row.fold_aucs.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

const char* criterion_name(AuditCriterion c) {
    switch (c) {
        case AuditCriterion::Youden: return "youden";
        case AuditCriterion::F1: return "f1";
    }
    throw UsageError("unknown audit criterion");
}

AuditCriterion criterion_from_name(const std::string& name) {
    if (name == "youden") return AuditCriterion::Youden;
    if (name == "f1") return AuditCriterion::F1;
    throw UsageError("unknown audit criterion: " + name);
}

AuditResult threshold_audit(const ScoredSet& set, AuditCriterion criterion, double step) {
    validate_scored_set(set, true);
    if (single_class(set.labels)) throw DataError("single-class set");
    if (!(step > 0.0 && step < 1.0)) throw UsageError("audit step must lie in (0, 1)");

    AuditResult result;
    result.criterion = criterion;
    result.step = step;
    bool first = true;
    for (std::size_t kk = 1;; ++kk) {
        const double t = static_cast<double>(kk) * step;
        if (t >= 1.0 - 1e-12) break;
        const ConfusionCounts c = confusion_at_threshold(set, t);
        const double sens = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
        const double spec = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
        double value = 0.0;
        if (criterion == AuditCriterion::Youden) {
            value = sens + spec - 1.0;
        } else {
            const std::size_t denom = 2 * c.tp + c.fp + c.fn;
            value = denom == 0 ? 0.0
                               : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
        }
        result.sweep.push_back({t, value});
        if (first || value > result.best_value) {
            result.best_threshold = t;
            result.best_value = value;
            first = false;
        }
    }
    if (result.sweep.empty()) throw UsageError("audit step leaves no thresholds in (0, 1)");
    return result;
}

ScoredSet import_predictions(std::istream& in, const Cohort& cohort, const std::string& name) {
    const std::size_t n = cohort.size();
    int col_prob = -1, col_label = -1, col_id = -1;
    std::size_t ncols = 0;
    bool have_header = false;
    std::size_t row = 0;

    std::vector<double> probs(n, 0.0);
    std::vector<int> file_labels(n, -1);
    bool any_label = false;
    std::vector<char> filled(n, 0);
    std::size_t seen = 0;

    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line.front() == '#') continue;
        if (!have_header) {
            if (trim(line).empty()) throw DataError("blank line before header");
            const std::vector<std::string> fields = split_line(line, ',');
            for (std::size_t i = 0; i < fields.size(); ++i) {
                const std::string col = to_lower(trim(fields[i]));
                int* slot = nullptr;
                if (col == "prob") slot = &col_prob;
                else if (col == "label") slot = &col_label;
                else if (col == "id") slot = &col_id;
                else throw DataError("unknown column: " + trim(fields[i]));
                if (*slot != -1) throw DataError("duplicate column: " + col);
                *slot = static_cast<int>(i);
            }
            if (col_prob < 0) throw DataError("missing required column: prob");
            ncols = fields.size();
            have_header = true;
            continue;
        }
        ++row;
        if (trim(line).empty()) throw DataError("blank line, row " + std::to_string(row));
        const std::vector<std::string> fields = split_line(line, ',');
        if (fields.size() != ncols) {
            throw DataError("wrong field count, row " + std::to_string(row) + ": expected " +
                            std::to_string(ncols) + ", got " + std::to_string(fields.size()));
        }
        if (row > n) {
            throw DataError("row count mismatch: expected " + std::to_string(n) + " rows");
        }

        const auto p = parse_double(trim(fields[static_cast<std::size_t>(col_prob)]));
        if (!p) throw DataError("unparsable number, row " + std::to_string(row) + ", field prob");
        if (!std::isfinite(*p) || *p < 0.0 || *p > 1.0) {
            throw DataError("probability outside [0,1], row " + std::to_string(row));
        }

        std::size_t position = row - 1;
        if (col_id >= 0) {
            const auto idv = parse_double(trim(fields[static_cast<std::size_t>(col_id)]));
            if (!idv || *idv != std::floor(*idv) || *idv < 0.0 ||
                *idv >= static_cast<double>(n)) {
                throw DataError("id outside 0.." + std::to_string(n - 1) + ", row " +
                                std::to_string(row));
            }
            position = static_cast<std::size_t>(*idv);
            if (filled[position]) {
                throw DataError("duplicate id " + std::to_string(position) + ", row " +
                                std::to_string(row));
            }
        }
        filled[position] = 1;
        ++seen;
        probs[position] = *p;

        if (col_label >= 0) {
            const auto lv = parse_double(trim(fields[static_cast<std::size_t>(col_label)]));
            if (!lv || (*lv != 0.0 && *lv != 1.0)) {
                throw DataError("label outside {0,1}, row " + std::to_string(row));
            }
            file_labels[position] = static_cast<int>(*lv);
            any_label = true;
            const std::optional<int>& cohort_label = cohort.records[position].label;
            if (cohort_label && *cohort_label != file_labels[position]) {
                throw DataError("label mismatch, row " + std::to_string(row));
            }
        }
    }
    if (!have_header) throw DataError("empty input: missing header row");
    if (seen != n) {
        throw DataError("row count mismatch: expected " + std::to_string(n) + " rows, got " +
                        std::to_string(seen));
    }

    ScoredSet out;
    out.scores = std::move(probs);
    out.source = name;
    out.probabilistic = true;
    if (cohort.fully_labeled()) {
        out.labels = cohort.labels();
    } else if (any_label) {
        for (int l : file_labels) {
            if (l < 0) throw DataError("label column must cover every row");
        }
        out.labels.assign(file_labels.begin(), file_labels.end());
    }
    return out;
}

}  // namespace mlenit
