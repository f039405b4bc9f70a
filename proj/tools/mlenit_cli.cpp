#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mlenit/calibration.hpp"
#include "mlenit/cohort.hpp"
#include "mlenit/dca.hpp"
#include "mlenit/error.hpp"
#include "mlenit/evalharness.hpp"
#include "mlenit/metrics.hpp"
#include "mlenit/sdnn.hpp"
#include "mlenit/stats.hpp"
#include "mlenit/textio.hpp"

namespace {

using namespace mlenit;
using nlohmann::json;

struct Options {
    std::string input, model, out, import_path, name, fib4_cal;
    std::vector<std::string> imports;
    bool use_fib4 = false;
    std::uint64_t seed = 0;
    double threshold = 0.50;
    double fib4_cutoff = 1.3;
    std::size_t bins = 10;
    std::size_t B = 2000;
    std::size_t repeats = 30;
    std::size_t k = 10;
    unsigned threads = 1;
    std::string grid = "0.05:0.50:0.01";
    std::string criterion = "youden";
    std::string statistic = "probability_auc";
    std::string format = "csv";
    double step = 0.01;
    bool force = false;
    double verify_fib4 = -1.0;  // < 0: recompute policy

    double age = 0.0, ast = 0.0, alt = 0.0, plt = 0.0;

    std::size_t epochs = 100;
    double lr = 1e-3;
    std::string batch = "32";
    std::string hidden = "17,5,23";
    std::string weighting = "balanced";
    double w_neg = 1.0, w_pos = 1.0;
};

std::string path_stem(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    return in;
}

void write_output(const std::string& path, bool force, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    if (std::filesystem::exists(path) && !force) {
        throw UsageError("output exists: " + path + " (pass --force to overwrite)");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
    out.flush();
    if (!out) throw DataError("cannot write file: " + path);
}

Cohort load_cohort_file(const Options& o) {
    std::ifstream in = open_input(o.input);
    const Fib4Policy policy =
        o.verify_fib4 >= 0.0 ? Fib4Policy::verify(o.verify_fib4) : Fib4Policy::recompute();
    return load_cohort(in, path_stem(o.input), policy);
}

SdnnModel load_model_file(const std::string& path) {
    std::ifstream in = open_input(path);
    return deserialize_model(in);
}

std::vector<std::size_t> parse_hidden(const std::string& text) {
    std::vector<std::size_t> widths;
    for (const std::string& part : split_line(text, ',')) {
        const auto v = parse_double(trim(part));
        if (!v || *v < 1.0 || *v != std::floor(*v)) {
            throw UsageError("hidden widths must be positive integers, got \"" + text + "\"");
        }
        widths.push_back(static_cast<std::size_t>(*v));
    }
    if (widths.empty()) throw UsageError("hidden widths must not be empty");
    return widths;
}

TrainingConfig training_from(const Options& o) {
    TrainingConfig cfg;
    cfg.epochs = o.epochs;
    cfg.learning_rate = o.lr;
    if (o.batch == "full") {
        cfg.batch_size = kFullBatch;
    } else {
        const auto v = parse_double(trim(o.batch));
        if (!v || *v < 1.0 || *v != std::floor(*v)) {
            throw UsageError("batch must be a positive integer or \"full\"");
        }
        cfg.batch_size = static_cast<std::size_t>(*v);
    }
    cfg.weighting = weighting_from_name(o.weighting);
    cfg.w_neg = o.w_neg;
    cfg.w_pos = o.w_pos;
    cfg.seed = o.seed;
    cfg.hidden_widths = parse_hidden(o.hidden);
    return cfg;
}

json training_json(const TrainingConfig& t) {
    return json{{"epochs", t.epochs},
                {"learning_rate", t.learning_rate},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"epsilon", t.epsilon},
                {"batch_size",
                 t.batch_size == kFullBatch ? json("full") : json(t.batch_size)},
                {"weighting", weighting_name(t.weighting)},
                {"w_neg", t.w_neg},
                {"w_pos", t.w_pos},
                {"init_scheme", t.init_scheme},
                {"seed", t.seed},
                {"hidden_widths", t.hidden_widths}};
}

std::string csv_value(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

// Exactly one scoring strategy per run; which flags exist depends on the
// subcommand, unset ones stay empty here.
ScoredSet strategy_set(const Options& o, const Cohort& cohort, double& threshold,
                       json& strategy_echo) {
    const int given = static_cast<int>(!o.model.empty()) +
                      static_cast<int>(!o.import_path.empty()) + static_cast<int>(o.use_fib4);
    if (given != 1) {
        throw UsageError("choose exactly one scoring strategy (--model, --import, or --fib4)");
    }
    if (!o.model.empty()) {
        const SdnnModel model = load_model_file(o.model);
        threshold = o.threshold;
        strategy_echo = json{{"kind", "sdnn"}, {"model", o.model}, {"threshold", threshold}};
        return predict(model, cohort);
    }
    if (!o.import_path.empty()) {
        std::ifstream in = open_input(o.import_path);
        const std::string name = o.name.empty() ? path_stem(o.import_path) : o.name;
        threshold = o.threshold;
        strategy_echo =
            json{{"kind", "import"}, {"file", o.import_path}, {"name", name},
                 {"threshold", threshold}};
        return import_predictions(in, cohort, name);
    }
    ScoredSet set;
    set.scores.reserve(cohort.size());
    for (const PatientRecord& r : cohort.records) set.scores.push_back(r.fib4);
    if (cohort.fully_labeled()) set.labels = cohort.labels();
    set.source = "fib4";
    set.probabilistic = false;
    threshold = o.fib4_cutoff;
    strategy_echo = json{{"kind", "fib4"}, {"cutoff", o.fib4_cutoff}};
    return set;
}

json interval_json(const BootstrapResult& r) {
    return json{{"lo", r.lo},
                {"hi", r.hi},
                {"b_requested", r.b_requested},
                {"b_effective", r.b_effective},
                {"redraws", r.redraws},
                {"seed", r.seed}};
}

void run_fib4(const Options& o) {
    std::cout << format_double(compute_fib4(o.age, o.ast, o.alt, o.plt)) << "\n";
}

void run_synth(const Options& o, bool seed_given) {
    std::ifstream in = open_input(o.input);
    SyntheticSpec spec = parse_synthetic_spec(in);
    if (seed_given) spec.seed = o.seed;
    const Cohort cohort = generate_synthetic_cohort(spec);
    const json cfg{{"subcommand", "synth"},
                   {"input", o.input},
                   {"out", o.out},
                   {"spec", json::parse(synthetic_spec_to_json(spec))}};
    std::ostringstream body;
    save_cohort(body, cohort, {"config = " + cfg.dump()});
    write_output(o.out, o.force, body.str());
}

void run_train(const Options& o) {
    const Cohort cohort = load_cohort_file(o);
    const TrainingConfig cfg = training_from(o);
    const SdnnModel model = train(cohort, cfg);
    write_output(o.out, o.force, serialize_model(model));
    std::cout << "trained on " << cohort.size() << " records; final loss "
              << format_double(model.final_loss) << "; model " << o.out << "\n";
}

void run_predict(const Options& o) {
    const Cohort cohort = load_cohort_file(o);
    const SdnnModel model = load_model_file(o.model);
    const ScoredSet set = predict(model, cohort);
    const json cfg{{"subcommand", "predict"}, {"input", o.input},   {"model", o.model},
                   {"out", o.out},            {"format", o.format}, {"source", set.source}};
    std::ostringstream body;
    if (o.format == "json") {
        json rows = json::array();
        for (std::size_t i = 0; i < set.scores.size(); ++i) {
            json row{{"id", i}, {"prob", set.scores[i]}};
            if (!set.labels.empty()) row["label"] = set.labels[i];
            rows.push_back(std::move(row));
        }
        body << json{{"config", cfg}, {"n", set.scores.size()}, {"predictions", rows}}.dump(2)
             << "\n";
    } else {
        body << "# config = " << cfg.dump() << "\n";
        body << (set.labels.empty() ? "id,prob" : "id,prob,label") << "\n";
        for (std::size_t i = 0; i < set.scores.size(); ++i) {
            body << i << ',' << format_double(set.scores[i]);
            if (!set.labels.empty()) body << ',' << set.labels[i];
            body << "\n";
        }
    }
    write_output(o.out, o.force, body.str());
}

void run_eval_common(const Options& o, const char* subcommand) {
    const Cohort cohort = load_cohort_file(o);
    double threshold = o.threshold;
    json strategy_echo;
    const ScoredSet set = strategy_set(o, cohort, threshold, strategy_echo);
    validate_scored_set(set, true);

    const json cfg{{"subcommand", subcommand}, {"input", o.input},
                   {"strategy", strategy_echo}, {"threshold", threshold},
                   {"B", o.B},                  {"seed", o.seed},
                   {"threads", o.threads},      {"format", o.format},
                   {"out", o.out}};

    const ConfusionCounts counts = confusion_at_threshold(set, threshold);
    MetricReport report = metric_report(counts);
    try {
        report.probability_auc = probability_auc(set);
    } catch (const DataError&) {
    }
    std::optional<double> brier_score;
    if (set.probabilistic) brier_score = brier(set);

    std::optional<BootstrapResult> tauc_ci, pauc_ci, brier_ci;
    if (o.B > 0) {
        if (report.thresholded_auc) {
            tauc_ci = bootstrap_ci(set, StatisticKind::ThresholdedAuc, threshold, o.B, o.seed,
                                   o.threads);
        }
        if (report.probability_auc) {
            pauc_ci = bootstrap_ci(set, StatisticKind::ProbabilityAuc, threshold, o.B, o.seed,
                                   o.threads);
        }
        if (brier_score) {
            brier_ci =
                bootstrap_ci(set, StatisticKind::Brier, threshold, o.B, o.seed, o.threads);
        }
    }

    std::size_t n_pos = 0;
    for (int y : set.labels) n_pos += static_cast<std::size_t>(y);
    const double prevalence = static_cast<double>(n_pos) / static_cast<double>(counts.total());

    std::ostringstream body;
    if (o.format == "json") {
        json metrics;
        const auto put = [&metrics](const char* key, const std::optional<double>& v) {
            if (v) metrics[key] = *v;
        };
        put("sensitivity", report.sensitivity);
        put("specificity", report.specificity);
        put("accuracy", report.accuracy);
        put("f1", report.f1);
        put("thresholded_auc", report.thresholded_auc);
        put("probability_auc", report.probability_auc);
        put("brier", brier_score);
        json ci;
        if (tauc_ci) ci["thresholded_auc"] = interval_json(*tauc_ci);
        if (pauc_ci) ci["probability_auc"] = interval_json(*pauc_ci);
        if (brier_ci) ci["brier"] = interval_json(*brier_ci);
        json doc{{"config", cfg},
                 {"n", counts.total()},
                 {"prevalence", prevalence},
                 {"confusion",
                  {{"tp", counts.tp},
                   {"fp", counts.fp},
                   {"tn", counts.tn},
                   {"fn", counts.fn},
                   {"threshold", counts.threshold}}},
                 {"metrics", metrics}};
        if (!ci.empty()) doc["ci"] = ci;
        body << doc.dump(2) << "\n";
    } else {
        body << "# config = " << cfg.dump() << "\n";
        body << "metric,value,lo,hi\n";
        body << "n," << counts.total() << ",,\n";
        body << "prevalence," << format_double(prevalence) << ",,\n";
        body << "tp," << counts.tp << ",,\n";
        body << "fp," << counts.fp << ",,\n";
        body << "tn," << counts.tn << ",,\n";
        body << "fn," << counts.fn << ",,\n";
        body << "sensitivity," << csv_value(report.sensitivity) << ",,\n";
        body << "specificity," << csv_value(report.specificity) << ",,\n";
        body << "accuracy," << csv_value(report.accuracy) << ",,\n";
        body << "f1," << csv_value(report.f1) << ",,\n";
        body << "thresholded_auc," << csv_value(report.thresholded_auc) << ','
             << (tauc_ci ? format_double(tauc_ci->lo) : "") << ','
             << (tauc_ci ? format_double(tauc_ci->hi) : "") << "\n";
        body << "probability_auc," << csv_value(report.probability_auc) << ','
             << (pauc_ci ? format_double(pauc_ci->lo) : "") << ','
             << (pauc_ci ? format_double(pauc_ci->hi) : "") << "\n";
        body << "brier," << csv_value(brier_score) << ','
             << (brier_ci ? format_double(brier_ci->lo) : "") << ','
             << (brier_ci ? format_double(brier_ci->hi) : "") << "\n";
    }
    write_output(o.out, o.force, body.str());
}

void run_calibrate(const Options& o) {
    const Cohort cohort = load_cohort_file(o);
    double threshold = o.threshold;
    json strategy_echo;
    const ScoredSet set = strategy_set(o, cohort, threshold, strategy_echo);
    validate_scored_set(set, true);
    if (!set.probabilistic) throw DataError("calibration requires probabilistic scores");

    const ReliabilityBins bins = reliability_bins(set, o.bins);
    const double brier_score = brier(set);
    const double ece_score = ece(bins);

    const json cfg{{"subcommand", "calibrate"}, {"input", o.input},
                   {"strategy", strategy_echo}, {"bins", o.bins},
                   {"format", o.format},        {"out", o.out}};
    std::ostringstream body;
    if (o.format == "json") {
        json rows = json::array();
        for (const ReliabilityBin& b : bins.bins) {
            json row{{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}};
            if (b.mean_pred) row["mean_pred"] = *b.mean_pred;
            if (b.obs_freq) row["obs_freq"] = *b.obs_freq;
            rows.push_back(std::move(row));
        }
        body << json{{"config", cfg},
                     {"n", bins.n},
                     {"brier", brier_score},
                     {"ece", ece_score},
                     {"bins", rows}}
                    .dump(2)
             << "\n";
    } else {
        body << "# config = " << cfg.dump() << "\n";
        body << "# brier = " << format_double(brier_score) << "\n";
        body << "# ece = " << format_double(ece_score) << "\n";
        body << "bin_lo,bin_hi,count,mean_pred,obs_freq\n";
        for (const ReliabilityBin& b : bins.bins) {
            body << format_double(b.lo) << ',' << format_double(b.hi) << ',' << b.count << ','
                 << csv_value(b.mean_pred) << ',' << csv_value(b.obs_freq) << "\n";
        }
    }
    write_output(o.out, o.force, body.str());
}

void run_dca(const Options& o) {
    const Cohort cohort = load_cohort_file(o);
    std::vector<ScoredSet> models;
    json strategy_echo = json::array();
    if (!o.fib4_cal.empty()) {
        Options train_opts = o;
        train_opts.input = o.fib4_cal;
        const Cohort train_cohort = load_cohort_file(train_opts);
        const Fib4Calibration calib = fit_fib4_calibration(train_cohort);
        models.push_back(apply_fib4_calibration(calib, cohort));
        strategy_echo.push_back(json{{"kind", "fib4_cal"},
                                     {"train", o.fib4_cal},
                                     {"beta0", calib.fit.beta0},
                                     {"beta1", calib.fit.beta1}});
    }
    for (const std::string& path : o.imports) {
        std::ifstream in = open_input(path);
        const std::string name = path_stem(path);
        models.push_back(import_predictions(in, cohort, name));
        strategy_echo.push_back(json{{"kind", "import"}, {"file", path}, {"name", name}});
    }
    if (!o.model.empty()) {
        const SdnnModel model = load_model_file(o.model);
        ScoredSet set = predict(model, cohort);
        set.source = "sdnn";
        models.push_back(std::move(set));
        strategy_echo.push_back(json{{"kind", "sdnn"}, {"model", o.model}});
    }

    const ThresholdGrid grid = parse_grid(o.grid);
    const DcaTable table = dca_curves(models, grid);

    const std::vector<std::pair<double, double>> default_ranges{
        {0.05, 0.20}, {0.10, 0.30}, {0.20, 0.50}};
    std::vector<std::pair<double, double>> ranges;
    for (const auto& r : default_ranges) {
        for (double t : table.thresholds) {
            if (t >= r.first - 1e-9 && t <= r.second + 1e-9) {
                ranges.push_back(r);
                break;
            }
        }
    }
    const DcaSummary summary = summarize_dca(table, ranges);

    const json cfg{{"subcommand", "dca"}, {"input", o.input}, {"strategies", strategy_echo},
                   {"grid", o.grid},      {"format", o.format}, {"out", o.out}};
    std::ostringstream body;
    if (o.format == "json") {
        json curves = json::array();
        for (std::size_t s = 0; s < table.strategies.size(); ++s) {
            curves.push_back(
                json{{"strategy", table.strategies[s]}, {"net_benefit", table.net_benefits[s]}});
        }
        json range_rows = json::array();
        for (const DcaRangeSummary& r : summary.ranges) {
            json means;
            for (std::size_t s = 0; s < summary.strategies.size(); ++s) {
                means[summary.strategies[s]] = r.mean_net_benefit[s];
            }
            range_rows.push_back(json{{"lo", r.lo}, {"hi", r.hi}, {"mean_net_benefit", means}});
        }
        json best;
        for (std::size_t m = 0; m < summary.model_strategies.size(); ++m) {
            best[summary.model_strategies[m]] = summary.best_fraction[m];
        }
        body << json{{"config", cfg},
                     {"n", table.n},
                     {"prevalence", table.prevalence},
                     {"thresholds", table.thresholds},
                     {"curves", curves},
                     {"summary", {{"ranges", range_rows}, {"best_fraction", best}}}}
                    .dump(2)
             << "\n";
    } else {
        body << "# config = " << cfg.dump() << "\n";
        body << "threshold,strategy,net_benefit\n";
        for (std::size_t i = 0; i < table.thresholds.size(); ++i) {
            for (std::size_t s = 0; s < table.strategies.size(); ++s) {
                body << format_double(table.thresholds[i]) << ',' << table.strategies[s] << ','
                     << format_double(table.net_benefits[s][i]) << "\n";
            }
        }
    }
    write_output(o.out, o.force, body.str());
}

void run_stats(const Options& o) {
    const Cohort cohort = load_cohort_file(o);
    const std::vector<AssociationRow> rows = univariable_table(cohort);
    const json cfg{{"subcommand", "stats"},
                   {"input", o.input},
                   {"format", o.format},
                   {"out", o.out}};
    std::ostringstream body;
    if (o.format == "json") {
        json out_rows = json::array();
        for (const AssociationRow& r : rows) {
            out_rows.push_back(json{{"feature", r.feature},
                                    {"early_mean", r.early_mean},
                                    {"early_sd", r.early_sd},
                                    {"advanced_mean", r.advanced_mean},
                                    {"advanced_sd", r.advanced_sd},
                                    {"welch_t", r.welch_t},
                                    {"welch_df", r.welch_df},
                                    {"welch_p", r.welch_p},
                                    {"mw_u", r.mw_u},
                                    {"mw_p", r.mw_p},
                                    {"spearman_rho", r.spearman_rho},
                                    {"point_biserial_r", r.point_biserial_r},
                                    {"std_or", r.std_or.value},
                                    {"std_or_lo", r.std_or.lo},
                                    {"std_or_hi", r.std_or.hi},
                                    {"or_converged", r.std_or.converged}});
        }
        body << json{{"config", cfg}, {"rows", out_rows}}.dump(2) << "\n";
    } else {
        body << "# config = " << cfg.dump() << "\n";
        body << "feature,early_mean,early_sd,advanced_mean,advanced_sd,welch_t,welch_df,"
                "welch_p,mw_u,mw_p,spearman_rho,point_biserial_r,std_or,std_or_lo,std_or_hi,"
                "or_converged\n";
        for (const AssociationRow& r : rows) {
            body << r.feature << ',' << format_double(r.early_mean) << ','
                 << format_double(r.early_sd) << ',' << format_double(r.advanced_mean) << ','
                 << format_double(r.advanced_sd) << ',' << format_double(r.welch_t) << ','
                 << format_double(r.welch_df) << ',' << format_double(r.welch_p) << ','
                 << format_double(r.mw_u) << ',' << format_double(r.mw_p) << ','
                 << format_double(r.spearman_rho) << ',' << format_double(r.point_biserial_r)
                 << ',' << format_double(r.std_or.value) << ',' << format_double(r.std_or.lo)
                 << ',' << format_double(r.std_or.hi) << ','
                 << (r.std_or.converged ? "true" : "false") << "\n";
        }
    }
    write_output(o.out, o.force, body.str());
}

void run_ablate(const Options& o) {
    const Cohort cohort = load_cohort_file(o);
    const TrainingConfig cfg_train = training_from(o);
    const std::vector<AblationRow> rows = loo_ablation(cohort, cfg_train, o.k, o.seed);
    const json cfg{{"subcommand", "ablate"}, {"input", o.input},
                   {"k", o.k},               {"seed", o.seed},
                   {"training", training_json(cfg_train)},
                   {"format", o.format},     {"out", o.out}};
    std::ostringstream body;
    if (o.format == "json") {
        json out_rows = json::array();
        for (const AblationRow& r : rows) {
            out_rows.push_back(json{{"removed", r.removed},
                                    {"mean_thresholded_auc", r.mean_auc},
                                    {"fold_aucs", r.fold_aucs}});
        }
        body << json{{"config", cfg}, {"rows", out_rows}}.dump(2) << "\n";
    } else {
        body << "# config = " << cfg.dump() << "\n";
        body << "removed,fold,thresholded_auc\n";
        for (const AblationRow& r : rows) {
            for (std::size_t j = 0; j < r.fold_aucs.size(); ++j) {
                body << r.removed << ',' << j << ',' << format_double(r.fold_aucs[j]) << "\n";
            }
            body << r.removed << ",mean," << format_double(r.mean_auc) << "\n";
        }
    }
    write_output(o.out, o.force, body.str());
}

void run_importance(const Options& o) {
    const Cohort cohort = load_cohort_file(o);
    const SdnnModel model = load_model_file(o.model);
    const std::vector<ImportanceRow> rows =
        permutation_importance(model, cohort, o.threshold, o.repeats, o.seed);
    const json cfg{{"subcommand", "importance"}, {"input", o.input},
                   {"model", o.model},           {"threshold", o.threshold},
                   {"repeats", o.repeats},       {"seed", o.seed},
                   {"format", o.format},         {"out", o.out}};
    std::ostringstream body;
    if (o.format == "json") {
        json out_rows = json::array();
        for (const ImportanceRow& r : rows) {
            out_rows.push_back(json{{"feature", feature_name(r.feature)},
                                    {"mean_drop", r.mean_drop},
                                    {"sd", r.sd},
                                    {"repeats", r.repeats}});
        }
        body << json{{"config", cfg}, {"rows", out_rows}}.dump(2) << "\n";
    } else {
        body << "# config = " << cfg.dump() << "\n";
        body << "feature,mean_drop,sd,repeats\n";
        for (const ImportanceRow& r : rows) {
            body << feature_name(r.feature) << ',' << format_double(r.mean_drop) << ','
                 << format_double(r.sd) << ',' << r.repeats << "\n";
        }
    }
    write_output(o.out, o.force, body.str());
}

void run_bootstrap(const Options& o) {
    const Cohort cohort = load_cohort_file(o);
    double threshold = o.threshold;
    json strategy_echo;
    const ScoredSet set = strategy_set(o, cohort, threshold, strategy_echo);
    const StatisticKind kind = statistic_from_name(o.statistic);
    const BootstrapResult res = bootstrap_ci(set, kind, threshold, o.B, o.seed, o.threads);
    const json cfg{{"subcommand", "bootstrap"}, {"input", o.input},
                   {"strategy", strategy_echo}, {"statistic", o.statistic},
                   {"threshold", threshold},    {"B", o.B},
                   {"seed", o.seed},            {"threads", o.threads},
                   {"format", o.format},        {"out", o.out}};
    std::ostringstream body;
    if (o.format == "json") {
        body << json{{"config", cfg},
                     {"statistic", o.statistic},
                     {"point", res.point},
                     {"lo", res.lo},
                     {"hi", res.hi},
                     {"b_requested", res.b_requested},
                     {"b_effective", res.b_effective},
                     {"redraws", res.redraws},
                     {"seed", res.seed}}
                    .dump(2)
             << "\n";
    } else {
        body << "# config = " << cfg.dump() << "\n";
        body << "statistic,point,lo,hi,b_requested,b_effective,redraws,seed\n";
        body << o.statistic << ',' << format_double(res.point) << ',' << format_double(res.lo)
             << ',' << format_double(res.hi) << ',' << res.b_requested << ',' << res.b_effective
             << ',' << res.redraws << ',' << res.seed << "\n";
    }
    write_output(o.out, o.force, body.str());
}

void run_audit(const Options& o) {
    const Cohort cohort = load_cohort_file(o);
    double threshold = o.threshold;
    json strategy_echo;
    const ScoredSet set = strategy_set(o, cohort, threshold, strategy_echo);
    if (!set.probabilistic) throw DataError("threshold audit requires probabilistic scores");
    const AuditCriterion criterion = criterion_from_name(o.criterion);
    const AuditResult res = threshold_audit(set, criterion, o.step);
    const json cfg{{"subcommand", "audit"},    {"input", o.input},
                   {"strategy", strategy_echo}, {"criterion", o.criterion},
                   {"step", o.step},            {"format", o.format},
                   {"out", o.out}};
    std::ostringstream body;
    if (o.format == "json") {
        json sweep = json::array();
        for (const AuditPoint& p : res.sweep) {
            sweep.push_back(json{{"threshold", p.threshold}, {"value", p.value}});
        }
        body << json{{"config", cfg},
                     {"criterion", o.criterion},
                     {"best_threshold", res.best_threshold},
                     {"best_value", res.best_value},
                     {"sweep", sweep}}
                    .dump(2)
             << "\n";
    } else {
        body << "# config = " << cfg.dump() << "\n";
        body << "# best_threshold = " << format_double(res.best_threshold) << "\n";
        body << "# best_value = " << format_double(res.best_value) << "\n";
        body << "threshold," << o.criterion << "\n";
        for (const AuditPoint& p : res.sweep) {
            body << format_double(p.threshold) << ',' << format_double(p.value) << "\n";
        }
    }
    write_output(o.out, o.force, body.str());
}

void run_inspect(const Options& o) {
    const SdnnModel model = load_model_file(o.model);
    const std::uintmax_t bytes = std::filesystem::file_size(o.model);
    std::ostringstream arch;
    arch << model.architecture.input_dim << " -> [";
    for (std::size_t i = 0; i < model.architecture.hidden_widths.size(); ++i) {
        if (i) arch << ", ";
        arch << model.architecture.hidden_widths[i];
    }
    arch << "] -> " << model.architecture.output_dim;

    std::cout << "model: " << o.model << "\n";
    std::cout << "format_version: " << model.format_version << "\n";
    std::cout << "architecture: " << arch.str() << "\n";
    std::cout << "parameters: " << count_parameters(model.architecture) << "\n";
    std::cout << "stored_scalars: " << model.params.scalar_count() << "\n";
    std::cout << "file_bytes: " << bytes << "\n";
    std::cout << "final_loss: " << format_double(model.final_loss) << "\n";
    std::cout << "standardizer:";
    for (Feature f : model.standardizer.features) std::cout << ' ' << feature_name(f);
    std::cout << "\n";
    std::cout << "training: " << training_json(model.training).dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"non-invasive advanced-fibrosis classification toolkit"};
    app.require_subcommand(1);
    Options o;

    const auto add_cohort_flags = [&o](CLI::App* sub) {
        sub->add_option("--input", o.input, "cohort CSV")->required();
        sub->add_option("--verify-fib4", o.verify_fib4,
                        "check provided fib4 against recomputation at this relative tolerance");
    };
    const auto add_report_flags = [&o](CLI::App* sub) {
        sub->add_option("--out", o.out, "output path (default stdout)");
        sub->add_option("--format", o.format, "report format")
            ->check(CLI::IsMember({"csv", "json"}));
        sub->add_flag("--force", o.force, "overwrite an existing output file");
    };
    const auto add_training_flags = [&o](CLI::App* sub) {
        sub->add_option("--epochs", o.epochs, "training epochs");
        sub->add_option("--lr", o.lr, "Adam learning rate");
        sub->add_option("--batch", o.batch, "mini-batch size or \"full\"");
        sub->add_option("--hidden", o.hidden, "hidden widths, e.g. 17,5,23");
        sub->add_option("--weighting", o.weighting, "class weighting")
            ->check(CLI::IsMember({"balanced", "explicit", "none"}));
        sub->add_option("--w-neg", o.w_neg, "explicit weight for class 0");
        sub->add_option("--w-pos", o.w_pos, "explicit weight for class 1");
    };

    CLI::App* fib4 = app.add_subcommand("fib4", "compute the FIB-4 score");
    fib4->add_option("--age", o.age)->required();
    fib4->add_option("--ast", o.ast)->required();
    fib4->add_option("--alt", o.alt)->required();
    fib4->add_option("--plt", o.plt)->required();

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic cohort");
    synth->add_option("--input", o.input, "cohort spec JSON")->required();
    CLI::Option* synth_seed = synth->add_option("--seed", o.seed, "override the spec seed");
    synth->add_option("--out", o.out, "output path (default stdout)");
    synth->add_flag("--force", o.force, "overwrite an existing output file");

    CLI::App* train_cmd = app.add_subcommand("train", "train the classifier");
    add_cohort_flags(train_cmd);
    train_cmd->add_option("--out", o.out, "model JSON path")->required();
    train_cmd->add_option("--seed", o.seed, "training seed");
    train_cmd->add_flag("--force", o.force, "overwrite an existing output file");
    add_training_flags(train_cmd);

    CLI::App* predict_cmd = app.add_subcommand("predict", "score a cohort with a model");
    add_cohort_flags(predict_cmd);
    predict_cmd->add_option("--model", o.model, "model JSON")->required();
    add_report_flags(predict_cmd);

    CLI::App* eval = app.add_subcommand("eval", "classification metrics with bootstrap CIs");
    add_cohort_flags(eval);
    eval->add_option("--model", o.model, "model JSON");
    eval->add_flag("--fib4", o.use_fib4, "evaluate the raw FIB-4 score");
    eval->add_option("--threshold", o.threshold, "positive-call threshold");
    eval->add_option("--fib4-cutoff", o.fib4_cutoff, "FIB-4 cut-off");
    eval->add_option("--B", o.B, "bootstrap resamples (0 disables CIs)");
    eval->add_option("--seed", o.seed, "bootstrap seed");
    eval->add_option("--threads", o.threads, "bootstrap worker threads");
    add_report_flags(eval);

    CLI::App* import_eval =
        app.add_subcommand("import-eval", "evaluate externally produced predictions");
    add_cohort_flags(import_eval);
    import_eval->add_option("--import", o.import_path, "prediction CSV")->required();
    import_eval->add_option("--name", o.name, "strategy name (default: file stem)");
    import_eval->add_option("--threshold", o.threshold, "positive-call threshold");
    import_eval->add_option("--B", o.B, "bootstrap resamples (0 disables CIs)");
    import_eval->add_option("--seed", o.seed, "bootstrap seed");
    import_eval->add_option("--threads", o.threads, "bootstrap worker threads");
    add_report_flags(import_eval);

    CLI::App* calibrate = app.add_subcommand("calibrate", "reliability bins, Brier, and ECE");
    add_cohort_flags(calibrate);
    calibrate->add_option("--model", o.model, "model JSON");
    calibrate->add_option("--import", o.import_path, "prediction CSV");
    calibrate->add_option("--name", o.name, "strategy name for imports");
    calibrate->add_option("--bins", o.bins, "reliability bin count");
    add_report_flags(calibrate);

    CLI::App* dca = app.add_subcommand("dca", "decision-curve analysis");
    add_cohort_flags(dca);
    dca->add_option("--model", o.model, "model JSON");
    dca->add_option("--import", o.imports, "prediction CSV (repeatable)");
    dca->add_option("--fib4-calibration", o.fib4_cal,
                    "training cohort for the calibrated FIB-4 strategy");
    dca->add_option("--grid", o.grid, "threshold grid start:stop:step");
    add_report_flags(dca);

    CLI::App* stats = app.add_subcommand("stats", "univariable association battery");
    add_cohort_flags(stats);
    add_report_flags(stats);

    CLI::App* ablate = app.add_subcommand("ablate", "leave-one-feature-out ablation");
    add_cohort_flags(ablate);
    ablate->add_option("--k", o.k, "cross-validation folds");
    ablate->add_option("--seed", o.seed, "fold/training seed");
    add_training_flags(ablate);
    add_report_flags(ablate);

    CLI::App* importance = app.add_subcommand("importance", "permutation feature importance");
    add_cohort_flags(importance);
    importance->add_option("--model", o.model, "model JSON")->required();
    importance->add_option("--threshold", o.threshold, "positive-call threshold");
    importance->add_option("--repeats", o.repeats, "permutation repeats");
    importance->add_option("--seed", o.seed, "permutation seed");
    add_report_flags(importance);

    CLI::App* bootstrap = app.add_subcommand("bootstrap", "bootstrap CI for one statistic");
    add_cohort_flags(bootstrap);
    bootstrap->add_option("--model", o.model, "model JSON");
    bootstrap->add_option("--import", o.import_path, "prediction CSV");
    bootstrap->add_option("--name", o.name, "strategy name for imports");
    bootstrap->add_flag("--fib4", o.use_fib4, "bootstrap the raw FIB-4 score");
    bootstrap->add_option("--statistic", o.statistic, "statistic to resample")
        ->check(CLI::IsMember({"thresholded_auc", "probability_auc", "brier"}));
    bootstrap->add_option("--threshold", o.threshold, "positive-call threshold");
    bootstrap->add_option("--fib4-cutoff", o.fib4_cutoff, "FIB-4 cut-off");
    bootstrap->add_option("--B", o.B, "bootstrap resamples");
    bootstrap->add_option("--seed", o.seed, "bootstrap seed");
    bootstrap->add_option("--threads", o.threads, "bootstrap worker threads");
    add_report_flags(bootstrap);

    CLI::App* audit = app.add_subcommand("audit", "threshold sweep under a criterion");
    add_cohort_flags(audit);
    audit->add_option("--model", o.model, "model JSON");
    audit->add_option("--import", o.import_path, "prediction CSV");
    audit->add_option("--name", o.name, "strategy name for imports");
    audit->add_option("--criterion", o.criterion, "selection criterion")
        ->check(CLI::IsMember({"youden", "f1"}));
    audit->add_option("--step", o.step, "sweep step in (0,1)");
    add_report_flags(audit);

    CLI::App* inspect = app.add_subcommand("inspect", "describe a model file");
    inspect->add_option("--model", o.model, "model JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (fib4->parsed()) run_fib4(o);
        else if (synth->parsed()) run_synth(o, synth_seed->count() > 0);
        else if (train_cmd->parsed()) run_train(o);
        else if (predict_cmd->parsed()) run_predict(o);
        else if (eval->parsed()) run_eval_common(o, "eval");
        else if (import_eval->parsed()) run_eval_common(o, "import-eval");
        else if (calibrate->parsed()) run_calibrate(o);
        else if (dca->parsed()) run_dca(o);
        else if (stats->parsed()) run_stats(o);
        else if (ablate->parsed()) run_ablate(o);
        else if (importance->parsed()) run_importance(o);
        else if (bootstrap->parsed()) run_bootstrap(o);
        else if (audit->parsed()) run_audit(o);
        else if (inspect->parsed()) run_inspect(o);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
