#include "mlenit/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "mlenit/error.hpp"
#include "mlenit/mathfn.hpp"
#include "mlenit/textio.hpp"

namespace mlenit {

namespace {

void check_positive_finite(double v, const char* field) {
    if (!std::isfinite(v)) {
        throw DataError(std::string("non-finite value, field ") + field);
    }
    if (v <= 0.0) {
        throw DataError(std::string("non-positive value, field ") + field);
    }
}

}  // namespace

const char* feature_name(Feature f) {
    switch (f) {
        case Feature::Age: return "age";
        case Feature::Fib4: return "fib4";
        case Feature::Ast: return "ast";
        case Feature::Plt: return "plt";
        case Feature::Alt: return "alt";
    }
    throw UsageError("unknown feature id");
}

Feature feature_from_name(const std::string& name) {
    const std::string n = to_lower(trim(name));
    for (Feature f : kAllFeatures) {
        if (n == feature_name(f)) return f;
    }
    throw DataError("unknown feature name: " + name);
}

double feature_value(const PatientRecord& rec, Feature f) {
    switch (f) {
        case Feature::Age: return rec.age;
        case Feature::Fib4: return rec.fib4;
        case Feature::Ast: return rec.ast;
        case Feature::Plt: return rec.plt;
        case Feature::Alt: return rec.alt;
    }
    throw UsageError("unknown feature id");
}

void set_feature_value(PatientRecord& rec, Feature f, double value) {
    switch (f) {
        case Feature::Age: rec.age = value; return;
        case Feature::Fib4: rec.fib4 = value; return;
        case Feature::Ast: rec.ast = value; return;
        case Feature::Plt: rec.plt = value; return;
        case Feature::Alt: rec.alt = value; return;
    }
    throw UsageError("unknown feature id");
}

bool Cohort::fully_labeled() const {
    return std::all_of(records.begin(), records.end(),
                       [](const PatientRecord& r) { return r.label.has_value(); });
}

std::vector<int> Cohort::labels() const {
    std::vector<int> out;
    out.reserve(records.size());
    for (const PatientRecord& r : records) {
        if (!r.label) throw DataError("unlabeled record in cohort '" + name + "'");
        out.push_back(*r.label);
    }
    return out;
}

double compute_fib4(double age, double ast, double alt, double plt) {
    check_positive_finite(age, "age");
    check_positive_finite(ast, "ast");
    check_positive_finite(alt, "alt");
    check_positive_finite(plt, "plt");
    return age * ast / (plt * std::sqrt(alt));
}

namespace {

struct ColumnMap {
    // indices into the split header, -1 when absent
    int age = -1, ast = -1, alt = -1, plt = -1, fib4 = -1, label = -1;
    std::size_t width = 0;
};

ColumnMap parse_header(const std::string& line) {
    ColumnMap map;
    const std::vector<std::string> fields = split_line(line, ',');
    map.width = fields.size();
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const std::string name = to_lower(trim(fields[i]));
        int* slot = nullptr;
        if (name == "age") slot = &map.age;
        else if (name == "ast") slot = &map.ast;
        else if (name == "alt") slot = &map.alt;
        else if (name == "plt") slot = &map.plt;
        else if (name == "fib4") slot = &map.fib4;
        else if (name == "label") slot = &map.label;
        else throw DataError("unknown column: " + trim(fields[i]));
        if (*slot != -1) throw DataError("duplicate column: " + name);
        *slot = static_cast<int>(i);
    }
    if (map.age < 0) throw DataError("missing required column: age");
    if (map.ast < 0) throw DataError("missing required column: ast");
    if (map.alt < 0) throw DataError("missing required column: alt");
    if (map.plt < 0) throw DataError("missing required column: plt");
    return map;
}

double parse_clinical(const std::string& field, std::size_t row, const char* name) {
    const auto v = parse_double(field);
    if (!v) {
        throw DataError("unparsable number, row " + std::to_string(row) + ", field " + name);
    }
    if (!std::isfinite(*v)) {
        throw DataError("non-finite value, row " + std::to_string(row) + ", field " + name);
    }
    if (*v <= 0.0) {
        throw DataError("non-positive value, row " + std::to_string(row) + ", field " + name);
    }
    return *v;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

Cohort load_cohort(std::istream& in, const std::string& name, const Fib4Policy& policy) {
    std::string line;
    bool have_header = false;
    ColumnMap map;
    Cohort cohort;
    cohort.name = name;
    std::size_t row = 0;

    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (!have_header) {
            if (!line.empty() && line[0] == '#') continue;  // leading comments
            if (trim(line).empty()) throw DataError("blank line before header");
            map = parse_header(line);
            if (policy.kind == Fib4Policy::Kind::Verify && map.fib4 < 0) {
                throw DataError("fib4 column required under verify policy");
            }
            have_header = true;
            continue;
        }
        ++row;
        if (trim(line).empty()) {
            throw DataError("blank line, row " + std::to_string(row));
        }
        const std::vector<std::string> fields = split_line(line, ',');
        if (fields.size() != map.width) {
            throw DataError("wrong field count, row " + std::to_string(row) + ": expected " +
                            std::to_string(map.width) + ", got " + std::to_string(fields.size()));
        }

        PatientRecord rec;
        rec.age = parse_clinical(fields[static_cast<std::size_t>(map.age)], row, "age");
        rec.ast = parse_clinical(fields[static_cast<std::size_t>(map.ast)], row, "ast");
        rec.alt = parse_clinical(fields[static_cast<std::size_t>(map.alt)], row, "alt");
        rec.plt = parse_clinical(fields[static_cast<std::size_t>(map.plt)], row, "plt");
        rec.fib4 = compute_fib4(rec.age, rec.ast, rec.alt, rec.plt);

        if (map.fib4 >= 0 && policy.kind == Fib4Policy::Kind::Verify) {
            const double given =
                parse_clinical(fields[static_cast<std::size_t>(map.fib4)], row, "fib4");
            if (std::fabs(given - rec.fib4) > policy.rel_tol * std::fabs(rec.fib4)) {
                throw DataError("fib4 mismatch row " + std::to_string(row) + ": provided " +
                                format_double(given) + ", recomputed " + format_double(rec.fib4));
            }
        }

        if (map.label >= 0) {
            const std::string& f = fields[static_cast<std::size_t>(map.label)];
            const auto v = parse_double(f);
            if (!v || (*v != 0.0 && *v != 1.0)) {
                throw DataError("label outside {0,1}, row " + std::to_string(row));
            }
            rec.label = static_cast<int>(*v);
        }
        cohort.records.push_back(rec);
    }
    if (!have_header) throw DataError("empty input: missing header row");
    return cohort;
}

void save_cohort(std::ostream& out, const Cohort& cohort,
                 const std::vector<std::string>& header_comments) {
    const bool labeled = cohort.fully_labeled();
    if (!labeled) {
        for (const PatientRecord& r : cohort.records) {
            if (r.label) {
                throw DataError("cohort mixes labeled and unlabeled records; cannot save");
            }
        }
    }
    for (const std::string& c : header_comments) out << "# " << c << "\n";
    out << "age,ast,alt,plt,fib4";
    if (labeled && !cohort.records.empty()) out << ",label";
    out << "\n";
    for (const PatientRecord& r : cohort.records) {
        out << format_double(r.age) << ',' << format_double(r.ast) << ',' << format_double(r.alt)
            << ',' << format_double(r.plt) << ',' << format_double(r.fib4);
        if (labeled && !cohort.records.empty()) out << ',' << *r.label;
        out << "\n";
    }
}

std::pair<Cohort, Cohort> split_cohort(const Cohort& cohort, double train_fraction,
                                       std::uint64_t seed, bool stratified) {
    const std::size_t n = cohort.size();
    if (n < 2) throw DataError("cohort too small to split");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw UsageError("train fraction must lie in (0, 1)");
    }
    const std::vector<int> labels = cohort.labels();

    const auto n_train_ll = std::llround(train_fraction * static_cast<double>(n));
    if (n_train_ll < 1 || static_cast<std::size_t>(n_train_ll) >= n) {
        throw DataError("degenerate split: a side would be empty");
    }
    const std::size_t n_train = static_cast<std::size_t>(n_train_ll);

    std::vector<std::size_t> train_idx;
    if (!stratified) {
        Rng rng(derive_seed(seed, 0));
        std::vector<std::size_t> perm = rng.permutation(n);
        train_idx.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    } else {
        std::vector<std::size_t> by_class[2];
        for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
        if (by_class[0].empty() || by_class[1].empty()) {
            throw DataError("single-class cohort cannot be stratified");
        }

        std::size_t take[2];
        for (int c = 0; c < 2; ++c) {
            take[c] = static_cast<std::size_t>(
                std::llround(train_fraction * static_cast<double>(by_class[c].size())));
        }
        // Two roundings can miss the overall target by one; adjust the larger
        // class so each per-class count stays within 1 of its own rounding.
        while (take[0] + take[1] != n_train) {
            const int c = by_class[0].size() >= by_class[1].size() ? 0 : 1;
            if (take[0] + take[1] > n_train) --take[c];
            else ++take[c];
        }
        for (int c = 0; c < 2; ++c) {
            if (take[c] < 1 || take[c] >= by_class[c].size()) {
                throw DataError("stratified split would leave a side without class " +
                                std::to_string(c));
            }
            Rng rng(derive_seed(seed, 1 + static_cast<std::uint64_t>(c)));
            rng.shuffle(by_class[c]);
            train_idx.insert(train_idx.end(), by_class[c].begin(),
                             by_class[c].begin() + static_cast<std::ptrdiff_t>(take[c]));
        }
    }

    std::sort(train_idx.begin(), train_idx.end());
    std::vector<bool> in_train(n, false);
    for (std::size_t i : train_idx) in_train[i] = true;

    Cohort train, tune;
    train.name = cohort.name + "/train";
    tune.name = cohort.name + "/tune";
    for (std::size_t i = 0; i < n; ++i) {
        (in_train[i] ? train : tune).records.push_back(cohort.records[i]);
    }
    return {std::move(train), std::move(tune)};
}

StandardizationParams fit_standardizer(const Cohort& cohort) {
    return fit_standardizer(cohort, std::vector<Feature>(kAllFeatures.begin(), kAllFeatures.end()));
}

StandardizationParams fit_standardizer(const Cohort& cohort, const std::vector<Feature>& features) {
    std::vector<std::size_t> rows(cohort.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return fit_standardizer(cohort, features, rows);
}

StandardizationParams fit_standardizer(const Cohort& cohort, const std::vector<Feature>& features,
                                       const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw DataError("cannot standardize an empty cohort");
    if (features.empty()) throw UsageError("cannot standardize an empty feature set");
    StandardizationParams params;
    params.features = features;
    for (Feature f : features) {
        double sum = 0.0;
        for (std::size_t r : rows) sum += feature_value(cohort.records[r], f);
        const double mean = sum / static_cast<double>(rows.size());
        double ss = 0.0;
        for (std::size_t r : rows) {
            const double d = feature_value(cohort.records[r], f) - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(rows.size()));
        if (!(sd > 0.0)) {
            throw DataError(std::string("zero variance: ") + feature_name(f));
        }
        params.means.push_back(mean);
        params.sds.push_back(sd);
    }
    return params;
}

FeatureMatrix apply_standardizer(const StandardizationParams& params, const Cohort& cohort) {
    std::vector<std::size_t> rows(cohort.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return apply_standardizer(params, cohort, rows);
}

FeatureMatrix apply_standardizer(const StandardizationParams& params, const Cohort& cohort,
                                 const std::vector<std::size_t>& rows) {
    FeatureMatrix m;
    m.rows = rows.size();
    m.cols = params.features.size();
    m.values.resize(m.rows * m.cols);
    bool all_labeled = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const PatientRecord& rec = cohort.records[rows[i]];
        for (std::size_t j = 0; j < params.features.size(); ++j) {
            m.at(i, j) = (feature_value(rec, params.features[j]) - params.means[j]) / params.sds[j];
        }
        all_labeled = all_labeled && rec.label.has_value();
    }
    if (all_labeled) {
        m.labels.reserve(rows.size());
        for (std::size_t r : rows) m.labels.push_back(*cohort.records[r].label);
    }
    return m;
}

namespace {

FeatureMoments parse_moments(const nlohmann::json& j, const char* cls, const char* feat) {
    if (!j.contains("mean") || !j.contains("sd")) {
        throw DataError(std::string("synthetic spec: ") + cls + "." + feat +
                        " must provide mean and sd");
    }
    FeatureMoments m;
    m.mean = j.at("mean").get<double>();
    m.sd = j.at("sd").get<double>();
    if (!(std::isfinite(m.mean) && m.mean > 0.0)) {
        throw DataError(std::string("synthetic spec: ") + cls + "." + feat +
                        ".mean must be positive");
    }
    if (!(std::isfinite(m.sd) && m.sd >= 0.0)) {
        throw DataError(std::string("synthetic spec: ") + cls + "." + feat +
                        ".sd must be non-negative");
    }
    return m;
}

ClassMoments parse_class(const nlohmann::json& j, const char* cls) {
    ClassMoments m;
    m.age = parse_moments(j.at("age"), cls, "age");
    m.ast = parse_moments(j.at("ast"), cls, "ast");
    m.alt = parse_moments(j.at("alt"), cls, "alt");
    m.plt = parse_moments(j.at("plt"), cls, "plt");
    return m;
}

nlohmann::json moments_to_json(const FeatureMoments& m) {
    return nlohmann::json{{"mean", m.mean}, {"sd", m.sd}};
}

nlohmann::json class_to_json(const ClassMoments& m) {
    return nlohmann::json{{"age", moments_to_json(m.age)},
                          {"ast", moments_to_json(m.ast)},
                          {"alt", moments_to_json(m.alt)},
                          {"plt", moments_to_json(m.plt)}};
}

}  // namespace

SyntheticSpec parse_synthetic_spec(std::istream& in) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("synthetic spec is not valid JSON: ") + e.what());
    }
    try {
        SyntheticSpec spec;
        spec.n = j.at("n").get<std::size_t>();
        spec.prevalence = j.at("prevalence").get<double>();
        spec.seed = j.at("seed").get<std::uint64_t>();
        const nlohmann::json& classes = j.at("classes");
        spec.early = parse_class(classes.at("early"), "early");
        spec.advanced = parse_class(classes.at("advanced"), "advanced");
        if (!(spec.prevalence > 0.0 && spec.prevalence < 1.0)) {
            throw DataError("synthetic spec: prevalence must lie strictly in (0, 1)");
        }
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("synthetic spec: ") + e.what());
    }
}

std::string synthetic_spec_to_json(const SyntheticSpec& spec) {
    const nlohmann::json j{{"n", spec.n},
                           {"prevalence", spec.prevalence},
                           {"seed", spec.seed},
                           {"classes",
                            {{"early", class_to_json(spec.early)},
                             {"advanced", class_to_json(spec.advanced)}}}};
    return j.dump(2);
}

namespace {

// Hazard (Mills ratio inverse) of the standard normal at a.
double mills(double a) { return normal_pdf(a) / (1.0 - normal_cdf(a)); }

// Coefficient of variation of a standard normal truncated to (a, inf),
// expressed in the shifted frame where the cut sits at alpha = a.
double truncated_cv(double alpha) {
    const double lam = mills(alpha);
    const double mean = lam - alpha;
    const double var = 1.0 + alpha * lam - lam * lam;
    return std::sqrt(std::max(var, 0.0)) / mean;
}

}  // namespace

TruncatedNormal match_truncated_normal(double mean, double sd) {
    if (!(mean > 0.0) || !(sd >= 0.0)) {
        throw DataError("truncated normal needs mean > 0 and sd >= 0");
    }
    if (sd == 0.0) return {mean, 0.0};
    const double cv = sd / mean;
    if (cv >= 1.0) {
        throw DataError("infeasible moments for positive-valued sampling: sd/mean must be < 1");
    }

    // cv is monotone in the truncation point alpha = -mu/sigma: below -12 the
    // cut carries no double-precision mass, above 35 cv has flattened at 1.
    double lo = -12.0, hi = 35.0;
    if (cv <= truncated_cv(lo)) return {mean, sd};
    if (cv >= truncated_cv(hi)) {
        throw DataError("infeasible moments for positive-valued sampling: sd/mean too close to 1");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        (truncated_cv(mid) < cv ? lo : hi) = mid;
    }
    const double alpha = 0.5 * (lo + hi);
    const double sigma = mean / (mills(alpha) - alpha);
    return {-alpha * sigma, sigma};
}

double sample_truncated_positive(Rng& rng, const TruncatedNormal& dist) {
    if (dist.sigma == 0.0) return dist.mu;
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const double x = rng.normal(dist.mu, dist.sigma);
        if (x > 0.0) return x;
    }
    throw NumericError("positive-truncated sampling kept rejecting; distribution sits below zero");
}

Cohort generate_synthetic_cohort(const SyntheticSpec& spec) {
    if (spec.n == 0) throw DataError("infeasible spec: n must be positive");
    if (!(spec.prevalence > 0.0 && spec.prevalence < 1.0)) {
        throw DataError("infeasible spec: prevalence must lie strictly in (0, 1)");
    }
    const auto n_pos_ll = std::llround(spec.prevalence * static_cast<double>(spec.n));
    if (n_pos_ll < 1 || static_cast<std::size_t>(n_pos_ll) >= spec.n) {
        throw DataError("infeasible spec: prevalence*n rounds to an empty class");
    }
    const std::size_t n_pos = static_cast<std::size_t>(n_pos_ll);

    struct ClassDists {
        TruncatedNormal age, ast, alt, plt;
    };
    const auto build = [](const ClassMoments& m) {
        return ClassDists{match_truncated_normal(m.age.mean, m.age.sd),
                          match_truncated_normal(m.ast.mean, m.ast.sd),
                          match_truncated_normal(m.alt.mean, m.alt.sd),
                          match_truncated_normal(m.plt.mean, m.plt.sd)};
    };
    const ClassDists dists[2] = {build(spec.early), build(spec.advanced)};

    std::vector<int> labels(spec.n, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_pos), 1);
    Rng label_rng(derive_seed(spec.seed, 0));
    label_rng.shuffle(labels);

    Rng value_rng(derive_seed(spec.seed, 1));
    Cohort cohort;
    cohort.name = "synthetic";
    cohort.records.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const ClassDists& d = dists[labels[i]];
        PatientRecord rec;
        rec.age = sample_truncated_positive(value_rng, d.age);
        rec.ast = sample_truncated_positive(value_rng, d.ast);
        rec.alt = sample_truncated_positive(value_rng, d.alt);
        rec.plt = sample_truncated_positive(value_rng, d.plt);
        rec.fib4 = compute_fib4(rec.age, rec.ast, rec.alt, rec.plt);
        rec.label = labels[i];
        cohort.records.push_back(rec);
    }
    return cohort;
}

}  // namespace mlenit
