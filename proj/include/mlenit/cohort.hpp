#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mlenit/rng.hpp"

namespace mlenit {

// Canonical model input order. All feature matrices, standardizers, and
// reports follow it unless a subset is requested explicitly.
enum class Feature { Age = 0, Fib4 = 1, Ast = 2, Plt = 3, Alt = 4 };

inline constexpr std::array<Feature, 5> kAllFeatures{
    Feature::Age, Feature::Fib4, Feature::Ast, Feature::Plt, Feature::Alt};

const char* feature_name(Feature f);
Feature feature_from_name(const std::string& name);

struct PatientRecord {
    double age = 0.0;   // years
    double ast = 0.0;   // U/L
    double alt = 0.0;   // U/L
    double plt = 0.0;   // 10^9/L
    double fib4 = 0.0;  // derived, dimensionless
    std::optional<int> label;  // 1 = advanced fibrosis, 0 = early
};

double feature_value(const PatientRecord& rec, Feature f);
void set_feature_value(PatientRecord& rec, Feature f, double value);

struct Cohort {
    std::string name;
    std::vector<PatientRecord> records;

    std::size_t size() const { return records.size(); }
    bool fully_labeled() const;
    // Labels in row order; throws DataError if any record is unlabeled.
    std::vector<int> labels() const;
};

// fib4 = age * ast / (plt * sqrt(alt)); every input strictly positive.
double compute_fib4(double age, double ast, double alt, double plt);

struct Fib4Policy {
    enum class Kind { Recompute, Verify };
    Kind kind = Kind::Recompute;
    double rel_tol = 1e-9;

    static Fib4Policy recompute() { return {Kind::Recompute, 1e-9}; }
    static Fib4Policy verify(double rel_tol) { return {Kind::Verify, rel_tol}; }
};

// CSV with header `age,ast,alt,plt[,fib4][,label]`; case-insensitive header
// names, any column order, no unknown columns, no blank lines. Lines starting
// with '#' before the header are skipped. Data row numbers in error messages
// are 1-based.
Cohort load_cohort(std::istream& in, const std::string& name, const Fib4Policy& policy);
void save_cohort(std::ostream& out, const Cohort& cohort,
                 const std::vector<std::string>& header_comments = {});

// Deterministic partition; |train| = round(train_fraction * n). Stratified
// mode keeps per-class training counts within 1 of round(train_fraction * n_c).
// Both outputs preserve the input row order.
std::pair<Cohort, Cohort> split_cohort(const Cohort& cohort, double train_fraction,
                                       std::uint64_t seed, bool stratified);

struct StandardizationParams {
    std::vector<Feature> features;
    std::vector<double> means;
    std::vector<double> sds;  // population (n) denominator, strictly positive
};

struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // row-major
    std::vector<int> labels;     // empty when any record is unlabeled

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

StandardizationParams fit_standardizer(const Cohort& cohort);
StandardizationParams fit_standardizer(const Cohort& cohort, const std::vector<Feature>& features);
// Standardizer over a row subset (used by per-fold refits).
StandardizationParams fit_standardizer(const Cohort& cohort, const std::vector<Feature>& features,
                                       const std::vector<std::size_t>& rows);

FeatureMatrix apply_standardizer(const StandardizationParams& params, const Cohort& cohort);
FeatureMatrix apply_standardizer(const StandardizationParams& params, const Cohort& cohort,
                                 const std::vector<std::size_t>& rows);

struct FeatureMoments {
    double mean = 0.0;
    double sd = 0.0;
};

struct ClassMoments {
    FeatureMoments age, ast, alt, plt;
};

struct SyntheticSpec {
    std::size_t n = 0;
    double prevalence = 0.0;
    std::uint64_t seed = 0;
    ClassMoments early;
    ClassMoments advanced;
};

// JSON document: {"n":..., "prevalence":..., "seed":...,
//   "classes": {"early": {"age":{"mean":..,"sd":..}, ...}, "advanced": {...}}}
SyntheticSpec parse_synthetic_spec(std::istream& in);
std::string synthetic_spec_to_json(const SyntheticSpec& spec);

// Underlying normal whose truncation to (0, inf) has exactly the requested
// mean and sd. Requires sd/mean < 1 (a positive-valued truncated normal
// cannot be more dispersed than that).
struct TruncatedNormal {
    double mu = 0.0;
    double sigma = 0.0;
};

TruncatedNormal match_truncated_normal(double mean, double sd);
double sample_truncated_positive(Rng& rng, const TruncatedNormal& dist);

// Exactly round(prevalence*n) positive labels in a seed-shuffled row order;
// age/ast/alt/plt drawn per class from positive-truncated normals whose
// realized (post-truncation) moments match the spec; fib4 always computed.
Cohort generate_synthetic_cohort(const SyntheticSpec& spec);

}  // namespace mlenit
