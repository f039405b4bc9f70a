#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mlenit/cohort.hpp"
#include "mlenit/metrics.hpp"
#include "mlenit/rng.hpp"

namespace mlenit {

// Feed-forward classifier constrained to 2 or 3 hidden layers whose widths
// are odd primes; ReLU hidden activations, sigmoid output.
struct SdnnArchitecture {
    std::size_t input_dim = 5;
    std::vector<std::size_t> hidden_widths{17, 5, 23};
    std::size_t output_dim = 1;
};

struct ArchitectureVerdict {
    bool valid = false;
    std::vector<std::string> reasons;
};

ArchitectureVerdict validate_architecture(const SdnnArchitecture& arch);

// Total weight and bias scalars across all layers; throws on an invalid
// architecture.
std::size_t count_parameters(const SdnnArchitecture& arch);

struct SdnnLayer {
    std::size_t rows = 0;  // output width
    std::size_t cols = 0;  // input width
    std::vector<double> w;  // row-major rows x cols
    std::vector<double> b;  // length rows
};

struct SdnnParams {
    std::vector<SdnnLayer> layers;

    std::size_t scalar_count() const;
};

enum class ClassWeighting { Balanced, Explicit, None };

const char* weighting_name(ClassWeighting w);
ClassWeighting weighting_from_name(const std::string& name);

constexpr std::size_t kFullBatch = 0;

struct TrainingConfig {
    std::size_t epochs = 100;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_size = 32;  // kFullBatch for one batch per epoch
    ClassWeighting weighting = ClassWeighting::Balanced;
    double w_neg = 1.0;  // used when weighting is Explicit
    double w_pos = 1.0;
    std::string init_scheme = "glorot-uniform";
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden_widths{17, 5, 23};
};

struct SdnnModel {
    SdnnArchitecture architecture;
    SdnnParams params;
    StandardizationParams standardizer;
    TrainingConfig training;
    double final_loss = 0.0;
    int format_version = 1;
};

// Uniform on +-sqrt(6/(fan_in+fan_out)) per layer, biases zero.
SdnnParams init_params(const SdnnArchitecture& arch, const std::string& scheme, Rng& rng);

// ReLU hidden layers, sigmoid output, strictly inside (0,1).
double forward(const SdnnParams& params, const double* x, std::size_t dim);
double forward(const SdnnParams& params, const std::vector<double>& x);

// (1/sum w_i) * sum_i w_i * [-y ln p - (1-y) ln(1-p)] with probabilities
// clipped to [1e-12, 1-1e-12] inside the logs.
double weighted_bce_loss(const std::vector<double>& probs, const std::vector<int>& labels,
                         double w_neg, double w_pos);

struct GradientResult {
    double loss = 0.0;
    SdnnParams grad;
};

// Analytic gradient of weighted_bce_loss composed with forward over the
// batch (rows of `data` with labels), using the unclipped cross-entropy
// derivative w*(p-y)/sum(w).
GradientResult gradient(const SdnnParams& params, const FeatureMatrix& data,
                        double w_neg, double w_pos);

// Per-class weights for a label vector under the configured rule; the
// balanced rule is w_c = n / (2 * n_c).
std::pair<double, double> class_weights(const std::vector<int>& labels, const TrainingConfig& cfg);

struct FitResult {
    SdnnParams params;
    double final_loss = 0.0;
};

// Adam over seed-shuffled mini-batches of an already-standardized matrix.
// Deterministic for a fixed config.
FitResult fit_network(const FeatureMatrix& data, const SdnnArchitecture& arch,
                      const TrainingConfig& cfg);

// Fits the standardizer on the cohort, then fit_network over all five
// features with the architecture taken from cfg.hidden_widths.
SdnnModel train(const Cohort& cohort, const TrainingConfig& cfg);

// Stored standardizer + forward per record, preserving row order.
ScoredSet predict(const SdnnModel& model, const Cohort& cohort);

// JSON, byte-stable: serialize(deserialize(serialize(m))) == serialize(m).
std::string serialize_model(const SdnnModel& model);
void serialize_model(const SdnnModel& model, std::ostream& out);
SdnnModel deserialize_model(std::istream& in);
SdnnModel deserialize_model(const std::string& text);

}  // namespace mlenit
