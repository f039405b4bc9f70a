#include "mlenit/sdnn.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "mlenit/error.hpp"
#include "mlenit/mathfn.hpp"

namespace mlenit {

namespace {

bool is_odd_prime(std::size_t n) {
    if (n < 3 || n % 2 == 0) return false;
    for (std::size_t d = 3; d * d <= n; d += 2) {
        if (n % d == 0) return false;
    }
    return true;
}

std::vector<std::size_t> layer_dims(const SdnnArchitecture& arch) {
    std::vector<std::size_t> dims;
    dims.push_back(arch.input_dim);
    dims.insert(dims.end(), arch.hidden_widths.begin(), arch.hidden_widths.end());
    dims.push_back(arch.output_dim);
    return dims;
}

constexpr double kLossClip = 1e-12;

double clipped_log_loss(double p, int y) {
    const double pc = std::clamp(p, kLossClip, 1.0 - kLossClip);
    return y == 1 ? -std::log(pc) : -std::log1p(-pc);
}

}  // namespace

ArchitectureVerdict validate_architecture(const SdnnArchitecture& arch) {
    ArchitectureVerdict v;
    if (arch.input_dim < 1) v.reasons.push_back("input dim must be positive");
    if (arch.output_dim != 1) v.reasons.push_back("output dim must be 1");
    const std::size_t L = arch.hidden_widths.size();
    if (L != 2 && L != 3) {
        v.reasons.push_back(std::to_string(L) + " hidden layers (must be 2 or 3)");
    }
    for (std::size_t w : arch.hidden_widths) {
        if (w % 2 == 0) {
            v.reasons.push_back("width " + std::to_string(w) + " is not odd");
        } else if (!is_odd_prime(w)) {
            v.reasons.push_back("width " + std::to_string(w) + " is not prime");
        }
    }
    v.valid = v.reasons.empty();
    return v;
}

std::size_t count_parameters(const SdnnArchitecture& arch) {
    const ArchitectureVerdict v = validate_architecture(arch);
    if (!v.valid) {
        std::string msg = "invalid architecture:";
        for (const std::string& r : v.reasons) msg += " " + r + ";";
        throw DataError(msg);
    }
    const std::vector<std::size_t> dims = layer_dims(arch);
    std::size_t total = 0;
    for (std::size_t l = 1; l < dims.size(); ++l) {
        total += (dims[l - 1] + 1) * dims[l];
    }
    return total;
}

std::size_t SdnnParams::scalar_count() const {
    std::size_t total = 0;
    for (const SdnnLayer& layer : layers) total += layer.w.size() + layer.b.size();
    return total;
}

SdnnParams init_params(const SdnnArchitecture& arch, const std::string& scheme, Rng& rng) {
    if (scheme != "glorot-uniform") {
        throw UsageError("unknown init scheme: " + scheme);
    }
    const std::vector<std::size_t> dims = layer_dims(arch);
    SdnnParams params;
    for (std::size_t l = 1; l < dims.size(); ++l) {
        SdnnLayer layer;
        layer.rows = dims[l];
        layer.cols = dims[l - 1];
        const double limit =
            std::sqrt(6.0 / static_cast<double>(layer.rows + layer.cols));
        layer.w.resize(layer.rows * layer.cols);
        for (double& w : layer.w) w = rng.uniform(-limit, limit);
        layer.b.assign(layer.rows, 0.0);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

namespace {

void affine(const SdnnLayer& layer, const double* in, double* out) {
    for (std::size_t r = 0; r < layer.rows; ++r) {
        double acc = layer.b[r];
        const double* wrow = layer.w.data() + r * layer.cols;
        for (std::size_t c = 0; c < layer.cols; ++c) acc += wrow[c] * in[c];
        out[r] = acc;
    }
}

// Pre-activations z and post-activations a for every layer; a.back() holds
// the output probability.
struct ForwardTrace {
    std::vector<std::vector<double>> z;
    std::vector<std::vector<double>> a;
};

ForwardTrace forward_trace(const SdnnParams& params, const double* x, std::size_t dim) {
    ForwardTrace t;
    std::vector<double> cur(x, x + dim);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const SdnnLayer& layer = params.layers[l];
        if (layer.cols != cur.size()) {
            throw DataError("forward pass shape mismatch at layer " + std::to_string(l));
        }
        std::vector<double> z(layer.rows);
        affine(layer, cur.data(), z.data());
        t.z.push_back(z);
        const bool last = l + 1 == params.layers.size();
        if (last) {
            for (double& v : z) v = logistic(v);
        } else {
            for (double& v : z) v = v > 0.0 ? v : 0.0;
        }
        t.a.push_back(z);
        cur = t.a.back();
    }
    return t;
}

}  // namespace

double forward(const SdnnParams& params, const double* x, std::size_t dim) {
    if (params.layers.empty()) throw DataError("forward pass over an empty network");
    if (params.layers.back().rows != 1) throw DataError("output layer must have one unit");
    const ForwardTrace t = forward_trace(params, x, dim);
    return t.a.back()[0];
}

double forward(const SdnnParams& params, const std::vector<double>& x) {
    return forward(params, x.data(), x.size());
}

double weighted_bce_loss(const std::vector<double>& probs, const std::vector<int>& labels,
                         double w_neg, double w_pos) {
    if (probs.size() != labels.size()) throw DataError("loss: probs and labels differ in length");
    if (probs.empty()) throw DataError("loss over an empty batch");
    if (!(w_neg > 0.0 && w_pos > 0.0)) throw UsageError("class weights must be positive");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw DataError("loss: label outside {0,1}");
        const double w = labels[i] == 1 ? w_pos : w_neg;
        num += w * clipped_log_loss(probs[i], labels[i]);
        den += w;
    }
    return num / den;
}

GradientResult gradient(const SdnnParams& params, const FeatureMatrix& data,
                        double w_neg, double w_pos) {
    if (data.rows == 0) throw DataError("gradient over an empty batch");
    if (data.labels.size() != data.rows) throw DataError("gradient requires labeled rows");
    if (!(w_neg > 0.0 && w_pos > 0.0)) throw UsageError("class weights must be positive");

    GradientResult out;
    out.grad.layers.reserve(params.layers.size());
    for (const SdnnLayer& layer : params.layers) {
        SdnnLayer g;
        g.rows = layer.rows;
        g.cols = layer.cols;
        g.w.assign(layer.w.size(), 0.0);
        g.b.assign(layer.b.size(), 0.0);
        out.grad.layers.push_back(std::move(g));
    }

    double weight_sum = 0.0;
    for (std::size_t i = 0; i < data.rows; ++i) {
        weight_sum += data.labels[i] == 1 ? w_pos : w_neg;
    }

    const std::size_t n_layers = params.layers.size();
    double loss_num = 0.0;
    for (std::size_t i = 0; i < data.rows; ++i) {
        const double* x = data.values.data() + i * data.cols;
        const ForwardTrace t = forward_trace(params, x, data.cols);
        const double p = t.a.back()[0];
        const int y = data.labels[i];
        const double w = y == 1 ? w_pos : w_neg;
        loss_num += w * clipped_log_loss(p, y);

        // d loss / d z_out for the unclipped cross-entropy, scaled so the
        // batch gradient matches the weighted-mean loss.
        std::vector<double> delta{w * (p - static_cast<double>(y)) / weight_sum};
        for (std::size_t li = n_layers; li-- > 0;) {
            const SdnnLayer& layer = params.layers[li];
            SdnnLayer& g = out.grad.layers[li];
            const double* prev = li == 0 ? x : t.a[li - 1].data();
            for (std::size_t r = 0; r < layer.rows; ++r) {
                g.b[r] += delta[r];
                double* grow = g.w.data() + r * layer.cols;
                for (std::size_t c = 0; c < layer.cols; ++c) grow[c] += delta[r] * prev[c];
            }
            if (li == 0) break;
            std::vector<double> prev_delta(layer.cols, 0.0);
            for (std::size_t r = 0; r < layer.rows; ++r) {
                const double* wrow = layer.w.data() + r * layer.cols;
                for (std::size_t c = 0; c < layer.cols; ++c) prev_delta[c] += wrow[c] * delta[r];
            }
            const std::vector<double>& z_prev = t.z[li - 1];
            for (std::size_t c = 0; c < layer.cols; ++c) {
                if (z_prev[c] <= 0.0) prev_delta[c] = 0.0;
            }
            delta = std::move(prev_delta);
        }
    }
    out.loss = loss_num / weight_sum;
    for (const SdnnLayer& g : out.grad.layers) {
        for (double v : g.w) {
            if (!std::isfinite(v)) throw NumericError("non-finite gradient component");
        }
        for (double v : g.b) {
            if (!std::isfinite(v)) throw NumericError("non-finite gradient component");
        }
    }
    return out;
}

std::pair<double, double> class_weights(const std::vector<int>& labels,
                                        const TrainingConfig& cfg) {
    std::size_t n_pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw DataError("label outside {0,1}");
        n_pos += static_cast<std::size_t>(y);
    }
    const std::size_t n = labels.size();
    const std::size_t n_neg = n - n_pos;
    switch (cfg.weighting) {
        case ClassWeighting::None:
            return {1.0, 1.0};
        case ClassWeighting::Explicit:
            if (!(cfg.w_neg > 0.0 && cfg.w_pos > 0.0)) {
                throw UsageError("explicit class weights must be positive");
            }
            return {cfg.w_neg, cfg.w_pos};
        case ClassWeighting::Balanced:
            if (n_pos == 0 || n_neg == 0) throw DataError("single-class cohort");
            return {static_cast<double>(n) / (2.0 * static_cast<double>(n_neg)),
                    static_cast<double>(n) / (2.0 * static_cast<double>(n_pos))};
    }
    throw UsageError("unknown class weighting");
}

FitResult fit_network(const FeatureMatrix& data, const SdnnArchitecture& arch,
                      const TrainingConfig& cfg) {
    if (data.rows == 0) throw DataError("training over an empty matrix");
    if (data.labels.size() != data.rows) throw DataError("training requires labeled rows");
    if (data.cols != arch.input_dim) {
        throw DataError("training matrix width does not match the architecture input");
    }
    const ArchitectureVerdict verdict = validate_architecture(arch);
    if (!verdict.valid) {
        std::string msg = "invalid architecture:";
        for (const std::string& r : verdict.reasons) msg += " " + r + ";";
        throw DataError(msg);
    }
    if (!(cfg.learning_rate > 0.0)) throw UsageError("learning rate must be positive");
    if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0 && cfg.beta2 > 0.0 && cfg.beta2 < 1.0)) {
        throw UsageError("adam betas must lie in (0, 1)");
    }
    if (!(cfg.epsilon > 0.0)) throw UsageError("adam epsilon must be positive");
    if (cfg.epochs < 1) throw UsageError("epochs must be positive");

    const auto [w_neg, w_pos] = class_weights(data.labels, cfg);
    {
        bool has0 = false, has1 = false;
        for (int y : data.labels) (y == 1 ? has1 : has0) = true;
        if (!has0 || !has1) throw DataError("single-class cohort");
    }

    Rng init_rng(derive_seed(cfg.seed, 0));
    SdnnParams params = init_params(arch, cfg.init_scheme, init_rng);
    Rng shuffle_rng(derive_seed(cfg.seed, 1));

    SdnnParams m = params, v = params;
    for (SdnnLayer& l : m.layers) {
        std::fill(l.w.begin(), l.w.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
    for (SdnnLayer& l : v.layers) {
        std::fill(l.w.begin(), l.w.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }

    const std::size_t n = data.rows;
    const std::size_t batch = cfg.batch_size == kFullBatch ? n : cfg.batch_size;
    double beta1_pow = 1.0, beta2_pow = 1.0;
    double epoch_loss = 0.0;

    const auto adam_update = [&](std::vector<double>& theta, std::vector<double>& mm,
                                 std::vector<double>& vv, const std::vector<double>& g) {
        for (std::size_t i = 0; i < theta.size(); ++i) {
            mm[i] = cfg.beta1 * mm[i] + (1.0 - cfg.beta1) * g[i];
            vv[i] = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = mm[i] / (1.0 - beta1_pow);
            const double vhat = vv[i] / (1.0 - beta2_pow);
            theta[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<std::size_t> perm = shuffle_rng.permutation(n);
        double loss_weighted = 0.0, weight_total = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(start + batch, n);
            FeatureMatrix slice;
            slice.rows = stop - start;
            slice.cols = data.cols;
            slice.values.resize(slice.rows * slice.cols);
            slice.labels.resize(slice.rows);
            double batch_weight = 0.0;
            for (std::size_t i = start; i < stop; ++i) {
                const std::size_t src = perm[i];
                std::copy_n(data.values.data() + src * data.cols, data.cols,
                            slice.values.data() + (i - start) * data.cols);
                slice.labels[i - start] = data.labels[src];
                batch_weight += data.labels[src] == 1 ? w_pos : w_neg;
            }

            const GradientResult g = gradient(params, slice, w_neg, w_pos);
            if (!std::isfinite(g.loss)) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
            }
            loss_weighted += g.loss * batch_weight;
            weight_total += batch_weight;

            beta1_pow *= cfg.beta1;
            beta2_pow *= cfg.beta2;
            for (std::size_t li = 0; li < params.layers.size(); ++li) {
                adam_update(params.layers[li].w, m.layers[li].w, v.layers[li].w,
                            g.grad.layers[li].w);
                adam_update(params.layers[li].b, m.layers[li].b, v.layers[li].b,
                            g.grad.layers[li].b);
            }
        }
        epoch_loss = loss_weighted / weight_total;
        if (!std::isfinite(epoch_loss)) {
            throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
        }
    }
    return {std::move(params), epoch_loss};
}

SdnnModel train(const Cohort& cohort, const TrainingConfig& cfg) {
    SdnnModel model;
    model.training = cfg;
    model.architecture = SdnnArchitecture{5, cfg.hidden_widths, 1};
    model.standardizer = fit_standardizer(cohort);
    const FeatureMatrix data = apply_standardizer(model.standardizer, cohort);
    if (data.labels.empty()) throw DataError("training requires a fully labeled cohort");
    FitResult fit = fit_network(data, model.architecture, cfg);
    model.params = std::move(fit.params);
    model.final_loss = fit.final_loss;
    return model;
}

ScoredSet predict(const SdnnModel& model, const Cohort& cohort) {
    const FeatureMatrix data = apply_standardizer(model.standardizer, cohort);
    ScoredSet out;
    out.scores.reserve(data.rows);
    for (std::size_t i = 0; i < data.rows; ++i) {
        out.scores.push_back(forward(model.params, data.values.data() + i * data.cols, data.cols));
    }
    out.labels = data.labels;
    out.source = "sdnn:" + cohort.name;
    out.probabilistic = true;
    return out;
}

const char* weighting_name(ClassWeighting w) {
    switch (w) {
        case ClassWeighting::Balanced: return "balanced";
        case ClassWeighting::Explicit: return "explicit";
        case ClassWeighting::None: return "none";
    }
    throw UsageError("unknown class weighting");
}

ClassWeighting weighting_from_name(const std::string& name) {
    if (name == "balanced") return ClassWeighting::Balanced;
    if (name == "explicit") return ClassWeighting::Explicit;
    if (name == "none") return ClassWeighting::None;
    throw DataError("unknown class weighting: " + name);
}

std::string serialize_model(const SdnnModel& model) {
    nlohmann::json layers = nlohmann::json::array();
    for (const SdnnLayer& l : model.params.layers) {
        layers.push_back({{"rows", l.rows}, {"cols", l.cols}, {"weights", l.w}, {"bias", l.b}});
    }
    std::vector<std::string> feature_order;
    for (Feature f : model.standardizer.features) feature_order.emplace_back(feature_name(f));

    const TrainingConfig& t = model.training;
    nlohmann::json training{{"epochs", t.epochs},
                            {"learning_rate", t.learning_rate},
                            {"beta1", t.beta1},
                            {"beta2", t.beta2},
                            {"epsilon", t.epsilon},
                            {"batch_size", t.batch_size == kFullBatch
                                               ? nlohmann::json("full")
                                               : nlohmann::json(t.batch_size)},
                            {"weighting", weighting_name(t.weighting)},
                            {"w_neg", t.w_neg},
                            {"w_pos", t.w_pos},
                            {"init_scheme", t.init_scheme},
                            {"seed", t.seed},
                            {"hidden_widths", t.hidden_widths}};

    const nlohmann::json j{
        {"format_version", model.format_version},
        {"architecture",
         {{"input_dim", model.architecture.input_dim},
          {"hidden_widths", model.architecture.hidden_widths},
          {"output_dim", model.architecture.output_dim}}},
        {"standardizer",
         {{"feature_order", feature_order},
          {"means", model.standardizer.means},
          {"sds", model.standardizer.sds}}},
        {"layers", layers},
        {"training", training},
        {"final_loss", model.final_loss}};
    return j.dump(2) + "\n";
}

void serialize_model(const SdnnModel& model, std::ostream& out) { out << serialize_model(model); }

SdnnModel deserialize_model(const std::string& text) {
    std::istringstream in(text);
    return deserialize_model(in);
}

SdnnModel deserialize_model(std::istream& in) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        SdnnModel model;
        model.format_version = j.at("format_version").get<int>();
        if (model.format_version != 1) {
            throw DataError("unsupported model format version " +
                            std::to_string(model.format_version));
        }
        const nlohmann::json& arch = j.at("architecture");
        model.architecture.input_dim = arch.at("input_dim").get<std::size_t>();
        model.architecture.hidden_widths = arch.at("hidden_widths").get<std::vector<std::size_t>>();
        model.architecture.output_dim = arch.at("output_dim").get<std::size_t>();

        const nlohmann::json& st = j.at("standardizer");
        for (const auto& name : st.at("feature_order")) {
            model.standardizer.features.push_back(feature_from_name(name.get<std::string>()));
        }
        model.standardizer.means = st.at("means").get<std::vector<double>>();
        model.standardizer.sds = st.at("sds").get<std::vector<double>>();
        const std::size_t nf = model.standardizer.features.size();
        if (model.standardizer.means.size() != nf || model.standardizer.sds.size() != nf ||
            nf != model.architecture.input_dim) {
            throw DataError("standardizer shape inconsistent with the architecture");
        }
        for (double sd : model.standardizer.sds) {
            if (!(sd > 0.0) || !std::isfinite(sd)) {
                throw DataError("standardizer sds must be positive and finite");
            }
        }
        for (double m : model.standardizer.means) {
            if (!std::isfinite(m)) throw DataError("standardizer means must be finite");
        }

        const std::vector<std::size_t> dims = layer_dims(model.architecture);
        const nlohmann::json& layers = j.at("layers");
        if (!layers.is_array() || layers.size() != dims.size() - 1) {
            throw DataError("layer count inconsistent with the architecture");
        }
        for (std::size_t l = 0; l < layers.size(); ++l) {
            SdnnLayer layer;
            layer.rows = layers[l].at("rows").get<std::size_t>();
            layer.cols = layers[l].at("cols").get<std::size_t>();
            layer.w = layers[l].at("weights").get<std::vector<double>>();
            layer.b = layers[l].at("bias").get<std::vector<double>>();
            if (layer.rows != dims[l + 1] || layer.cols != dims[l]) {
                throw DataError("layer " + std::to_string(l) +
                                " shape inconsistent with the architecture");
            }
            if (layer.w.size() != layer.rows * layer.cols) {
                throw DataError("layer " + std::to_string(l) + " weight count mismatch");
            }
            if (layer.b.size() != layer.rows) {
                throw DataError("layer " + std::to_string(l) + " bias count mismatch");
            }
            for (double w : layer.w) {
                if (!std::isfinite(w)) throw DataError("non-finite weight in model file");
            }
            for (double b : layer.b) {
                if (!std::isfinite(b)) throw DataError("non-finite bias in model file");
            }
            model.params.layers.push_back(std::move(layer));
        }

        const nlohmann::json& t = j.at("training");
        model.training.epochs = t.at("epochs").get<std::size_t>();
        model.training.learning_rate = t.at("learning_rate").get<double>();
        model.training.beta1 = t.at("beta1").get<double>();
        model.training.beta2 = t.at("beta2").get<double>();
        model.training.epsilon = t.at("epsilon").get<double>();
        if (t.at("batch_size").is_string()) {
            if (t.at("batch_size").get<std::string>() != "full") {
                throw DataError("batch_size must be a positive integer or \"full\"");
            }
            model.training.batch_size = kFullBatch;
        } else {
            model.training.batch_size = t.at("batch_size").get<std::size_t>();
        }
        model.training.weighting = weighting_from_name(t.at("weighting").get<std::string>());
        model.training.w_neg = t.at("w_neg").get<double>();
        model.training.w_pos = t.at("w_pos").get<double>();
        model.training.init_scheme = t.at("init_scheme").get<std::string>();
        model.training.seed = t.at("seed").get<std::uint64_t>();
        model.training.hidden_widths = t.at("hidden_widths").get<std::vector<std::size_t>>();
        model.final_loss = j.at("final_loss").get<double>();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

}  // namespace mlenit
