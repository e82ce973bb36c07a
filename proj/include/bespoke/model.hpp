#pragma once

#include "bespoke/util.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bespoke {

enum class ModelKind { MlpC, MlpR, SvmC, SvmR };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);
inline bool is_classifier(ModelKind k) { return k == ModelKind::MlpC || k == ModelKind::SvmC; }
inline bool is_mlp(ModelKind k) { return k == ModelKind::MlpC || k == ModelKind::MlpR; }

using RealMatrix = std::vector<std::vector<double>>;

/// Float parameters as exported by the training side.
///
/// Layout: `weights[l]` is the matrix of layer l with one row per output
/// (neuron or pairwise classifier), `biases[l]` the matching intercepts.
/// MLPs have two layers (hidden, output); SVMs have one. For SVM-C the rows
/// enumerate class pairs (i, j), i < j, lexicographically; a positive
/// decision votes for class i.
struct TrainedModel {
    ModelKind kind = ModelKind::MlpC;
    std::vector<int> topology;
    std::vector<RealMatrix> weights;
    std::vector<std::vector<double>> biases;
    int n_features = 0;
    int n_classes = 0;
    std::vector<int> class_labels;

    /// Multiplicative coefficient count (biases are not counted).
    int coefficient_count() const;
    void validate() const;
};

TrainedModel model_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const TrainedModel& model);
TrainedModel load_model(const std::string& path);

struct FixedPointSpec {
    int input_bits = 4;  // unsigned inputs
    int coeff_bits = 8;  // two's complement coefficients

    void validate() const;
    std::int64_t coeff_min() const { return -(std::int64_t{1} << (coeff_bits - 1)); }
    std::int64_t coeff_max() const { return (std::int64_t{1} << (coeff_bits - 1)) - 1; }
    std::int32_t input_max() const { return (1 << input_bits) - 1; }
};

/// One weighted-sum layer in integer form.
///
/// Inputs are unsigned with `input_width` bits. Biases are already expressed
/// in accumulator LSBs, so a neuron computes `sum_i w[i] * x[i] + bias`.
struct QuantizedLayer {
    std::vector<std::vector<std::int64_t>> weights;
    std::vector<std::int64_t> biases;
    int input_width = 0;
    std::int64_t input_max = 0;
    int acc_width = 0;

    std::size_t outputs() const { return weights.size(); }
    std::size_t fan_in() const { return weights.empty() ? 0 : weights.front().size(); }
};

struct QuantizedModel {
    ModelKind kind = ModelKind::MlpC;
    FixedPointSpec spec;
    /// Coefficients are w ~ q * 2^-coeff_exponent.
    int coeff_exponent = 0;
    std::vector<QuantizedLayer> layers;
    int n_features = 0;
    int n_classes = 0;
    std::vector<int> class_labels;

    /// Output sums carry 2^-(layers * coeff_exponent + input_bits) per LSB.
    int output_shift() const;
    int label_min() const;
    int label_max() const;
    int coefficient_count() const;
    /// Recompute input widths/bounds and accumulator widths after the
    /// integer weights changed.
    void refresh_widths();
    void validate() const;
};

QuantizedModel quantize(const TrainedModel& model, const FixedPointSpec& spec = {});
nlohmann::json to_json(const QuantizedModel& model);
QuantizedModel quantized_from_json(const nlohmann::json& doc);

/// Value range [lo, hi] of one neuron given nonnegative inputs up to xmax.
std::pair<std::int64_t, std::int64_t> sum_range(std::span<const std::int64_t> weights, std::int64_t bias,
                                                std::int64_t xmax);

/// Raw integer outputs of the final weighted-sum layer (argmax inputs,
/// pairwise decisions or the regression sum).
std::vector<std::int64_t> forward(const QuantizedModel& model, std::span<const std::int32_t> x);

/// Regression decode: round the scaled sum to the nearest integer label and
/// clamp to the label range.
std::int64_t decode_regression(const QuantizedModel& model, std::int64_t sum);

/// Classifiers return a class index; regressors return the label value.
std::int64_t infer(const QuantizedModel& model, std::span<const std::int32_t> x);

/// Label predicted for x, comparable with Dataset::labels.
int predict_label(const QuantizedModel& model, std::span<const std::int32_t> x);

enum class Split { Train, Test };

struct Dataset {
    VectorSet features;  // quantized, one row per sample
    std::vector<int> labels;
    Split split = Split::Test;
    int input_bits = 4;

    std::size_t size() const { return labels.size(); }
};

std::int32_t quantize_feature(double value, int input_bits);
Dataset load_dataset(const std::string& path, int input_bits = 4, Split split = Split::Test);
Dataset parse_dataset_csv(std::string_view text, int input_bits = 4, Split split = Split::Test);

double model_accuracy(const QuantizedModel& model, const Dataset& data);

} // namespace bespoke
