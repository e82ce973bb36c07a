#include "bespoke/model.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cfenv>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace bespoke {

namespace {

std::int64_t round_even(double v) {
    // nearbyint honours the current rounding mode, which is round-half-even by default
    return static_cast<std::int64_t>(std::nearbyint(v));
}

void require(bool cond, const std::string& msg) {
    if (!cond)
        throw Error(msg);
}

bool parse_double(std::string_view s, double& out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
        s.remove_suffix(1);
    if (s.empty())
        return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

} // namespace

std::string_view to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::MlpC: return "MLP-C";
    case ModelKind::MlpR: return "MLP-R";
    case ModelKind::SvmC: return "SVM-C";
    case ModelKind::SvmR: return "SVM-R";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view text) {
    for (auto k : {ModelKind::MlpC, ModelKind::MlpR, ModelKind::SvmC, ModelKind::SvmR})
        if (to_string(k) == text)
            return k;
    throw Error(fmt::format("unsupported model kind '{}'", text));
}

int TrainedModel::coefficient_count() const {
    int n = 0;
    for (const auto& w : weights)
        for (const auto& row : w)
            n += static_cast<int>(row.size());
    return n;
}

void TrainedModel::validate() const {
    require(n_features >= 1, "model needs at least one feature");
    require(static_cast<int>(class_labels.size()) == n_classes, "class_labels length differs from n_classes");
    require(std::set<int>(class_labels.begin(), class_labels.end()).size() == class_labels.size(),
            "class_labels must be distinct");
    require(weights.size() == biases.size(), "weights and biases disagree on the layer count");

    auto check_matrix = [&](std::size_t layer, std::size_t rows, std::size_t cols) {
        const auto& w = weights[layer];
        require(w.size() == rows, fmt::format("shape error: layer {} has {} rows, topology expects {}", layer,
                                              w.size(), rows));
        for (const auto& r : w)
            require(r.size() == cols, fmt::format("shape error: layer {} row has {} columns, expected {}", layer,
                                                  r.size(), cols));
        require(biases[layer].size() == rows,
                fmt::format("shape error: layer {} has {} biases, expected {}", layer, biases[layer].size(), rows));
        for (const auto& r : w)
            for (double v : r)
                require(std::isfinite(v), "non-finite weight");
        for (double v : biases[layer])
            require(std::isfinite(v), "non-finite bias");
    };

    if (is_mlp(kind)) {
        require(topology.size() == 3, "MLP topology must be (features, hidden, outputs): one hidden layer");
        require(topology[0] == n_features, "topology input width differs from n_features");
        require(topology[1] >= 1, "hidden layer must have at least one neuron");
        int outputs = kind == ModelKind::MlpC ? n_classes : 1;
        require(topology[2] == outputs, fmt::format("topology output width {} but {} expected", topology[2], outputs));
        require(weights.size() == 2, "MLP needs exactly two weight layers");
        check_matrix(0, static_cast<std::size_t>(topology[1]), static_cast<std::size_t>(n_features));
        check_matrix(1, static_cast<std::size_t>(topology[2]), static_cast<std::size_t>(topology[1]));
    } else {
        require(topology.size() == 1, "SVM topology is the classifier count");
        int expected = kind == ModelKind::SvmC ? n_classes * (n_classes - 1) / 2 : 1;
        require(topology[0] == expected,
                fmt::format("SVM topology lists {} classifiers, expected {}", topology[0], expected));
        require(weights.size() == 1, "SVM needs exactly one weight layer");
        check_matrix(0, static_cast<std::size_t>(expected), static_cast<std::size_t>(n_features));
    }
    if (is_classifier(kind))
        require(n_classes >= 2, "classifier needs at least two classes");
    else
        require(n_classes >= 1, "regressor needs a label range");
}

TrainedModel model_from_json(const nlohmann::json& doc) {
    TrainedModel m;
    try {
        m.kind = parse_model_kind(doc.at("kind").get<std::string>());
        m.topology = doc.at("topology").get<std::vector<int>>();
        m.weights = doc.at("weights").get<std::vector<RealMatrix>>();
        m.biases = doc.at("biases").get<std::vector<std::vector<double>>>();
        m.n_features = doc.at("n_features").get<int>();
        m.n_classes = doc.at("n_classes").get<int>();
        m.class_labels = doc.at("class_labels").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(fmt::format("malformed model file: {}", e.what()));
    }
    m.validate();
    return m;
}

nlohmann::json to_json(const TrainedModel& m) {
    return {{"kind", to_string(m.kind)},  {"topology", m.topology},     {"weights", m.weights},
            {"biases", m.biases},         {"n_features", m.n_features}, {"n_classes", m.n_classes},
            {"class_labels", m.class_labels}};
}

TrainedModel load_model(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(fmt::format("malformed model file '{}': {}", path, e.what()));
    }
    return model_from_json(doc);
}

void FixedPointSpec::validate() const {
    require(input_bits >= 1 && input_bits <= 16, "input_bits must be in [1, 16]");
    require(coeff_bits >= 2 && coeff_bits <= 24, "coeff_bits must be in [2, 24]");
}

std::pair<std::int64_t, std::int64_t> sum_range(std::span<const std::int64_t> weights, std::int64_t bias,
                                                std::int64_t xmax) {
    std::int64_t lo = bias, hi = bias;
    for (auto w : weights) {
        if (w > 0)
            hi += w * xmax;
        else
            lo += w * xmax;
    }
    return {lo, hi};
}

int QuantizedModel::output_shift() const {
    return static_cast<int>(layers.size()) * coeff_exponent + spec.input_bits;
}

int QuantizedModel::label_min() const { return *std::min_element(class_labels.begin(), class_labels.end()); }
int QuantizedModel::label_max() const { return *std::max_element(class_labels.begin(), class_labels.end()); }

int QuantizedModel::coefficient_count() const {
    int n = 0;
    for (const auto& l : layers)
        for (const auto& r : l.weights)
            n += static_cast<int>(r.size());
    return n;
}

void QuantizedModel::refresh_widths() {
    std::int64_t xmax = spec.input_max();
    int xwidth = spec.input_bits;
    for (auto& layer : layers) {
        layer.input_max = xmax;
        layer.input_width = xwidth;
        int need = 1;
        std::int64_t next_max = 0;
        for (std::size_t j = 0; j < layer.outputs(); ++j) {
            auto [lo, hi] = sum_range(layer.weights[j], layer.biases[j], xmax);
            need = std::max(need, signed_width(lo, hi));
            next_max = std::max(next_max, hi);
        }
        int formula = xwidth + spec.coeff_bits + ceil_log2(static_cast<std::int64_t>(layer.fan_in()));
        layer.acc_width = std::max(need, formula);
        // ReLU output feeds the next layer
        xmax = next_max;
        xwidth = std::max(1, unsigned_width(next_max));
    }
}

void QuantizedModel::validate() const {
    spec.validate();
    require(!layers.empty(), "quantized model without layers");
    require(static_cast<int>(class_labels.size()) == n_classes, "class_labels length differs from n_classes");
    for (const auto& layer : layers) {
        require(layer.weights.size() == layer.biases.size(), "layer weight/bias count mismatch");
        for (const auto& row : layer.weights) {
            require(row.size() == layer.fan_in(), "ragged weight matrix");
            for (auto w : row)
                require(w >= spec.coeff_min() && w <= spec.coeff_max(),
                        fmt::format("coefficient {} outside the {}-bit range", w, spec.coeff_bits));
        }
    }
    require(layers.front().fan_in() == static_cast<std::size_t>(n_features), "first layer fan-in differs from n_features");
    if (is_mlp(kind)) {
        require(layers.size() == 2, "MLP needs two layers");
        require(layers[1].fan_in() == layers[0].outputs(), "output layer fan-in differs from hidden width");
    } else {
        require(layers.size() == 1, "SVM needs one layer");
    }
}

QuantizedModel quantize(const TrainedModel& model, const FixedPointSpec& spec) {
    model.validate();
    spec.validate();
    QuantizedModel q;
    q.kind = model.kind;
    q.spec = spec;
    q.n_features = model.n_features;
    q.n_classes = model.n_classes;
    q.class_labels = model.class_labels;

    double wmax = 0.0;
    for (const auto& m : model.weights)
        for (const auto& r : m)
            for (double v : r)
                wmax = std::max(wmax, std::abs(v));

    // finest power-of-two step that still represents max|w| without clamping
    int exponent = spec.coeff_bits - 1;
    if (wmax > 0.0) {
        exponent = 62 - spec.coeff_bits;
        while (exponent > -62 && std::nearbyint(std::ldexp(wmax, exponent)) > static_cast<double>(spec.coeff_max()))
            --exponent;
    }
    q.coeff_exponent = exponent;

    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        QuantizedLayer layer;
        // accumulator LSB of layer l is 2^-((l+1)*exponent + input_bits)
        int bias_exp = static_cast<int>(l + 1) * exponent + spec.input_bits;
        for (std::size_t j = 0; j < model.weights[l].size(); ++j) {
            std::vector<std::int64_t> row;
            row.reserve(model.weights[l][j].size());
            for (double w : model.weights[l][j])
                row.push_back(std::clamp(round_even(std::ldexp(w, exponent)), spec.coeff_min(), spec.coeff_max()));
            layer.weights.push_back(std::move(row));
            double b = std::ldexp(model.biases[l][j], bias_exp);
            require(std::abs(b) < 0x1.0p52, "bias does not fit the accumulator scale");
            layer.biases.push_back(round_even(b));
        }
        q.layers.push_back(std::move(layer));
    }
    q.refresh_widths();
    q.validate();
    return q;
}

nlohmann::json to_json(const QuantizedModel& m) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : m.layers)
        layers.push_back({{"weights", l.weights}, {"biases", l.biases}, {"acc_width", l.acc_width}});
    return {{"kind", to_string(m.kind)},
            {"input_bits", m.spec.input_bits},
            {"coeff_bits", m.spec.coeff_bits},
            {"coeff_exponent", m.coeff_exponent},
            {"layers", layers},
            {"n_features", m.n_features},
            {"n_classes", m.n_classes},
            {"class_labels", m.class_labels}};
}

QuantizedModel quantized_from_json(const nlohmann::json& doc) {
    QuantizedModel m;
    try {
        m.kind = parse_model_kind(doc.at("kind").get<std::string>());
        m.spec.input_bits = doc.at("input_bits").get<int>();
        m.spec.coeff_bits = doc.at("coeff_bits").get<int>();
        m.coeff_exponent = doc.at("coeff_exponent").get<int>();
        for (const auto& l : doc.at("layers")) {
            QuantizedLayer layer;
            layer.weights = l.at("weights").get<std::vector<std::vector<std::int64_t>>>();
            layer.biases = l.at("biases").get<std::vector<std::int64_t>>();
            m.layers.push_back(std::move(layer));
        }
        m.n_features = doc.at("n_features").get<int>();
        m.n_classes = doc.at("n_classes").get<int>();
        m.class_labels = doc.at("class_labels").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(fmt::format("malformed quantized model: {}", e.what()));
    }
    m.validate();
    m.refresh_widths();
    return m;
}

std::vector<std::int64_t> forward(const QuantizedModel& model, std::span<const std::int32_t> x) {
    std::vector<std::int64_t> in(x.begin(), x.end());
    std::vector<std::int64_t> out;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        out.assign(layer.outputs(), 0);
        for (std::size_t j = 0; j < layer.outputs(); ++j) {
            std::int64_t s = layer.biases[j];
            for (std::size_t i = 0; i < in.size(); ++i)
                s += layer.weights[j][i] * in[i];
            out[j] = s;
        }
        if (l + 1 < model.layers.size()) {
            for (auto& v : out)
                v = std::max<std::int64_t>(v, 0);
            in = out;
        }
    }
    return out;
}

std::int64_t decode_regression(const QuantizedModel& model, std::int64_t sum) {
    int k = model.output_shift();
    std::int64_t r;
    if (k > 0)
        r = (sum + (std::int64_t{1} << (k - 1))) >> k;
    else
        r = sum * (std::int64_t{1} << -k);
    return std::clamp<std::int64_t>(r, model.label_min(), model.label_max());
}

std::int64_t infer(const QuantizedModel& model, std::span<const std::int32_t> x) {
    auto out = forward(model, x);
    switch (model.kind) {
    case ModelKind::MlpC: {
        std::size_t best = 0;
        for (std::size_t j = 1; j < out.size(); ++j)
            if (out[j] > out[best])
                best = j;
        return static_cast<std::int64_t>(best);
    }
    case ModelKind::SvmC: {
        std::vector<int> votes(static_cast<std::size_t>(model.n_classes), 0);
        std::size_t c = 0;
        for (int i = 0; i < model.n_classes; ++i)
            for (int j = i + 1; j < model.n_classes; ++j, ++c)
                ++votes[static_cast<std::size_t>(out[c] > 0 ? i : j)];
        return std::max_element(votes.begin(), votes.end()) - votes.begin();
    }
    case ModelKind::MlpR:
    case ModelKind::SvmR:
        return decode_regression(model, out.front());
    }
    return 0;
}

int predict_label(const QuantizedModel& model, std::span<const std::int32_t> x) {
    auto p = infer(model, x);
    if (is_classifier(model.kind))
        return model.class_labels[static_cast<std::size_t>(p)];
    return static_cast<int>(p);
}

std::int32_t quantize_feature(double value, int input_bits) {
    double scaled = std::floor(value * static_cast<double>(1 << input_bits) + 0.5);
    return static_cast<std::int32_t>(std::clamp(scaled, 0.0, static_cast<double>((1 << input_bits) - 1)));
}

Dataset parse_dataset_csv(std::string_view text, int input_bits, Split split) {
    Dataset ds;
    ds.split = split;
    ds.input_bits = input_bits;
    std::size_t pos = 0, line_no = 0;
    std::vector<std::int32_t> row;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty())
            continue;
        auto fields = split_csv_line(line);
        if (fields.size() < 2)
            throw Error(fmt::format("dataset line {}: need features and a label", line_no));
        double first;
        if (ds.labels.empty() && ds.features.rows() == 0 && !parse_double(fields.front(), first))
            continue;  // header
        row.clear();
        for (std::size_t i = 0; i + 1 < fields.size(); ++i) {
            double v;
            if (!parse_double(fields[i], v))
                throw Error(fmt::format("dataset line {}: '{}' is not a number", line_no, fields[i]));
            if (v < -1e-9 || v > 1.0 + 1e-9)
                throw Error(fmt::format("dataset line {}: feature {} outside [0,1]", line_no, v));
            row.push_back(quantize_feature(v, input_bits));
        }
        double label;
        if (!parse_double(fields.back(), label) || label != std::floor(label))
            throw Error(fmt::format("dataset line {}: label '{}' is not an integer", line_no, fields.back()));
        ds.features.push_row(row);
        ds.labels.push_back(static_cast<int>(label));
    }
    if (ds.labels.empty())
        throw Error("dataset has no samples");
    return ds;
}

Dataset load_dataset(const std::string& path, int input_bits, Split split) {
    return parse_dataset_csv(read_text_file(path), input_bits, split);
}

double model_accuracy(const QuantizedModel& model, const Dataset& data) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (predict_label(model, data.features.row(i)) == data.labels[i])
            ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

} // namespace bespoke
