#pragma once

#include "bespoke/model.hpp"
#include "bespoke/netlist.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <random>
#include <string>
#include <vector>

namespace testing {

using bespoke::CellFunction;
using bespoke::NetId;
using BigInt = boost::multiprecision::cpp_int;

inline std::string fixture_path(const std::string& dataset, const std::string& file) {
    return std::string(BESPOKE_DATA_DIR) + "/fixtures/" + dataset + "/" + file;
}

struct Fixture {
    bespoke::QuantizedModel q;
    bespoke::Dataset train;
    bespoke::Dataset test;
};

inline Fixture load_fixture(const std::string& dataset, const std::string& kind) {
    Fixture f;
    f.q = bespoke::quantize(bespoke::load_model(fixture_path(dataset, kind + ".json")));
    f.train = bespoke::load_dataset(fixture_path(dataset, "train.csv"), 4, bespoke::Split::Train);
    f.test = bespoke::load_dataset(fixture_path(dataset, "test.csv"));
    return f;
}

inline const std::vector<std::string>& datasets() {
    static const std::vector<std::string> d{"balance_scale", "redwine", "iris"};
    return d;
}

inline const std::vector<std::string>& kinds() {
    static const std::vector<std::string> k{"mlp_c", "mlp_r", "svm_c", "svm_r"};
    return k;
}

/// Truth function of one cell, written out independently of eval_cell.
inline bool cell_truth(CellFunction f, bool a, bool b, bool c) {
    switch (f) {
    case CellFunction::Inv: return !a;
    case CellFunction::Nand2: return !(a && b);
    case CellFunction::Nor2: return !(a || b);
    case CellFunction::And2: return a && b;
    case CellFunction::Or2: return a || b;
    case CellFunction::Xor2: return a != b;
    case CellFunction::Xnor2: return a == b;
    case CellFunction::Mux2: return a ? c : b;
    case CellFunction::Buf: return a;
    case CellFunction::Tie0: return false;
    case CellFunction::Tie1: return true;
    }
    return false;
}

/// Scalar evaluation by fixed-point iteration in gate index order; needs no
/// topological sort. `inputs` holds one unsigned value per input bus.
inline std::vector<char> eval_scalar(const bespoke::Netlist& n, const std::vector<std::int64_t>& inputs) {
    std::vector<char> value(n.net_count(), 0), known(n.net_count(), 0);
    for (NetId net = 0; net < n.net_count(); ++net)
        if (auto c = n.constant_value(net)) {
            value[net] = *c;
            known[net] = 1;
        }
    for (std::size_t b = 0; b < n.inputs().size(); ++b)
        for (std::size_t k = 0; k < n.inputs()[b].bits.size(); ++k) {
            value[n.inputs()[b].bits[k]] = (inputs[b] >> k) & 1;
            known[n.inputs()[b].bits[k]] = 1;
        }
    bool progress = true;
    while (progress) {
        progress = false;
        for (const auto& g : n.gates()) {
            if (known[g.output])
                continue;
            bool ready = true;
            for (auto in : g.fanin())
                ready = ready && known[in];
            if (!ready)
                continue;
            bool a = g.arity() > 0 && value[g.inputs[0]];
            bool b = g.arity() > 1 && value[g.inputs[1]];
            bool c = g.arity() > 2 && value[g.inputs[2]];
            value[g.output] = cell_truth(g.function, a, b, c);
            known[g.output] = 1;
            progress = true;
        }
    }
    return value;
}

inline BigInt bus_value(const std::vector<char>& value, const bespoke::Bus& bus) {
    BigInt v = 0;
    for (std::size_t k = bus.bits.size(); k-- > 0;)
        v = v * 2 + (value[bus.bits[k]] ? 1 : 0);
    if (bus.is_signed && !bus.bits.empty() && value[bus.bits.back()])
        v -= BigInt(1) << bus.bits.size();
    return v;
}

/// Random acyclic netlist over `in_buses` input buses of `width` bits.
inline bespoke::Netlist random_netlist(std::mt19937_64& rng, int in_buses, int width, int gates, int out_bits) {
    bespoke::Netlist n;
    std::vector<NetId> pool;
    for (int b = 0; b < in_buses; ++b) {
        auto idx = n.add_input_bus("x" + std::to_string(b), width);
        for (auto net : n.inputs()[idx].bits)
            pool.push_back(net);
    }
    pool.push_back(n.constant(false));
    pool.push_back(n.constant(true));
    const CellFunction fs[] = {CellFunction::Inv,  CellFunction::Nand2, CellFunction::Nor2,
                               CellFunction::And2, CellFunction::Or2,   CellFunction::Xor2,
                               CellFunction::Xnor2, CellFunction::Mux2, CellFunction::Buf};
    for (int i = 0; i < gates; ++i) {
        auto f = fs[rng() % std::size(fs)];
        std::vector<NetId> ins;
        for (int k = 0; k < bespoke::cell_arity(f); ++k)
            ins.push_back(pool[rng() % pool.size()]);
        pool.push_back(n.add_gate(f, ins));
    }
    bespoke::Bus s{"S", {}, false, bespoke::BusRole::Significance};
    for (int k = 0; k < out_bits; ++k)
        s.bits.push_back(pool[pool.size() - 1 - static_cast<std::size_t>(rng() % std::min<std::size_t>(pool.size(), 12))]);
    n.add_output_bus(s);
    bespoke::Bus d{"label", {s.bits.front()}, false, bespoke::BusRole::Decision};
    n.add_output_bus(d);
    n.meta.model_kind = "MLP-R";
    n.meta.class_labels = {0, 1};
    n.meta.decode = bespoke::DecodeMode::LabelOffset;
    return n;
}

/// Random quantized model of the given kind with full-range coefficients.
inline bespoke::QuantizedModel random_model(std::mt19937_64& rng, bespoke::ModelKind kind, int features, int hidden,
                                            int classes) {
    bespoke::QuantizedModel m;
    m.kind = kind;
    m.n_features = features;
    m.coeff_exponent = 5;
    auto coeff = [&] { return static_cast<std::int64_t>(rng() % 256) - 128; };
    auto layer = [&](int outs, int ins, std::int64_t bias_span) {
        bespoke::QuantizedLayer l;
        for (int j = 0; j < outs; ++j) {
            std::vector<std::int64_t> row;
            for (int i = 0; i < ins; ++i)
                row.push_back(coeff());
            l.weights.push_back(row);
            l.biases.push_back(static_cast<std::int64_t>(rng() % (2 * bias_span + 1)) - bias_span);
        }
        return l;
    };
    bool regressor = kind == bespoke::ModelKind::MlpR || kind == bespoke::ModelKind::SvmR;
    m.n_classes = regressor ? 0 : classes;
    for (int c = 0; c < classes; ++c)
        m.class_labels.push_back(regressor ? c + 3 : c);
    if (regressor)
        m.n_classes = classes;
    int outs = kind == bespoke::ModelKind::MlpC ? classes
               : kind == bespoke::ModelKind::SvmC ? classes * (classes - 1) / 2
                                                  : 1;
    if (bespoke::is_mlp(kind)) {
        m.layers.push_back(layer(hidden, features, 2000));
        m.layers.push_back(layer(outs, hidden, 200000));
    } else {
        m.layers.push_back(layer(outs, features, 2000));
    }
    m.refresh_widths();
    m.validate();
    return m;
}

/// Inference in arbitrary precision: returns the raw final-layer sums.
inline std::vector<BigInt> forward_big(const bespoke::QuantizedModel& m, std::span<const std::int32_t> x) {
    std::vector<BigInt> in(x.begin(), x.end()), out;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        out.clear();
        for (std::size_t j = 0; j < m.layers[l].weights.size(); ++j) {
            BigInt s = m.layers[l].biases[j];
            for (std::size_t i = 0; i < in.size(); ++i)
                s += BigInt(m.layers[l].weights[j][i]) * in[i];
            out.push_back(s);
        }
        if (l + 1 < m.layers.size()) {
            for (auto& v : out)
                if (v < 0)
                    v = 0;
            in = out;
        }
    }
    return out;
}

/// Label predicted from big-int sums: argmax (lowest index on ties),
/// one-vs-one vote, or round-half-up then clamp.
inline int predict_big(const bespoke::QuantizedModel& m, std::span<const std::int32_t> x) {
    auto out = forward_big(m, x);
    using bespoke::ModelKind;
    if (m.kind == ModelKind::MlpC) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < out.size(); ++j)
            if (out[j] > out[best])
                best = j;
        return m.class_labels[best];
    }
    if (m.kind == ModelKind::SvmC) {
        std::vector<int> votes(static_cast<std::size_t>(m.n_classes), 0);
        std::size_t c = 0;
        for (int i = 0; i < m.n_classes; ++i)
            for (int j = i + 1; j < m.n_classes; ++j, ++c)
                ++votes[static_cast<std::size_t>(out[c] > 0 ? i : j)];
        std::size_t best = 0;
        for (std::size_t j = 1; j < votes.size(); ++j)
            if (votes[j] > votes[best])
                best = j;
        return m.class_labels[best];
    }
    int k = m.output_shift();
    BigInt scaled = out.front();
    BigInt num = scaled + (BigInt(1) << (k - 1));
    // floor division by 2^k
    BigInt q = num >= 0 ? BigInt(num >> k) : BigInt(-((-num + (BigInt(1) << k) - 1) >> k));
    BigInt lo = m.label_min(), hi = m.label_max();
    if (q < lo)
        q = lo;
    if (q > hi)
        q = hi;
    return static_cast<int>(q);
}

} // namespace testing
