#include "bespoke/logicsim.hpp"

#include <fmt/format.h>

#include <bit>
#include <climits>
#include <cmath>

namespace bespoke {

BatchSimulator::BatchSimulator(const Netlist& n) : n_(n), values_(n.net_count(), 0) {
    for (GateId g : topo_order(n)) {
        const auto& gate = n.gate(g);
        auto pin = [&](int p) { return p < gate.arity() ? gate.inputs[p] : gate.output; };
        ops_.push_back({gate.function, pin(0), pin(1), pin(2), gate.output});
    }
    for (NetId net = 0; net < n.net_count(); ++net)
        if (auto v = n.constant_value(net))
            values_[net] = *v ? ~std::uint64_t{0} : 0;
    for (const auto& bus : n.inputs())
        for (std::size_t i = 0; i < bus.bits.size(); ++i)
            input_bits_.emplace_back(bus.bits[i], static_cast<int>(i));
}

std::uint64_t BatchSimulator::run(const VectorSet& vectors, std::size_t first, std::size_t count) {
    if (count == 0 || count > 64 || first + count > vectors.rows())
        throw Error("simulation batch out of range");
    std::size_t k = 0;
    for (std::size_t col = 0; col < n_.inputs().size(); ++col) {
        const auto& bus = n_.inputs()[col];
        for (std::size_t bit = 0; bit < bus.bits.size(); ++bit, ++k) {
            std::uint64_t word = 0;
            for (std::size_t lane = 0; lane < count; ++lane)
                word |= static_cast<std::uint64_t>((vectors(first + lane, col) >> bit) & 1) << lane;
            values_[input_bits_[k].first] = word;
        }
    }
    std::uint64_t* v = values_.data();
    for (const auto& op : ops_)
        v[op.out] = eval_cell(op.f, v[op.a], v[op.b], v[op.c]);
    return count == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << count) - 1);
}

std::int64_t lane_value(std::span<const std::uint64_t> bit_words, int lane, bool is_signed) {
    if (bit_words.size() > 63)
        throw Error("bus wider than 63 bits");
    std::int64_t value = 0;
    for (std::size_t i = 0; i < bit_words.size(); ++i)
        value |= static_cast<std::int64_t>((bit_words[i] >> lane) & 1) << i;
    if (is_signed && !bit_words.empty() && ((bit_words.back() >> lane) & 1))
        value -= std::int64_t{1} << bit_words.size();
    return value;
}

std::int64_t BatchSimulator::bus_value(const Bus& bus, int lane) const {
    if (bus.bits.size() > 63)
        throw Error(fmt::format("bus '{}' wider than 63 bits", bus.name));
    std::int64_t value = 0;
    for (std::size_t i = 0; i < bus.bits.size(); ++i)
        value |= static_cast<std::int64_t>((values_[bus.bits[i]] >> lane) & 1) << i;
    if (bus.is_signed && !bus.bits.empty() && ((values_[bus.bits.back()] >> lane) & 1))
        value -= std::int64_t{1} << bus.bits.size();
    return value;
}

void check_vectors(const Netlist& n, const VectorSet& vectors) {
    if (vectors.empty())
        return;
    if (vectors.cols() != n.inputs().size())
        throw Error(fmt::format("vector width {} does not match {} input buses", vectors.cols(), n.inputs().size()));
    for (std::size_t c = 0; c < vectors.cols(); ++c) {
        auto width = n.inputs()[c].bits.size();
        std::int64_t max = (std::int64_t{1} << width) - 1;
        for (std::size_t r = 0; r < vectors.rows(); ++r)
            if (vectors(r, c) < 0 || vectors(r, c) > max)
                throw Error(fmt::format("vector {} input '{}' value {} exceeds {} bits", r, n.inputs()[c].name,
                                        vectors(r, c), width));
    }
}

OutputTable simulate(const Netlist& n, const VectorSet& vectors) {
    check_vectors(n, vectors);
    OutputTable out(vectors.rows(), n.outputs().size());
    BatchSimulator sim(n);
    for (std::size_t first = 0; first < vectors.rows(); first += 64) {
        auto count = std::min<std::size_t>(64, vectors.rows() - first);
        sim.run(vectors, first, count);
        for (std::size_t lane = 0; lane < count; ++lane)
            for (std::size_t b = 0; b < n.outputs().size(); ++b)
                out(first + lane, b) = sim.bus_value(n.outputs()[b], static_cast<int>(lane));
    }
    return out;
}

std::optional<int> decode_label(const NetlistMeta& meta, std::int64_t decision) {
    if (meta.decode == DecodeMode::LabelOffset)
        return static_cast<int>(decision + meta.label_offset);
    if (decision < 0 || decision >= static_cast<std::int64_t>(meta.class_labels.size()))
        return std::nullopt;
    return meta.class_labels[static_cast<std::size_t>(decision)];
}

std::vector<std::optional<int>> predict_labels(const Netlist& n, const VectorSet& vectors) {
    check_vectors(n, vectors);
    const auto& bus = n.outputs()[n.decision_bus()];
    std::vector<std::optional<int>> out;
    out.reserve(vectors.rows());
    BatchSimulator sim(n);
    for (std::size_t first = 0; first < vectors.rows(); first += 64) {
        auto count = std::min<std::size_t>(64, vectors.rows() - first);
        sim.run(vectors, first, count);
        for (std::size_t lane = 0; lane < count; ++lane)
            out.push_back(decode_label(n.meta, sim.bus_value(bus, static_cast<int>(lane))));
    }
    return out;
}

std::int64_t to_basis_points(double fraction) { return std::llround(fraction * 10000.0); }

double ActivityProfile::ones_fraction(GateId g) const {
    return vectors ? static_cast<double>(ones.at(g)) / static_cast<double>(vectors) : 0.0;
}

bool ActivityProfile::dominant(GateId g) const { return 2 * ones.at(g) >= vectors; }

double ActivityProfile::tau(GateId g) const {
    if (!vectors)
        return 0.0;
    auto k = dominant(g) ? ones.at(g) : vectors - ones.at(g);
    return static_cast<double>(k) / static_cast<double>(vectors);
}

bool ActivityProfile::tau_at_least(GateId g, double tau_c) const {
    auto k = dominant(g) ? ones.at(g) : vectors - ones.at(g);
    return static_cast<__int128>(k) * 10000 >= static_cast<__int128>(to_basis_points(tau_c)) * vectors;
}

double ActivityProfile::toggle_rate(GateId g) const {
    return vectors > 1 ? static_cast<double>(toggles.at(g)) / static_cast<double>(vectors - 1) : 0.0;
}

namespace {

ActivityProfile profile_range(const Netlist& n, const VectorSet& vectors, std::size_t begin, std::size_t end) {
    const auto gates = n.gates().size();
    ActivityProfile p;
    p.fingerprint = n.fingerprint();
    p.vectors = end - begin;
    p.ones.assign(gates, 0);
    p.toggles.assign(gates, 0);
    p.first.assign(gates, 0);
    p.last.assign(gates, 0);
    if (begin == end)
        return p;
    BatchSimulator sim(n);
    bool first_batch = true;
    for (std::size_t first = begin; first < end; first += 64) {
        auto count = std::min<std::size_t>(64, end - first);
        std::uint64_t mask = sim.run(vectors, first, count);
        const auto& v = sim.values();
        for (GateId g = 0; g < gates; ++g) {
            std::uint64_t w = v[n.gate(g).output] & mask;
            p.ones[g] += static_cast<std::uint64_t>(std::popcount(w));
            std::uint64_t prev = (w << 1) | (first_batch ? (w & 1) : p.last[g]);
            p.toggles[g] += static_cast<std::uint64_t>(std::popcount((w ^ prev) & mask));
            if (first_batch)
                p.first[g] = static_cast<std::uint8_t>(w & 1);
            p.last[g] = static_cast<std::uint8_t>((w >> (count - 1)) & 1);
        }
        first_batch = false;
    }
    return p;
}

} // namespace

ActivityProfile merge(const ActivityProfile& a, const ActivityProfile& b) {
    if (a.fingerprint != b.fingerprint || a.gates() != b.gates())
        throw Error("cannot merge profiles of different netlist revisions");
    if (a.vectors == 0)
        return b;
    if (b.vectors == 0)
        return a;
    ActivityProfile p = a;
    p.vectors += b.vectors;
    for (std::size_t g = 0; g < p.gates(); ++g) {
        p.ones[g] += b.ones[g];
        p.toggles[g] += b.toggles[g] + (a.last[g] != b.first[g] ? 1 : 0);
        p.last[g] = b.last[g];
    }
    return p;
}

ActivityProfile profile(const Netlist& n, const VectorSet& vectors, unsigned threads) {
    if (vectors.rows() == 0)
        throw Error("cannot profile an empty vector set");
    check_vectors(n, vectors);
    std::size_t batches = (vectors.rows() + 63) / 64;
    std::size_t parts = std::max<std::size_t>(1, std::min<std::size_t>(threads, batches));
    std::vector<ActivityProfile> partial(parts);
    parallel_for(parts, threads, [&](std::size_t i) {
        std::size_t b0 = batches * i / parts, b1 = batches * (i + 1) / parts;
        partial[i] = profile_range(n, vectors, b0 * 64, std::min(vectors.rows(), b1 * 64));
    });
    ActivityProfile out = partial.front();
    for (std::size_t i = 1; i < parts; ++i)
        out = merge(out, partial[i]);
    return out;
}

std::string activity_dump(const ActivityProfile& p) {
    std::string out = fmt::format("# vectors {}\n# gate ones_fraction toggles\n", p.vectors);
    for (GateId g = 0; g < p.gates(); ++g)
        out += fmt::format("{} {:.6f} {}\n", g, p.ones_fraction(g), p.toggles[g]);
    return out;
}

AccuracyReport accuracy_from_predictions(const std::vector<std::optional<int>>& predicted,
                                         const std::vector<int>& labels, std::string tag) {
    if (predicted.size() != labels.size())
        throw Error("prediction count differs from label count");
    AccuracyReport r;
    r.dataset = std::move(tag);
    r.total = labels.size();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int p = predicted[i].value_or(INT_MIN);
        if (predicted[i] && p == labels[i])
            ++r.correct;
        ++r.confusion[{labels[i], p}];
    }
    r.accuracy = r.total ? static_cast<double>(r.correct) / static_cast<double>(r.total) : 0.0;
    return r;
}

AccuracyReport evaluate_accuracy(const Netlist& n, const Dataset& data, std::string tag) {
    return accuracy_from_predictions(predict_labels(n, data.features), data.labels, std::move(tag));
}

} // namespace bespoke
