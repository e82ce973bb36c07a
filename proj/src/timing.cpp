#include "bespoke/timing.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <random>

namespace bespoke {

TimingReport sta(const Netlist& n, const CellLibrary& lib, double v, double clock_period) {
    const auto& vm = lib.voltage();
    if (v < vm.v_min - 1e-9 || v > vm.v_nominal + 1e-9)
        throw Error(fmt::format("supply {} V outside [{}, {}] V", v, vm.v_min, vm.v_nominal));
    TimingReport t;
    t.voltage = v;
    t.scale = delay_scale(vm, v);
    t.arrival.assign(n.net_count(), 0.0);
    for (GateId g : topo_order(n)) {
        const auto& gate = n.gate(g);
        double a = 0.0;
        for (NetId in : gate.fanin())
            a = std::max(a, t.arrival[in]);
        t.arrival[gate.output] = a + lib.cell(gate.function).intrinsic_delay;
    }
    double nominal_cp = 0.0;
    for (const auto& bus : n.outputs())
        for (NetId b : bus.bits)
            nominal_cp = std::max(nominal_cp, t.arrival[b]);
    if (t.scale != 1.0)
        for (auto& a : t.arrival)
            a *= t.scale;
    t.critical_path = nominal_cp * t.scale;
    t.clock_period = clock_period > 0.0 ? clock_period : (n.meta.clock_period > 0.0 ? n.meta.clock_period : nominal_cp);
    t.slack = t.clock_period - t.critical_path;
    return t;
}

double critical_path(const Netlist& n, const CellLibrary& lib) {
    return sta(n, lib, lib.voltage().v_nominal, 1.0).critical_path;
}

std::vector<std::vector<bool>> violating_bits(const Netlist& n, const TimingReport& t) {
    std::vector<std::vector<bool>> out;
    for (const auto& bus : n.outputs()) {
        std::vector<bool> late;
        for (NetId b : bus.bits)
            late.push_back(t.arrival[b] > t.clock_period);
        out.push_back(std::move(late));
    }
    return out;
}

std::optional<double> min_violation_free_voltage(const Netlist& n, const CellLibrary& lib, double clock_period) {
    const auto& vm = lib.voltage();
    std::optional<double> best;
    for (std::size_t i = vm.grid_size(); i-- > 0;) {
        double v = vm.grid_voltage(i);
        if (sta(n, lib, v, clock_period).slack < 0.0)
            break;
        best = v;
    }
    return best;
}

namespace {

double resolve_clock(const Netlist& n, const CellLibrary& lib, double requested) {
    if (requested > 0.0)
        return requested;
    if (n.meta.clock_period > 0.0)
        return n.meta.clock_period;
    return critical_path(n, lib);
}

std::uint64_t lane_mask(std::size_t count) {
    return count == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << count) - 1);
}

} // namespace

OutputTable vos_simulate(const Netlist& n, const CellLibrary& lib, const VosConfig& cfg, const VectorSet& stream) {
    check_vectors(n, stream);
    auto t = sta(n, lib, cfg.v_dd, resolve_clock(n, lib, cfg.clock_period));
    auto late = violating_bits(n, t);
    const auto& outputs = n.outputs();
    OutputTable out(stream.rows(), outputs.size());
    std::vector<std::vector<std::uint64_t>> prev_last(outputs.size());
    for (std::size_t b = 0; b < outputs.size(); ++b)
        prev_last[b].assign(outputs[b].bits.size(), 0);
    BatchSimulator sim(n);
    std::vector<std::uint64_t> words;
    for (std::size_t first = 0; first < stream.rows(); first += 64) {
        auto count = std::min<std::size_t>(64, stream.rows() - first);
        sim.run(stream, first, count);
        const auto& v = sim.values();
        for (std::size_t b = 0; b < outputs.size(); ++b) {
            const auto& bus = outputs[b];
            words.assign(bus.bits.size(), 0);
            for (std::size_t k = 0; k < bus.bits.size(); ++k) {
                std::uint64_t settled = v[bus.bits[k]] & lane_mask(count);
                words[k] = late[b][k] ? ((settled << 1) | prev_last[b][k]) : settled;
                prev_last[b][k] = (settled >> (count - 1)) & 1;
            }
            for (std::size_t lane = 0; lane < count; ++lane)
                out(first + lane, b) = lane_value(words, static_cast<int>(lane), bus.is_signed);
        }
    }
    return out;
}

DecisionTrace::DecisionTrace(const Netlist& n, const VectorSet& stream, unsigned threads)
    : meta_(n.meta), count_(stream.rows()) {
    check_vectors(n, stream);
    const auto& bus = n.outputs()[n.decision_bus()];
    is_signed_ = bus.is_signed;
    width_ = bus.bits.size();
    std::size_t batches = (count_ + 63) / 64;
    words_.assign(batches * width_, 0);
    std::size_t parts = std::max<std::size_t>(1, std::min<std::size_t>(threads, batches));
    parallel_for(parts, threads, [&](std::size_t p) {
        BatchSimulator sim(n);
        for (std::size_t b = batches * p / parts; b < batches * (p + 1) / parts; ++b) {
            auto count = std::min<std::size_t>(64, count_ - b * 64);
            sim.run(stream, b * 64, count);
            for (std::size_t k = 0; k < width_; ++k)
                words_[b * width_ + k] = sim.values()[bus.bits[k]] & lane_mask(count);
        }
    });
}

std::vector<std::optional<int>> DecisionTrace::predictions(const std::vector<bool>& stale) const {
    if (stale.size() != width_)
        throw Error("stale-bit mask does not match the decision bus");
    std::vector<std::optional<int>> out;
    out.reserve(count_);
    std::vector<std::uint64_t> prev(width_, 0), words(width_);
    for (std::size_t first = 0, b = 0; first < count_; first += 64, ++b) {
        auto count = std::min<std::size_t>(64, count_ - first);
        for (std::size_t k = 0; k < width_; ++k) {
            std::uint64_t settled = words_[b * width_ + k];
            words[k] = stale[k] ? ((settled << 1) | prev[k]) : settled;
            prev[k] = (settled >> (count - 1)) & 1;
        }
        for (std::size_t lane = 0; lane < count; ++lane)
            out.push_back(decode_label(meta_, lane_value(words, static_cast<int>(lane), is_signed_)));
    }
    return out;
}

double DecisionTrace::accuracy(const std::vector<bool>& stale, const std::vector<int>& labels) const {
    return accuracy_from_predictions(predictions(stale), labels).accuracy;
}

std::vector<bool> stale_decision_bits(const Netlist& n, const TimingReport& t) {
    return violating_bits(n, t)[n.decision_bus()];
}

VosStimuli build_vos_stimuli(const Dataset& test, std::size_t target_count, std::uint64_t seed) {
    if (test.size() == 0)
        throw Error("cannot build VOS stimuli from an empty test set");
    if (target_count < test.size())
        throw Error(fmt::format("stimuli count {} is smaller than the test set ({})", target_count, test.size()));
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order;
    order.reserve(target_count);
    for (std::size_t copy = 0; copy < target_count / test.size(); ++copy)
        for (std::size_t i = 0; i < test.size(); ++i)
            order.push_back(i);
    std::vector<std::size_t> extra(test.size());
    for (std::size_t i = 0; i < extra.size(); ++i)
        extra[i] = i;
    deterministic_shuffle(rng, extra);
    extra.resize(target_count % test.size());
    order.insert(order.end(), extra.begin(), extra.end());
    deterministic_shuffle(rng, order);

    VosStimuli s;
    s.labels.reserve(order.size());
    for (auto i : order) {
        s.vectors.push_row(test.features.row(i));
        s.labels.push_back(test.labels[i]);
    }
    return s;
}

std::string timing_report_csv(const Netlist& n, const TimingReport& t, const std::string& manifest_hash) {
    std::string out = "manifest_hash,gate,cell,arrival\n";
    for (GateId g = 0; g < n.gates().size(); ++g)
        out += fmt::format("{},{},{},{:.6f}\n", manifest_hash, g, cell_function_name(n.gate(g).function),
                           t.gate_arrival(n, g));
    return out;
}

} // namespace bespoke
