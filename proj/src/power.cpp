#include "bespoke/power.hpp"

#include <fmt/format.h>

namespace bespoke {

std::vector<double> load_capacitance(const Netlist& n, const CellLibrary& lib) {
    std::vector<double> net_load(n.net_count(), 0.0);
    for (const auto& gate : n.gates())
        for (NetId in : gate.fanin())
            net_load[in] += lib.cell(gate.function).input_capacitance + lib.wire_capacitance();
    for (const auto& bus : n.outputs())
        for (NetId b : bus.bits)
            net_load[b] += lib.output_load() + lib.wire_capacitance();
    std::vector<double> out;
    out.reserve(n.gates().size());
    for (const auto& gate : n.gates())
        out.push_back(net_load[gate.output]);
    return out;
}

PowerReport power(const Netlist& n, const ActivityProfile& prof, const CellLibrary& lib, double v,
                  double clock_period) {
    if (prof.fingerprint != n.fingerprint() || prof.gates() != n.gates().size())
        throw Error("activity profile belongs to a different netlist revision");
    if (!(clock_period > 0.0))
        throw Error("power needs a positive clock period");
    const auto& vm = lib.voltage();
    PowerReport r;
    r.voltage = v;
    r.clock_period = clock_period;
    r.frequency = 1.0 / clock_period;
    auto load = load_capacitance(n, lib);
    double switched = 0.0, leakage = 0.0;
    for (GateId g = 0; g < n.gates().size(); ++g) {
        r.capacitance += load[g];
        switched += prof.toggle_rate(g) * load[g];
        leakage += lib.cell(n.gate(g).function).leakage;
    }
    r.activity = r.capacitance > 0.0 ? switched / r.capacitance : 0.0;
    r.p_dynamic = switched * r.frequency * v * v;
    r.p_static = leakage * v / vm.v_nominal;
    r.p_total = r.p_static + r.p_dynamic;
    return r;
}

PowerReport rescale_power(const PowerReport& r, double v_new) {
    if (!(v_new > 0.0) || !(r.voltage > 0.0))
        throw Error("power rescaling needs positive voltages");
    PowerReport out = r;
    double k = v_new / r.voltage;
    out.voltage = v_new;
    out.p_dynamic = r.p_dynamic * k * k;
    out.p_static = r.p_static * k;
    out.p_total = out.p_static + out.p_dynamic;
    return out;
}

std::optional<double> min_voltage_for_budget(const PowerReport& r, double p_bat, const VoltageModel& vm) {
    if (!(p_bat > 0.0))
        throw Error("battery budget must be positive");
    for (std::size_t i = vm.grid_size(); i-- > 0;) {
        double v = vm.grid_voltage(i);
        if (rescale_power(r, v).p_total <= p_bat)
            return v;
    }
    return std::nullopt;
}

} // namespace bespoke
