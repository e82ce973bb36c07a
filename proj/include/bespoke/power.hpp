#pragma once

#include "bespoke/celllib.hpp"
#include "bespoke/logicsim.hpp"
#include "bespoke/netlist.hpp"

#include <optional>
#include <vector>

namespace bespoke {

struct PowerReport {
    double voltage = 0.0;
    double clock_period = 0.0;
    double frequency = 0.0;          // 1 / clock_period
    double capacitance = 0.0;        // total load capacitance C
    double activity = 0.0;           // a, load-weighted mean toggle rate
    double p_static = 0.0;
    double p_dynamic = 0.0;
    double p_total = 0.0;
};

/// Load seen by each gate output: fanout pin capacitances, one wire
/// capacitance per fanout edge, and the output load per output-bus bit.
std::vector<double> load_capacitance(const Netlist& n, const CellLibrary& lib);

/// P_total = P_static + a * C * f * v^2, with P_static = sum(leakage) * v / v_nominal.
PowerReport power(const Netlist& n, const ActivityProfile& prof, const CellLibrary& lib, double v,
                  double clock_period);

/// Analytic change of supply: dynamic by (v_new / v)^2, static by v_new / v.
PowerReport rescale_power(const PowerReport& r, double v_new);

/// Highest grid voltage whose rescaled total stays within p_bat, or none when
/// even v_min exceeds it.
std::optional<double> min_voltage_for_budget(const PowerReport& r, double p_bat, const VoltageModel& vm);

} // namespace bespoke
