#pragma once

#include "bespoke/celllib.hpp"
#include "bespoke/logicsim.hpp"
#include "bespoke/netlist.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bespoke {

struct TimingReport {
    double voltage = 0.0;
    double scale = 1.0;
    /// Arrival time per net (inputs and constants at 0).
    std::vector<double> arrival;
    double critical_path = 0.0;
    double clock_period = 0.0;
    double slack = 0.0;

    double gate_arrival(const Netlist& n, GateId g) const { return arrival[n.gate(g).output]; }
};

/// Arrival times at supply v. Nominal arrivals are computed first and then
/// multiplied by delay_scale(v), so every arrival scales by the same factor.
/// A clock_period of 0 takes the netlist's own clock, or the critical path
/// when that is unset too.
TimingReport sta(const Netlist& n, const CellLibrary& lib, double v, double clock_period = 0.0);

/// Critical path at nominal voltage.
double critical_path(const Netlist& n, const CellLibrary& lib);

/// Output bits (per bus, per bit) whose arrival exceeds the clock.
std::vector<std::vector<bool>> violating_bits(const Netlist& n, const TimingReport& t);

/// Lowest grid voltage at which no output bit violates the clock, or none.
std::optional<double> min_violation_free_voltage(const Netlist& n, const CellLibrary& lib, double clock_period);

struct VosConfig {
    double v_dd = 1.0;
    /// 0 = the netlist's clock (or its own critical path when unset)
    double clock_period = 0.0;
};

/// Timing-aware simulation of an ordered vector stream. An output bit that
/// misses the clock captures its settled value from the previous vector;
/// before the first vector the registers hold zero.
OutputTable vos_simulate(const Netlist& n, const CellLibrary& lib, const VosConfig& cfg, const VectorSet& stream);

/// Settled decision-bus bits for a whole stream, kept so that predictions
/// under any set of late bits can be derived without re-simulating.
class DecisionTrace {
public:
    DecisionTrace(const Netlist& n, const VectorSet& stream, unsigned threads = 1);

    std::size_t size() const { return count_; }
    /// Predicted labels when the listed decision-bus bits capture stale values.
    std::vector<std::optional<int>> predictions(const std::vector<bool>& stale) const;
    double accuracy(const std::vector<bool>& stale, const std::vector<int>& labels) const;

private:
    NetlistMeta meta_;
    bool is_signed_ = false;
    std::size_t count_ = 0;
    std::size_t width_ = 0;
    /// words_[batch * width + bit]
    std::vector<std::uint64_t> words_;
};

/// Late decision-bus bits of n at the given timing.
std::vector<bool> stale_decision_bits(const Netlist& n, const TimingReport& t);

struct VosStimuli {
    VectorSet vectors;
    std::vector<int> labels;
};

/// Test set replicated and shuffled into a stream of target_count vectors:
/// every sample appears floor(target/|test|) times plus once more for a
/// seeded random subset covering the remainder.
VosStimuli build_vos_stimuli(const Dataset& test, std::size_t target_count, std::uint64_t seed);

std::string timing_report_csv(const Netlist& n, const TimingReport& t, const std::string& manifest_hash);

} // namespace bespoke
