#pragma once

#include "bespoke/model.hpp"
#include "bespoke/netlist.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bespoke {

/// Bus values per vector: one row per vector, one column per output bus.
using OutputTable = Table<std::int64_t>;

/// Zero-delay simulation of 64 vectors per pass (one vector per bit lane).
class BatchSimulator {
public:
    explicit BatchSimulator(const Netlist& n);

    const Netlist& netlist() const { return n_; }
    std::size_t net_count() const { return n_.net_count(); }

    /// Packs rows [first, first + count) of `vectors` (count <= 64) into the
    /// input nets and evaluates every gate. Returns the lane mask.
    std::uint64_t run(const VectorSet& vectors, std::size_t first, std::size_t count);
    /// Net values after the last run, one 64-lane word per net.
    const std::vector<std::uint64_t>& values() const { return values_; }
    /// Value of an output bus in one lane of the last run.
    std::int64_t bus_value(const Bus& bus, int lane) const;

private:
    struct Op {
        CellFunction f;
        NetId a, b, c, out;
    };
    const Netlist& n_;
    std::vector<Op> ops_;
    std::vector<std::uint64_t> values_;
    std::vector<std::pair<NetId, int>> input_bits_;  // (net, bit) per input bus bit, bus-major
};

/// Integer value of bits (LSB first) taken from one lane, signed when asked.
std::int64_t lane_value(std::span<const std::uint64_t> bit_words, int lane, bool is_signed);

/// Checks that `vectors` matches the netlist inputs (one column per input
/// bus, values within bus width).
void check_vectors(const Netlist& n, const VectorSet& vectors);

OutputTable simulate(const Netlist& n, const VectorSet& vectors);

/// Dataset label for a raw decision-bus value, or nullopt when the value does
/// not name a class.
std::optional<int> decode_label(const NetlistMeta& meta, std::int64_t decision);

/// Predicted labels (decision bus decoded per netlist metadata).
std::vector<std::optional<int>> predict_labels(const Netlist& n, const VectorSet& vectors);

struct ActivityProfile {
    std::uint64_t fingerprint = 0;  // netlist revision the profile belongs to
    std::uint64_t vectors = 0;
    std::vector<std::uint64_t> ones;
    std::vector<std::uint64_t> toggles;
    std::vector<std::uint8_t> first;
    std::vector<std::uint8_t> last;

    std::size_t gates() const { return ones.size(); }
    double ones_fraction(GateId g) const;
    /// Fraction of vectors on which the gate shows its dominant value.
    double tau(GateId g) const;
    /// Dominant output value; exact 50% ties resolve to 1.
    bool dominant(GateId g) const;
    /// tau(g) >= tau_c, decided in integer basis points.
    bool tau_at_least(GateId g, double tau_c) const;
    /// Output transitions per applied vector pair.
    double toggle_rate(GateId g) const;
};

/// tau thresholds are compared in 1/10000 units so that grid values such as
/// 0.85 are exact.
std::int64_t to_basis_points(double fraction);

ActivityProfile profile(const Netlist& n, const VectorSet& vectors, unsigned threads = 1);
/// Profile of the concatenation a ++ b.
ActivityProfile merge(const ActivityProfile& a, const ActivityProfile& b);

std::string activity_dump(const ActivityProfile& p);

struct AccuracyReport {
    std::string dataset;
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy = 0.0;
    /// (true label, predicted label) -> count; undecodable predictions use
    /// the key INT_MIN.
    std::map<std::pair<int, int>, std::size_t> confusion;
};

AccuracyReport evaluate_accuracy(const Netlist& n, const Dataset& data, std::string tag = "test");
AccuracyReport accuracy_from_predictions(const std::vector<std::optional<int>>& predicted,
                                         const std::vector<int>& labels, std::string tag = "test");

} // namespace bespoke
