#pragma once

#include "bespoke/celllib.hpp"
#include "bespoke/util.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bespoke {

using NetId = std::uint32_t;
using GateId = std::uint32_t;
inline constexpr NetId kNoNet = std::numeric_limits<NetId>::max();

enum class DriverKind : std::uint8_t { Input, Constant, Gate };

struct NetDriver {
    DriverKind kind = DriverKind::Input;
    /// input bit ordinal, constant value (0/1) or gate id
    std::uint32_t index = 0;
    bool operator==(const NetDriver&) const = default;
};

/// Datapath gates compute the weighted sums and may be pruned. Decision
/// gates (argmax, vote counting, regression decode) never are.
enum class GateRegion : std::uint8_t { Datapath, Decision };

struct Gate {
    CellFunction function = CellFunction::Buf;
    std::array<NetId, 3> inputs{kNoNet, kNoNet, kNoNet};
    NetId output = kNoNet;
    GateRegion region = GateRegion::Datapath;

    int arity() const { return cell_arity(function); }
    std::span<const NetId> fanin() const { return {inputs.data(), static_cast<std::size_t>(arity())}; }
    bool operator==(const Gate&) const = default;
};

/// Significance buses are the ones pruning measures bit positions against:
/// argmax inputs O_i, pairwise SVM decisions, or the regression sum.
enum class BusRole : std::uint8_t { Significance, Decision };

struct Bus {
    std::string name;
    std::vector<NetId> bits;  // LSB first
    bool is_signed = false;
    BusRole role = BusRole::Significance;
    bool operator==(const Bus&) const = default;
};

/// How the decision bus maps to a dataset label.
enum class DecodeMode : std::uint8_t { ClassIndex, LabelOffset };

struct NetlistMeta {
    std::string model_kind;
    std::vector<int> class_labels;
    DecodeMode decode = DecodeMode::ClassIndex;
    int label_offset = 0;
    /// 0 = not yet fixed
    double clock_period = 0.0;
    bool operator==(const NetlistMeta&) const = default;
};

class Netlist {
public:
    /// Adds `width` fresh input nets as one named bus; returns the bus index.
    std::size_t add_input_bus(std::string name, int width);
    /// Shared constant net for the value (created on first use).
    NetId constant(bool value);
    /// A fresh constant net even if one with the same value exists.
    NetId add_constant_net(bool value);
    /// Appends a gate; its inputs must already exist.
    NetId add_gate(CellFunction f, std::span<const NetId> inputs, GateRegion region = GateRegion::Datapath);
    void add_output_bus(Bus bus);

    std::size_t net_count() const { return drivers_.size(); }
    const NetDriver& driver(NetId net) const { return drivers_.at(net); }
    std::optional<bool> constant_value(NetId net) const;
    const std::vector<Gate>& gates() const { return gates_; }
    const Gate& gate(GateId g) const { return gates_.at(g); }
    const std::vector<Bus>& inputs() const { return inputs_; }
    const std::vector<Bus>& outputs() const { return outputs_; }
    std::size_t input_bit_count() const;
    std::optional<std::size_t> find_output(std::string_view name) const;
    /// Index of the decoded-prediction bus.
    std::size_t decision_bus() const;

    /// Structural fingerprint of this revision (gates, nets, buses).
    std::uint64_t fingerprint() const;
    /// Single driver, driven inputs, valid bus nets, acyclic. Throws on violation.
    void audit() const;

    NetlistMeta meta;

    bool operator==(const Netlist&) const = default;

private:
    friend Netlist netlist_from_json(const nlohmann::json& doc);
    NetId new_net(NetDriver d);

    std::vector<NetDriver> drivers_;
    std::vector<Gate> gates_;
    std::vector<Bus> inputs_;
    std::vector<Bus> outputs_;
    NetId const0_ = kNoNet;
    NetId const1_ = kNoNet;
};

/// Gate ids in dependency order; throws on a combinational cycle.
std::vector<GateId> topo_order(const Netlist& n);

/// Fanout pins per net, as (gate, pin) pairs.
std::vector<std::vector<std::pair<GateId, int>>> fanouts(const Netlist& n);

/// Emits gates while folding constants and trivial identities. The rule set:
/// constant inputs (annihilator, identity, full evaluation), equal or
/// complementary inputs, double inversion, and MUX2 with constant select or
/// data. When a library is given a rule that swaps in a different cell only
/// fires if that cell is no larger and no slower than the original.
///
/// Structural hashing (reuse of an identical gate) is off by default and is
/// scoped: clear_hash() starts a new sharing domain.
class GateBuilder {
public:
    explicit GateBuilder(Netlist& target, const CellLibrary* lib = nullptr) : n_(target), lib_(lib) {}

    void set_region(GateRegion r) { region_ = r; }
    GateRegion region() const { return region_; }
    Netlist& netlist() { return n_; }
    void set_hashing(bool on) { hashing_ = on; }
    void clear_hash() { hash_.clear(); }

    NetId emit(CellFunction f, NetId a = kNoNet, NetId b = kNoNet, NetId c = kNoNet);
    NetId zero() { return n_.constant(false); }
    NetId one() { return n_.constant(true); }
    NetId inv(NetId a) { return emit(CellFunction::Inv, a); }
    NetId and2(NetId a, NetId b) { return emit(CellFunction::And2, a, b); }
    NetId or2(NetId a, NetId b) { return emit(CellFunction::Or2, a, b); }
    NetId nand2(NetId a, NetId b) { return emit(CellFunction::Nand2, a, b); }
    NetId nor2(NetId a, NetId b) { return emit(CellFunction::Nor2, a, b); }
    NetId xor2(NetId a, NetId b) { return emit(CellFunction::Xor2, a, b); }
    NetId xnor2(NetId a, NetId b) { return emit(CellFunction::Xnor2, a, b); }
    /// sel ? in1 : in0
    NetId mux2(NetId sel, NetId in0, NetId in1) { return emit(CellFunction::Mux2, sel, in0, in1); }

private:
    bool cheaper_or_equal(CellFunction replacement, CellFunction original) const;
    bool complementary(NetId a, NetId b) const;
    NetId raw(CellFunction f, NetId a, NetId b = kNoNet, NetId c = kNoNet);
    NetId try_swap(CellFunction replacement, CellFunction original, NetId a, NetId b, NetId c, NetId oa,
                   NetId ob, NetId oc);

    Netlist& n_;
    const CellLibrary* lib_;
    GateRegion region_ = GateRegion::Datapath;
    bool hashing_ = false;
    std::map<std::array<NetId, 4>, NetId> hash_;
};

struct ConstantOverride {
    GateId gate;
    bool value;
};

/// Constant propagation plus dead-cone removal. Gates listed in `overrides`
/// have their outputs replaced by the given constant first (used by pruning).
Netlist const_propagate(const Netlist& n, const CellLibrary* lib = nullptr,
                        std::span<const ConstantOverride> overrides = {});

/// For each output bus, the highest bit index reachable from the gate's
/// output (-1 when the bus is unreachable).
std::vector<int> output_cone_bits(const Netlist& n, GateId g);
/// The same for every gate at once: result[gate][bus].
std::vector<std::vector<int>> all_cone_bits(const Netlist& n);

nlohmann::json to_json(const Netlist& n);
Netlist netlist_from_json(const nlohmann::json& doc);
void save_netlist(const Netlist& n, const std::string& path);
Netlist load_netlist(const std::string& path);

} // namespace bespoke
