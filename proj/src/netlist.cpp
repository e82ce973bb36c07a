#include "bespoke/netlist.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <functional>
#include <queue>

namespace bespoke {

NetId Netlist::new_net(NetDriver d) {
    drivers_.push_back(d);
    return static_cast<NetId>(drivers_.size() - 1);
}

std::size_t Netlist::add_input_bus(std::string name, int width) {
    if (width <= 0)
        throw Error(fmt::format("input bus '{}' needs a positive width", name));
    Bus bus;
    bus.name = std::move(name);
    auto ordinal = static_cast<std::uint32_t>(input_bit_count());
    for (int i = 0; i < width; ++i)
        bus.bits.push_back(new_net({DriverKind::Input, ordinal + static_cast<std::uint32_t>(i)}));
    inputs_.push_back(std::move(bus));
    return inputs_.size() - 1;
}

NetId Netlist::constant(bool value) {
    NetId& slot = value ? const1_ : const0_;
    if (slot == kNoNet)
        slot = add_constant_net(value);
    return slot;
}

NetId Netlist::add_constant_net(bool value) { return new_net({DriverKind::Constant, value ? 1u : 0u}); }

NetId Netlist::add_gate(CellFunction f, std::span<const NetId> ins, GateRegion region) {
    if (ins.size() != static_cast<std::size_t>(cell_arity(f)))
        throw Error(fmt::format("{} takes {} inputs, got {}", cell_function_name(f), cell_arity(f), ins.size()));
    Gate g;
    g.function = f;
    g.region = region;
    for (std::size_t i = 0; i < ins.size(); ++i) {
        if (ins[i] >= drivers_.size())
            throw Error(fmt::format("gate input net {} does not exist", ins[i]));
        g.inputs[i] = ins[i];
    }
    g.output = new_net({DriverKind::Gate, static_cast<std::uint32_t>(gates_.size())});
    gates_.push_back(g);
    return g.output;
}

void Netlist::add_output_bus(Bus bus) {
    for (NetId b : bus.bits)
        if (b >= drivers_.size())
            throw Error(fmt::format("output bus '{}' references missing net {}", bus.name, b));
    outputs_.push_back(std::move(bus));
}

std::optional<bool> Netlist::constant_value(NetId net) const {
    const auto& d = drivers_.at(net);
    if (d.kind != DriverKind::Constant)
        return std::nullopt;
    return d.index != 0;
}

std::size_t Netlist::input_bit_count() const {
    std::size_t n = 0;
    for (const auto& b : inputs_)
        n += b.bits.size();
    return n;
}

std::optional<std::size_t> Netlist::find_output(std::string_view name) const {
    for (std::size_t i = 0; i < outputs_.size(); ++i)
        if (outputs_[i].name == name)
            return i;
    return std::nullopt;
}

std::size_t Netlist::decision_bus() const {
    for (std::size_t i = 0; i < outputs_.size(); ++i)
        if (outputs_[i].role == BusRole::Decision)
            return i;
    throw Error("netlist has no decision output bus");
}

std::uint64_t Netlist::fingerprint() const {
    Fnv1a h;
    h.value(drivers_.size());
    for (const auto& d : drivers_) {
        h.value(static_cast<std::uint8_t>(d.kind));
        h.value(d.index);
    }
    h.value(gates_.size());
    for (const auto& g : gates_) {
        h.value(static_cast<std::uint8_t>(g.function));
        h.value(static_cast<std::uint8_t>(g.region));
        h.value(g.inputs);
        h.value(g.output);
    }
    for (const auto* group : {&inputs_, &outputs_}) {
        h.value(group->size());
        for (const auto& b : *group) {
            h.str(b.name);
            h.value(b.is_signed);
            h.value(static_cast<std::uint8_t>(b.role));
            h.value(b.bits.size());
            for (NetId n : b.bits)
                h.value(n);
        }
    }
    return h.digest();
}

void Netlist::audit() const {
    std::vector<int> drive_count(drivers_.size(), 0);
    for (const auto& b : inputs_)
        for (NetId n : b.bits) {
            if (n >= drivers_.size() || drivers_[n].kind != DriverKind::Input)
                throw Error(fmt::format("input bus '{}' bit is not an input net", b.name));
            ++drive_count[n];
        }
    for (std::size_t n = 0; n < drivers_.size(); ++n)
        if (drivers_[n].kind == DriverKind::Constant) {
            if (drivers_[n].index > 1)
                throw Error(fmt::format("constant net {} has value {}", n, drivers_[n].index));
            ++drive_count[n];
        }
    for (std::size_t g = 0; g < gates_.size(); ++g) {
        const auto& gate = gates_[g];
        for (std::size_t p = 0; p < gate.inputs.size(); ++p) {
            bool used = p < static_cast<std::size_t>(gate.arity());
            if (used && gate.inputs[p] >= drivers_.size())
                throw Error(fmt::format("gate {} input {} is undriven", g, p));
            if (!used && gate.inputs[p] != kNoNet)
                throw Error(fmt::format("gate {} has a stray input on pin {}", g, p));
        }
        if (gate.output >= drivers_.size() || drivers_[gate.output].kind != DriverKind::Gate ||
            drivers_[gate.output].index != g)
            throw Error(fmt::format("gate {} output net is inconsistent", g));
        ++drive_count[gate.output];
    }
    for (std::size_t n = 0; n < drivers_.size(); ++n)
        if (drive_count[n] != 1)
            throw Error(fmt::format("net {} has {} drivers", n, drive_count[n]));
    for (const auto& b : outputs_)
        for (NetId n : b.bits)
            if (n >= drivers_.size())
                throw Error(fmt::format("output bus '{}' references missing net {}", b.name, n));
    topo_order(*this);
}

std::vector<GateId> topo_order(const Netlist& n) {
    const auto& gates = n.gates();
    std::vector<int> pending(gates.size(), 0);
    std::vector<std::vector<GateId>> succ(gates.size());
    for (GateId g = 0; g < gates.size(); ++g)
        for (NetId in : gates[g].fanin()) {
            const auto& d = n.driver(in);
            if (d.kind == DriverKind::Gate) {
                ++pending[g];
                succ[d.index].push_back(g);
            }
        }
    std::priority_queue<GateId, std::vector<GateId>, std::greater<>> ready;
    for (GateId g = 0; g < gates.size(); ++g)
        if (pending[g] == 0)
            ready.push(g);
    std::vector<GateId> order;
    order.reserve(gates.size());
    while (!ready.empty()) {
        GateId g = ready.top();
        ready.pop();
        order.push_back(g);
        for (GateId s : succ[g])
            if (--pending[s] == 0)
                ready.push(s);
    }
    if (order.size() != gates.size())
        throw Error(fmt::format("combinational cycle detected ({} of {} gates ordered)", order.size(), gates.size()));
    return order;
}

std::vector<std::vector<std::pair<GateId, int>>> fanouts(const Netlist& n) {
    std::vector<std::vector<std::pair<GateId, int>>> out(n.net_count());
    const auto& gates = n.gates();
    for (GateId g = 0; g < gates.size(); ++g) {
        auto fi = gates[g].fanin();
        for (std::size_t p = 0; p < fi.size(); ++p)
            out[fi[p]].emplace_back(g, static_cast<int>(p));
    }
    return out;
}

bool GateBuilder::cheaper_or_equal(CellFunction replacement, CellFunction original) const {
    if (!lib_)
        return true;
    const auto& r = lib_->cell(replacement);
    const auto& o = lib_->cell(original);
    return r.area <= o.area && r.intrinsic_delay <= o.intrinsic_delay;
}

bool GateBuilder::complementary(NetId a, NetId b) const {
    auto inverts = [&](NetId x, NetId y) {
        const auto& d = n_.driver(x);
        return d.kind == DriverKind::Gate && n_.gate(d.index).function == CellFunction::Inv &&
               n_.gate(d.index).inputs[0] == y;
    };
    return inverts(a, b) || inverts(b, a);
}

NetId GateBuilder::raw(CellFunction f, NetId a, NetId b, NetId c) {
    std::array<NetId, 3> ins{a, b, c};
    auto arity = static_cast<std::size_t>(cell_arity(f));
    if (!hashing_)
        return n_.add_gate(f, std::span<const NetId>(ins.data(), arity), region_);
    std::array<NetId, 4> key{static_cast<NetId>(f), a, b, c};
    if (arity == 2 && key[1] > key[2])
        std::swap(key[1], key[2]);
    auto it = hash_.find(key);
    if (it != hash_.end())
        return it->second;
    NetId out = n_.add_gate(f, std::span<const NetId>(ins.data(), arity), region_);
    hash_.emplace(key, out);
    return out;
}

NetId GateBuilder::try_swap(CellFunction replacement, CellFunction original, NetId a, NetId b, NetId c, NetId oa,
                            NetId ob, NetId oc) {
    if (cheaper_or_equal(replacement, original))
        return emit(replacement, a, b, c);
    return raw(original, oa, ob, oc);
}

NetId GateBuilder::emit(CellFunction f, NetId a, NetId b, NetId c) {
    using F = CellFunction;
    auto cv = [&](NetId x) { return n_.constant_value(x); };
    switch (f) {
    case F::Tie0: return zero();
    case F::Tie1: return one();
    case F::Buf: return a;
    case F::Inv: {
        if (auto k = cv(a))
            return n_.constant(!*k);
        const auto& d = n_.driver(a);
        if (d.kind == DriverKind::Gate && n_.gate(d.index).function == F::Inv)
            return n_.gate(d.index).inputs[0];
        return raw(F::Inv, a);
    }
    case F::Mux2: {
        NetId s = a, i0 = b, i1 = c;
        if (auto k = cv(s))
            return *k ? i1 : i0;
        if (i0 == i1)
            return i0;
        auto k0 = cv(i0), k1 = cv(i1);
        if (k0 && k1)
            return *k1 ? s : try_swap(F::Inv, F::Mux2, s, kNoNet, kNoNet, s, i0, i1);
        if (k0 && !*k0)
            return try_swap(F::And2, F::Mux2, s, i1, kNoNet, s, i0, i1);
        if (k1 && *k1)
            return try_swap(F::Or2, F::Mux2, s, i0, kNoNet, s, i0, i1);
        return raw(F::Mux2, s, i0, i1);
    }
    default: break;
    }

    // Symmetric two-input cells.
    auto ka = cv(a), kb = cv(b);
    if (ka && kb)
        return n_.constant((eval_cell(f, *ka ? ~0ull : 0ull, *kb ? ~0ull : 0ull, 0) & 1) != 0);
    if (ka) {
        std::swap(a, b);
        std::swap(ka, kb);
    }
    if (kb) {
        bool k = *kb;
        switch (f) {
        case F::And2: return k ? a : zero();
        case F::Or2: return k ? one() : a;
        case F::Nand2: return k ? try_swap(F::Inv, f, a, kNoNet, kNoNet, a, b, kNoNet) : one();
        case F::Nor2: return k ? zero() : try_swap(F::Inv, f, a, kNoNet, kNoNet, a, b, kNoNet);
        case F::Xor2: return k ? try_swap(F::Inv, f, a, kNoNet, kNoNet, a, b, kNoNet) : a;
        case F::Xnor2: return k ? a : try_swap(F::Inv, f, a, kNoNet, kNoNet, a, b, kNoNet);
        default: break;
        }
    }
    if (a == b) {
        switch (f) {
        case F::And2:
        case F::Or2: return a;
        case F::Nand2:
        case F::Nor2: return try_swap(F::Inv, f, a, kNoNet, kNoNet, a, b, kNoNet);
        case F::Xor2: return zero();
        case F::Xnor2: return one();
        default: break;
        }
    }
    if (complementary(a, b)) {
        switch (f) {
        case F::And2:
        case F::Nor2:
        case F::Xnor2: return zero();
        case F::Or2:
        case F::Nand2:
        case F::Xor2: return one();
        default: break;
        }
    }
    return raw(f, a, b);
}

namespace {

/// Drops gates outside every output cone and unused constants, renumbering
/// nets as inputs, constants, then gate outputs in gate order.
Netlist sweep_dead(const Netlist& n) {
    const auto& gates = n.gates();
    std::vector<char> live_net(n.net_count(), 0);
    std::vector<char> live_gate(gates.size(), 0);
    std::vector<NetId> stack;
    for (const auto& bus : n.outputs())
        for (NetId b : bus.bits)
            stack.push_back(b);
    while (!stack.empty()) {
        NetId net = stack.back();
        stack.pop_back();
        if (live_net[net])
            continue;
        live_net[net] = 1;
        const auto& d = n.driver(net);
        if (d.kind == DriverKind::Gate) {
            live_gate[d.index] = 1;
            for (NetId in : gates[d.index].fanin())
                stack.push_back(in);
        }
    }

    Netlist out;
    out.meta = n.meta;
    std::vector<NetId> map(n.net_count(), kNoNet);
    for (const auto& bus : n.inputs()) {
        auto idx = out.add_input_bus(bus.name, static_cast<int>(bus.bits.size()));
        for (std::size_t i = 0; i < bus.bits.size(); ++i)
            map[bus.bits[i]] = out.inputs()[idx].bits[i];
    }
    for (bool v : {false, true})
        for (NetId net = 0; net < n.net_count(); ++net)
            if (live_net[net] && n.constant_value(net) == v)
                map[net] = out.constant(v);
    for (GateId g : topo_order(n)) {
        if (!live_gate[g])
            continue;
        const auto& gate = gates[g];
        std::array<NetId, 3> ins{kNoNet, kNoNet, kNoNet};
        for (int p = 0; p < gate.arity(); ++p)
            ins[p] = map[gate.inputs[p]];
        map[gate.output] =
            out.add_gate(gate.function, std::span<const NetId>(ins.data(), gate.arity()), gate.region);
    }
    for (const auto& bus : n.outputs()) {
        Bus b = bus;
        for (auto& bit : b.bits)
            bit = map[bit];
        out.add_output_bus(std::move(b));
    }
    return out;
}

} // namespace

Netlist const_propagate(const Netlist& n, const CellLibrary* lib, std::span<const ConstantOverride> overrides) {
    const auto& gates = n.gates();
    std::vector<std::optional<bool>> forced(gates.size());
    for (const auto& o : overrides) {
        if (o.gate >= gates.size())
            throw Error(fmt::format("constant override for missing gate {}", o.gate));
        forced[o.gate] = o.value;
    }

    Netlist work;
    work.meta = n.meta;
    std::vector<NetId> map(n.net_count(), kNoNet);
    for (const auto& bus : n.inputs()) {
        auto idx = work.add_input_bus(bus.name, static_cast<int>(bus.bits.size()));
        for (std::size_t i = 0; i < bus.bits.size(); ++i)
            map[bus.bits[i]] = work.inputs()[idx].bits[i];
    }
    for (NetId net = 0; net < n.net_count(); ++net)
        if (auto v = n.constant_value(net))
            map[net] = work.constant(*v);

    GateBuilder builder(work, lib);
    for (GateId g : topo_order(n)) {
        const auto& gate = gates[g];
        if (forced[g]) {
            map[gate.output] = work.constant(*forced[g]);
            continue;
        }
        builder.set_region(gate.region);
        std::array<NetId, 3> ins{kNoNet, kNoNet, kNoNet};
        for (int p = 0; p < gate.arity(); ++p)
            ins[p] = map[gate.inputs[p]];
        map[gate.output] = builder.emit(gate.function, ins[0], ins[1], ins[2]);
    }
    for (const auto& bus : n.outputs()) {
        Bus b = bus;
        for (auto& bit : b.bits)
            bit = map[bit];
        work.add_output_bus(std::move(b));
    }
    return sweep_dead(work);
}

std::vector<std::vector<int>> all_cone_bits(const Netlist& n) {
    const std::size_t nb = n.outputs().size();
    std::vector<std::vector<int>> reach(n.net_count(), std::vector<int>(nb, -1));
    for (std::size_t b = 0; b < nb; ++b) {
        const auto& bits = n.outputs()[b].bits;
        for (std::size_t i = 0; i < bits.size(); ++i)
            reach[bits[i]][b] = std::max(reach[bits[i]][b], static_cast<int>(i));
    }
    auto order = topo_order(n);
    const auto& gates = n.gates();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const auto& gate = gates[*it];
        const auto& r = reach[gate.output];
        for (NetId in : gate.fanin())
            for (std::size_t b = 0; b < nb; ++b)
                reach[in][b] = std::max(reach[in][b], r[b]);
    }
    std::vector<std::vector<int>> out(gates.size());
    for (GateId g = 0; g < gates.size(); ++g)
        out[g] = reach[gates[g].output];
    return out;
}

std::vector<int> output_cone_bits(const Netlist& n, GateId g) {
    if (g >= n.gates().size())
        throw Error(fmt::format("gate {} does not exist", g));
    return all_cone_bits(n)[g];
}

namespace {

std::string_view region_name(GateRegion r) { return r == GateRegion::Datapath ? "datapath" : "decision"; }
std::string_view role_name(BusRole r) { return r == BusRole::Significance ? "significance" : "decision"; }
std::string_view decode_name(DecodeMode d) { return d == DecodeMode::ClassIndex ? "class_index" : "label_offset"; }

constexpr std::string_view kFormat = "bespoke-netlist/1";

} // namespace

nlohmann::json to_json(const Netlist& n) {
    using nlohmann::json;
    json inputs = json::array();
    for (const auto& b : n.inputs())
        inputs.push_back({{"name", b.name}, {"bits", b.bits}});
    json constants = json::array();
    for (NetId net = 0; net < n.net_count(); ++net)
        if (auto v = n.constant_value(net))
            constants.push_back({net, *v ? 1 : 0});
    json gates = json::array();
    for (GateId g = 0; g < n.gates().size(); ++g) {
        const auto& gate = n.gate(g);
        auto fi = gate.fanin();
        gates.push_back({{"id", g},
                         {"cell", cell_function_name(gate.function)},
                         {"in", std::vector<NetId>(fi.begin(), fi.end())},
                         {"out", gate.output},
                         {"region", region_name(gate.region)}});
    }
    json outputs = json::array();
    for (const auto& b : n.outputs())
        outputs.push_back(
            {{"name", b.name}, {"role", role_name(b.role)}, {"signed", b.is_signed}, {"bits", b.bits}});
    return {{"format", kFormat},
            {"meta",
             {{"model_kind", n.meta.model_kind},
              {"class_labels", n.meta.class_labels},
              {"decode", decode_name(n.meta.decode)},
              {"label_offset", n.meta.label_offset},
              {"clock_period", n.meta.clock_period}}},
            {"net_count", n.net_count()},
            {"inputs", inputs},
            {"constants", constants},
            {"gates", gates},
            {"outputs", outputs}};
}

Netlist netlist_from_json(const nlohmann::json& doc) {
    try {
        if (doc.value("format", std::string()) != kFormat)
            throw Error(fmt::format("not a {} document", kFormat));
        Netlist n;
        const auto& meta = doc.at("meta");
        n.meta.model_kind = meta.at("model_kind").get<std::string>();
        n.meta.class_labels = meta.at("class_labels").get<std::vector<int>>();
        auto decode = meta.at("decode").get<std::string>();
        if (decode != "class_index" && decode != "label_offset")
            throw Error(fmt::format("unknown decode mode '{}'", decode));
        n.meta.decode = decode == "class_index" ? DecodeMode::ClassIndex : DecodeMode::LabelOffset;
        n.meta.label_offset = meta.at("label_offset").get<int>();
        n.meta.clock_period = meta.at("clock_period").get<double>();

        auto count = doc.at("net_count").get<std::size_t>();
        std::vector<std::optional<NetDriver>> drivers(count);
        auto claim = [&](NetId net, NetDriver d) {
            if (net >= count)
                throw Error(fmt::format("net {} out of range", net));
            if (drivers[net])
                throw Error(fmt::format("net {} has multiple drivers", net));
            drivers[net] = d;
        };
        std::uint32_t ordinal = 0;
        for (const auto& b : doc.at("inputs")) {
            Bus bus;
            bus.name = b.at("name").get<std::string>();
            bus.bits = b.at("bits").get<std::vector<NetId>>();
            for (NetId net : bus.bits)
                claim(net, {DriverKind::Input, ordinal++});
            n.inputs_.push_back(std::move(bus));
        }
        for (const auto& c : doc.at("constants")) {
            auto net = c.at(0).get<NetId>();
            auto v = c.at(1).get<int>();
            if (v != 0 && v != 1)
                throw Error(fmt::format("constant net {} has value {}", net, v));
            claim(net, {DriverKind::Constant, static_cast<std::uint32_t>(v)});
            NetId& slot = v ? n.const1_ : n.const0_;
            if (slot == kNoNet)
                slot = net;
        }
        const auto& gates = doc.at("gates");
        n.gates_.resize(gates.size());
        for (std::size_t i = 0; i < gates.size(); ++i) {
            const auto& g = gates[i];
            auto id = g.value("id", i);
            if (id != i)
                throw Error(fmt::format("gate records must be listed by id (found {} at {})", id, i));
            Gate gate;
            auto cell = g.at("cell").get<std::string>();
            auto f = parse_cell_function(cell);
            if (!f)
                throw Error(fmt::format("unknown cell '{}'", cell));
            gate.function = *f;
            auto ins = g.at("in").get<std::vector<NetId>>();
            if (ins.size() != static_cast<std::size_t>(cell_arity(*f)))
                throw Error(fmt::format("gate {} ({}) has {} inputs", i, cell, ins.size()));
            std::copy(ins.begin(), ins.end(), gate.inputs.begin());
            gate.output = g.at("out").get<NetId>();
            auto region = g.value("region", std::string("datapath"));
            if (region != "datapath" && region != "decision")
                throw Error(fmt::format("unknown gate region '{}'", region));
            gate.region = region == "datapath" ? GateRegion::Datapath : GateRegion::Decision;
            claim(gate.output, {DriverKind::Gate, static_cast<std::uint32_t>(i)});
            n.gates_[i] = gate;
        }
        for (std::size_t net = 0; net < count; ++net)
            if (!drivers[net])
                throw Error(fmt::format("net {} is undriven", net));
        n.drivers_.reserve(count);
        for (auto& d : drivers)
            n.drivers_.push_back(*d);
        for (const auto& b : doc.at("outputs")) {
            Bus bus;
            bus.name = b.at("name").get<std::string>();
            auto role = b.at("role").get<std::string>();
            if (role != "significance" && role != "decision")
                throw Error(fmt::format("unknown bus role '{}'", role));
            bus.role = role == "significance" ? BusRole::Significance : BusRole::Decision;
            bus.is_signed = b.at("signed").get<bool>();
            bus.bits = b.at("bits").get<std::vector<NetId>>();
            n.add_output_bus(std::move(bus));
        }
        n.audit();
        return n;
    } catch (const nlohmann::json::exception& e) {
        throw Error(fmt::format("malformed netlist: {}", e.what()));
    }
}

void save_netlist(const Netlist& n, const std::string& path) { write_text_file(path, to_json(n).dump() + "\n"); }

Netlist load_netlist(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(fmt::format("malformed netlist '{}': {}", path, e.what()));
    }
    return netlist_from_json(doc);
}

} // namespace bespoke
