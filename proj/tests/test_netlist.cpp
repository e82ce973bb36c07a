#include "bespoke/netlist.hpp"
#include "support.hpp"

#include <doctest.h>

#include <deque>
#include <map>
#include <random>
#include <set>

using namespace bespoke;

namespace {

// Evaluation with some gate outputs forced to constants.
std::vector<char> eval_forced(const Netlist& n, const std::vector<std::int64_t>& inputs,
                              const std::map<GateId, bool>& forced) {
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
    for (auto [g, v] : forced) {
        value[n.gate(g).output] = v;
        known[n.gate(g).output] = 1;
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
            value[g.output] = testing::cell_truth(g.function, g.arity() > 0 && value[g.inputs[0]],
                                                  g.arity() > 1 && value[g.inputs[1]],
                                                  g.arity() > 2 && value[g.inputs[2]]);
            known[g.output] = 1;
            progress = true;
        }
    }
    return value;
}

std::vector<testing::BigInt> outputs_of(const Netlist& n, const std::vector<char>& v) {
    std::vector<testing::BigInt> r;
    for (const auto& b : n.outputs())
        r.push_back(testing::bus_value(v, b));
    return r;
}

} // namespace

TEST_CASE("topo_order respects every dependency") {
    std::mt19937_64 rng(1);
    auto n = testing::random_netlist(rng, 3, 4, 200, 6);
    auto order = topo_order(n);
    REQUIRE(order.size() == n.gates().size());
    std::vector<int> pos(n.gates().size(), -1);
    for (std::size_t i = 0; i < order.size(); ++i)
        pos[order[i]] = static_cast<int>(i);
    for (GateId g = 0; g < n.gates().size(); ++g)
        for (auto in : n.gate(g).fanin())
            if (n.driver(in).kind == DriverKind::Gate)
                CHECK(pos[n.driver(in).index] < pos[g]);
}

TEST_CASE("a combinational cycle is rejected") {
    auto doc = nlohmann::json::parse(R"({
        "format": "bespoke-netlist/1",
        "meta": {"model_kind": "MLP-R", "class_labels": [0, 1], "decode": "class_index",
                 "label_offset": 0, "clock_period": 0.0},
        "net_count": 3,
        "inputs": [{"name": "x", "bits": [0]}],
        "constants": [],
        "gates": [{"id": 0, "cell": "AND2", "in": [0, 2], "out": 1},
                  {"id": 1, "cell": "INV", "in": [1], "out": 2}],
        "outputs": [{"name": "label", "role": "decision", "signed": false, "bits": [2]}]})");
    CHECK_THROWS_WITH_AS(netlist_from_json(doc), doctest::Contains("cycle"), Error);
}

TEST_CASE("gate builder folds constant identities") {
    Netlist n;
    n.add_input_bus("x", 2);
    NetId x = n.inputs()[0].bits[0], y = n.inputs()[0].bits[1];
    GateBuilder b(n);
    CHECK(b.and2(x, b.zero()) == n.constant(false));
    CHECK(b.xor2(x, b.zero()) == x);
    CHECK(b.or2(x, b.one()) == n.constant(true));
    CHECK(b.and2(x, x) == x);
    CHECK(b.xor2(x, x) == n.constant(false));
    CHECK(b.mux2(b.one(), x, y) == y);
    CHECK(b.mux2(b.zero(), x, y) == x);
    CHECK(n.gates().empty());
    NetId nx = b.inv(x);
    CHECK(n.gates().size() == 1);
    CHECK(b.inv(nx) == x);
    CHECK(b.and2(x, nx) == n.constant(false));
    CHECK(b.xor2(x, nx) == n.constant(true));
}

TEST_CASE("gate builder preserves function on random inputs") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        auto src = testing::random_netlist(rng, 2, 3, 60, 4);
        Netlist dst;
        dst.add_input_bus("x0", 3);
        dst.add_input_bus("x1", 3);
        auto lib = default_library();
        GateBuilder b(dst, trial % 2 ? &lib : nullptr);
        b.set_hashing(trial % 3 == 0);
        std::vector<NetId> map(src.net_count(), kNoNet);
        for (std::size_t bus = 0; bus < 2; ++bus)
            for (std::size_t k = 0; k < 3; ++k)
                map[src.inputs()[bus].bits[k]] = dst.inputs()[bus].bits[k];
        for (NetId net = 0; net < src.net_count(); ++net)
            if (auto c = src.constant_value(net))
                map[net] = dst.constant(*c);
        for (auto g : topo_order(src)) {
            const auto& gate = src.gate(g);
            NetId a = gate.arity() > 0 ? map[gate.inputs[0]] : kNoNet;
            NetId bb = gate.arity() > 1 ? map[gate.inputs[1]] : kNoNet;
            NetId c = gate.arity() > 2 ? map[gate.inputs[2]] : kNoNet;
            map[gate.output] = b.emit(gate.function, a, bb, c);
        }
        for (const auto& bus : src.outputs()) {
            Bus out = bus;
            for (auto& bit : out.bits)
                bit = map[bit];
            dst.add_output_bus(out);
        }
        dst.audit();
        CHECK(dst.gates().size() <= src.gates().size());
        for (std::int64_t a = 0; a < 8; ++a)
            for (std::int64_t c = 0; c < 8; ++c)
                CHECK(outputs_of(src, testing::eval_scalar(src, {a, c})) ==
                      outputs_of(dst, testing::eval_scalar(dst, {a, c})));
    }
}

TEST_CASE("const_propagate with tied gates is exhaustively equivalent") {
    std::mt19937_64 rng(9);
    auto lib = default_library();
    for (int trial = 0; trial < 10; ++trial) {
        auto n = testing::random_netlist(rng, 2, 4, 100, 8);
        std::map<GateId, bool> forced;
        while (forced.size() < 10)
            forced[static_cast<GateId>(rng() % n.gates().size())] = rng() & 1;
        std::vector<ConstantOverride> ov;
        for (auto [g, v] : forced)
            ov.push_back({g, v});
        auto p = const_propagate(n, trial % 2 ? &lib : nullptr, ov);
        p.audit();
        CHECK(p.gates().size() <= n.gates().size());
        CHECK(p.meta == n.meta);
        for (std::int64_t a = 0; a < 16; ++a)
            for (std::int64_t b = 0; b < 16; ++b)
                CHECK(outputs_of(n, eval_forced(n, {a, b}, forced)) ==
                      outputs_of(p, testing::eval_scalar(p, {a, b})));
    }
}

TEST_CASE("const_propagate is idempotent") {
    std::mt19937_64 rng(10);
    auto lib = default_library();
    for (int trial = 0; trial < 20; ++trial) {
        auto n = testing::random_netlist(rng, 2, 4, 80, 6);
        auto once = const_propagate(n, &lib);
        auto twice = const_propagate(once, &lib);
        CHECK(twice.gates().size() == once.gates().size());
        CHECK(twice.fingerprint() == once.fingerprint());
    }
    CHECK_THROWS_AS(const_propagate(testing::random_netlist(rng, 1, 2, 5, 1), nullptr,
                                    std::vector<ConstantOverride>{{99, true}}),
                    Error);
}

TEST_CASE("cone bits agree with forward reachability") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        auto n = testing::random_netlist(rng, 2, 4, 120, 8);
        auto fo = fanouts(n);
        auto all = all_cone_bits(n);
        for (GateId g = 0; g < n.gates().size(); ++g) {
            std::set<NetId> seen{n.gate(g).output};
            std::deque<NetId> q{n.gate(g).output};
            while (!q.empty()) {
                NetId net = q.front();
                q.pop_front();
                for (auto [h, pin] : fo[net])
                    if (seen.insert(n.gate(h).output).second)
                        q.push_back(n.gate(h).output);
            }
            std::vector<int> expect;
            for (const auto& bus : n.outputs()) {
                int hi = -1;
                for (std::size_t k = 0; k < bus.bits.size(); ++k)
                    if (seen.count(bus.bits[k]))
                        hi = static_cast<int>(k);
                expect.push_back(hi);
            }
            CHECK(output_cone_bits(n, g) == expect);
            CHECK(all[g] == expect);
        }
    }
}

TEST_CASE("audit and loader reject malformed netlists") {
    std::mt19937_64 rng(13);
    auto n = testing::random_netlist(rng, 2, 3, 30, 4);
    auto doc = to_json(n);

    auto dangling = doc;
    dangling["outputs"][0]["bits"][0] = 100000;
    CHECK_THROWS_AS(netlist_from_json(dangling), Error);

    auto doubled = doc;
    doubled["gates"][1]["out"] = doubled["gates"][0]["out"];
    CHECK_THROWS_AS(netlist_from_json(doubled), Error);

    auto bad_cell = doc;
    bad_cell["gates"][0]["cell"] = "NAND3";
    CHECK_THROWS_WITH_AS(netlist_from_json(bad_cell), doctest::Contains("NAND3"), Error);

    auto arity = doc;
    arity["gates"][0]["in"].push_back(0);
    CHECK_THROWS_AS(netlist_from_json(arity), Error);

    Netlist empty;
    CHECK_THROWS_AS(empty.decision_bus(), Error);
    CHECK_THROWS_AS(empty.add_input_bus("x", 0), Error);
    std::vector<NetId> missing{5};
    CHECK_THROWS_AS(empty.add_gate(CellFunction::Inv, missing), Error);
}

TEST_CASE("netlist json round-trip is exact") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 10; ++trial) {
        auto n = testing::random_netlist(rng, 2, 4, 50, 5);
        n.meta.clock_period = 1.25 * trial;
        auto back = netlist_from_json(nlohmann::json::parse(to_json(n).dump()));
        CHECK(back == n);
        CHECK(back.fingerprint() == n.fingerprint());
    }
}
