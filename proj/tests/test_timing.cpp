#include "bespoke/synth.hpp"
#include "bespoke/timing.hpp"
#include "support.hpp"

#include <doctest.h>

#include <map>
#include <random>

using namespace bespoke;

namespace {

VectorSet random_vectors(std::mt19937_64& rng, std::size_t rows, std::size_t cols, int bits) {
    VectorSet v;
    std::vector<std::int32_t> row(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (auto& x : row)
            x = static_cast<std::int32_t>(rng() % (1u << bits));
        v.push_row(row);
    }
    return v;
}

VectorSet rows_of(const VectorSet& v, std::initializer_list<std::size_t> idx) {
    VectorSet out;
    for (auto i : idx)
        out.push_row(v.row(i));
    return out;
}

} // namespace

TEST_CASE("single gate and chain arrivals") {
    auto lib = default_library();
    Netlist n;
    n.add_input_bus("x", 1);
    NetId net = n.inputs()[0].bits[0];
    std::vector<NetId> chain;
    for (int i = 0; i < 3; ++i) {
        net = n.add_gate(CellFunction::Inv, std::vector<NetId>{net});
        chain.push_back(net);
    }
    n.add_output_bus({"y", {net}, false, BusRole::Decision});
    auto t = sta(n, lib, 1.0);
    double d = lib.cell(CellFunction::Inv).intrinsic_delay;
    CHECK(t.arrival[chain[0]] == doctest::Approx(d));
    CHECK(t.arrival[chain[2]] == doctest::Approx(3 * d));
    CHECK(t.critical_path == doctest::Approx(3 * d));
    CHECK(t.slack == doctest::Approx(0.0));
    CHECK_THROWS_AS(sta(n, lib, 0.5), Error);
}

TEST_CASE("arrivals scale uniformly with the supply") {
    auto lib = default_library();
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 5; ++trial) {
        auto n = testing::random_netlist(rng, 3, 4, 200, 8);
        // nominal arrivals recomputed in gate order until stable
        std::vector<double> nominal(n.net_count(), 0.0);
        for (bool changed = true; changed;) {
            changed = false;
            for (const auto& g : n.gates()) {
                double a = 0.0;
                for (auto in : g.fanin())
                    a = std::max(a, nominal[in]);
                a += lib.cell(g.function).intrinsic_delay;
                if (a != nominal[g.output]) {
                    nominal[g.output] = a;
                    changed = true;
                }
            }
        }
        for (double v : {0.8, 0.6, 0.92}) {
            auto t = sta(n, lib, v);
            double s = delay_scale(lib.voltage(), v);
            for (NetId net = 0; net < n.net_count(); ++net)
                CHECK(t.arrival[net] == doctest::Approx(nominal[net] * s).epsilon(1e-12));
            for (const auto& g : n.gates())
                for (auto in : g.fanin())
                    CHECK(t.arrival[g.output] >= t.arrival[in]);
        }
    }
}

TEST_CASE("VOS at nominal or with slack equals zero-delay simulation") {
    auto lib = default_library();
    std::mt19937_64 rng(62);
    auto n = testing::random_netlist(rng, 2, 4, 150, 8);
    auto v = random_vectors(rng, 300, 2, 4);
    auto zero = simulate(n, v);
    CHECK(vos_simulate(n, lib, {1.0, 0.0}, v) == zero);
    double cp06 = sta(n, lib, 0.6).critical_path;
    CHECK(vos_simulate(n, lib, {0.6, cp06}, v) == zero);
    CHECK(vos_simulate(n, lib, {0.7, cp06 * 2}, v) == zero);
}

TEST_CASE("hand-traced stale capture of one late bit") {
    auto lib = default_library();
    Netlist n;
    n.add_input_bus("x", 2);
    auto a = n.inputs()[0].bits[0], b = n.inputs()[0].bits[1];
    auto g0 = n.add_gate(CellFunction::And2, std::vector<NetId>{a, b});
    auto g1 = n.add_gate(CellFunction::Inv, std::vector<NetId>{g0});
    n.add_output_bus({"y", {g0, g1}, false, BusRole::Decision});
    // clock exactly at bit 0's arrival at 0.7 V: bit 1 is late
    double clock = lib.cell(CellFunction::And2).intrinsic_delay * delay_scale(lib.voltage(), 0.7);
    auto t = sta(n, lib, 0.7, clock);
    auto late = violating_bits(n, t);
    CHECK(late[0] == std::vector<bool>{false, true});
    VectorSet v;
    for (int x : {3, 0, 3, 3, 1}) {
        std::vector<std::int32_t> r{x};
        v.push_row(r);
    }
    // settled (bit0, bit1): 3 -> (1,0), 0 -> (0,1), 1 -> (0,1)
    // captured: t0 bit1 from the zero state; later ones from t-1
    auto out = vos_simulate(n, lib, {0.7, clock}, v);
    CHECK(out(0, 0) == 1);      // (1, 0)
    CHECK(out(1, 0) == 0);      // (0, 0): bit1 from vector 0
    CHECK(out(2, 0) == 1 + 2);  // (1, 1): bit1 from vector 1
    CHECK(out(3, 0) == 1);      // (1, 0)
    CHECK(out(4, 0) == 0);      // (0, 0)
}

TEST_CASE("VOS output depends only on the previous and current vector") {
    auto lib = default_library();
    std::mt19937_64 rng(63);
    auto n = testing::random_netlist(rng, 2, 4, 150, 8);
    auto v = random_vectors(rng, 120, 2, 4);
    double cp = critical_path(n, lib);
    VosConfig cfg{0.7, cp};
    auto full = vos_simulate(n, lib, cfg, v);
    for (std::size_t t = 1; t < v.rows(); t += 7) {
        auto pair = vos_simulate(n, lib, cfg, rows_of(v, {t - 1, t}));
        for (std::size_t b = 0; b < n.outputs().size(); ++b)
            CHECK(pair(1, b) == full(t, b));
    }
}

TEST_CASE("violating bits grow as the supply drops") {
    auto lib = default_library();
    auto f = testing::load_fixture("balance_scale", "mlp_c");
    auto n = synth_model(f.q, lib);
    double clock = critical_path(n, lib);
    std::vector<std::vector<bool>> prev;
    for (auto v : lib.voltage().grid()) {
        (void)v;
    }
    auto grid = lib.voltage().grid();
    for (std::size_t i = grid.size(); i-- > 0;) {
        auto late = violating_bits(n, sta(n, lib, grid[i], clock));
        if (!prev.empty())
            for (std::size_t b = 0; b < late.size(); ++b)
                for (std::size_t k = 0; k < late[b].size(); ++k)
                    if (prev[b][k])
                        CHECK(late[b][k]);
        prev = late;
    }
    CHECK(min_violation_free_voltage(n, lib, clock) == doctest::Approx(1.0));
    CHECK(min_violation_free_voltage(n, lib, clock * 10).value() == doctest::Approx(0.6));
}

TEST_CASE("decision trace predictions equal VOS simulation") {
    auto lib = default_library();
    for (const auto& [d, k] : std::vector<std::pair<std::string, std::string>>{
             {"balance_scale", "svm_r"}, {"iris", "mlp_c"}, {"redwine", "svm_c"}}) {
        auto f = testing::load_fixture(d, k);
        auto n = synth_model(f.q, lib);
        auto stim = build_vos_stimuli(f.test, 700, 5);
        DecisionTrace trace(n, stim.vectors, 3);
        CHECK(trace.size() == 700);
        double clock = critical_path(n, lib);
        for (double v : {1.0, 0.9, 0.8, 0.7, 0.6}) {
            auto t = sta(n, lib, v, clock);
            auto stale = stale_decision_bits(n, t);
            auto out = vos_simulate(n, lib, {v, clock}, stim.vectors);
            auto preds = trace.predictions(stale);
            std::size_t correct = 0;
            for (std::size_t r = 0; r < stim.vectors.rows(); ++r) {
                auto expect = decode_label(n.meta, out(r, n.decision_bus()));
                CHECK(preds[r] == expect);
                correct += expect && *expect == stim.labels[r];
            }
            CHECK(trace.accuracy(stale, stim.labels) == doctest::Approx(static_cast<double>(correct) / 700.0));
        }
    }
}

TEST_CASE("stimuli replication and determinism") {
    auto f = testing::load_fixture("iris", "svm_c");
    const auto n = f.test.size();
    auto count = [&](const VosStimuli& s) {
        std::map<std::pair<std::vector<std::int32_t>, int>, int> c;
        for (std::size_t r = 0; r < s.vectors.rows(); ++r)
            ++c[{std::vector<std::int32_t>(s.vectors.row(r).begin(), s.vectors.row(r).end()), s.labels[r]}];
        return c;
    };
    std::map<std::pair<std::vector<std::int32_t>, int>, int> base;
    for (std::size_t r = 0; r < n; ++r)
        ++base[{std::vector<std::int32_t>(f.test.features.row(r).begin(), f.test.features.row(r).end()),
                f.test.labels[r]}];

    auto once = build_vos_stimuli(f.test, n, 9);
    CHECK(count(once) == base);
    auto twice = build_vos_stimuli(f.test, 2 * n, 9);
    auto doubled = base;
    for (auto& [key, c] : doubled)
        c *= 2;
    CHECK(count(twice) == doubled);
    CHECK(build_vos_stimuli(f.test, 1000, 9).vectors == build_vos_stimuli(f.test, 1000, 9).vectors);
    CHECK(build_vos_stimuli(f.test, 1000, 9).vectors != build_vos_stimuli(f.test, 1000, 10).vectors);
    auto odd = build_vos_stimuli(f.test, n + 7, 3);
    CHECK(odd.vectors.rows() == n + 7);
    CHECK_THROWS_AS(build_vos_stimuli(f.test, n - 1, 3), Error);
}

TEST_CASE("timing csv lists every gate") {
    auto lib = default_library();
    std::mt19937_64 rng(64);
    auto n = testing::random_netlist(rng, 2, 3, 20, 3);
    auto csv = timing_report_csv(n, sta(n, lib, 0.8), "hh");
    CHECK(std::count(csv.begin(), csv.end(), '\n') >= 21);
}
