#include "bespoke/logicsim.hpp"
#include "bespoke/synth.hpp"
#include "support.hpp"

#include <doctest.h>

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

VectorSet slice(const VectorSet& v, std::size_t begin, std::size_t end) {
    VectorSet out;
    for (std::size_t r = begin; r < end; ++r)
        out.push_row(v.row(r));
    return out;
}

void check_same(const ActivityProfile& a, const ActivityProfile& b) {
    CHECK(a.fingerprint == b.fingerprint);
    CHECK(a.vectors == b.vectors);
    CHECK(a.ones == b.ones);
    CHECK(a.toggles == b.toggles);
    CHECK(a.first == b.first);
    CHECK(a.last == b.last);
}

} // namespace

TEST_CASE("inverter with input 0 gives 1") {
    Netlist n;
    n.add_input_bus("x", 1);
    std::vector<NetId> in{n.inputs()[0].bits[0]};
    auto y = n.add_gate(CellFunction::Inv, in);
    n.add_output_bus({"y", {y}, false, BusRole::Decision});
    VectorSet v;
    std::vector<std::int32_t> zero{0};
    v.push_row(zero);
    CHECK(simulate(n, v)(0, 0) == 1);
}

TEST_CASE("batch simulation equals scalar simulation") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        auto n = testing::random_netlist(rng, 3, 4, 150, 10);
        auto v = random_vectors(rng, 200, 3, 4);
        auto out = simulate(n, v);
        for (std::size_t r = 0; r < v.rows(); ++r) {
            std::vector<std::int64_t> in(v.row(r).begin(), v.row(r).end());
            auto s = testing::eval_scalar(n, in);
            for (std::size_t b = 0; b < n.outputs().size(); ++b)
                CHECK(testing::BigInt(out(r, b)) == testing::bus_value(s, n.outputs()[b]));
        }
    }
}

TEST_CASE("vector width checks") {
    std::mt19937_64 rng(1);
    auto n = testing::random_netlist(rng, 2, 3, 10, 2);
    VectorSet wrong_cols;
    std::vector<std::int32_t> row{1};
    wrong_cols.push_row(row);
    CHECK_THROWS_AS(simulate(n, wrong_cols), Error);
    VectorSet too_wide;
    std::vector<std::int32_t> row2{8, 0};
    too_wide.push_row(row2);
    CHECK_THROWS_AS(simulate(n, too_wide), Error);
    CHECK_THROWS_AS(profile(n, VectorSet{}), Error);
}

TEST_CASE("85 percent ones gives tau 0.85 and value 1") {
    Netlist n;
    n.add_input_bus("x", 1);
    std::vector<NetId> in{n.inputs()[0].bits[0]};
    auto y = n.add_gate(CellFunction::Buf, in);
    auto z = n.add_gate(CellFunction::And2, std::vector<NetId>{y, n.constant(false)});
    n.add_output_bus({"y", {y, z}, false, BusRole::Decision});
    VectorSet v;
    for (int i = 0; i < 100; ++i) {
        std::vector<std::int32_t> r{i < 85 ? 1 : 0};
        v.push_row(r);
    }
    auto p = profile(n, v);
    CHECK(p.tau(0) == doctest::Approx(0.85));
    CHECK(p.dominant(0));
    CHECK(p.tau_at_least(0, 0.85));
    CHECK_FALSE(p.tau_at_least(0, 0.86));
    CHECK(p.toggles[0] == 1);
    CHECK(p.tau(1) == 1.0);
    CHECK_FALSE(p.dominant(1));
}

TEST_CASE("3-gate circuit over exhaustive vectors matches the truth-table tally") {
    Netlist n;
    n.add_input_bus("x", 3);
    auto a = n.inputs()[0].bits[0], b = n.inputs()[0].bits[1], c = n.inputs()[0].bits[2];
    auto g0 = n.add_gate(CellFunction::And2, std::vector<NetId>{a, b});
    auto g1 = n.add_gate(CellFunction::Or2, std::vector<NetId>{g0, c});
    auto g2 = n.add_gate(CellFunction::Xor2, std::vector<NetId>{a, g1});
    n.add_output_bus({"y", {g2}, false, BusRole::Decision});
    VectorSet v;
    for (int x = 0; x < 8; ++x) {
        std::vector<std::int32_t> r{x};
        v.push_row(r);
    }
    auto p = profile(n, v);
    int ones[3] = {0, 0, 0}, toggles[3] = {0, 0, 0}, prev[3] = {0, 0, 0};
    for (int x = 0; x < 8; ++x) {
        bool xa = x & 1, xb = x & 2, xc = x & 4;
        int out[3];
        out[0] = xa && xb;
        out[1] = out[0] || xc;
        out[2] = xa != static_cast<bool>(out[1]);
        for (int g = 0; g < 3; ++g) {
            ones[g] += out[g];
            if (x > 0 && out[g] != prev[g])
                ++toggles[g];
            prev[g] = out[g];
        }
    }
    for (GateId g = 0; g < 3; ++g) {
        CHECK(p.ones[g] == static_cast<std::uint64_t>(ones[g]));
        CHECK(p.toggles[g] == static_cast<std::uint64_t>(toggles[g]));
        double frac = ones[g] / 8.0;
        CHECK(p.tau(g) == doctest::Approx(std::max(frac, 1.0 - frac)));
        CHECK(p.dominant(g) == (2 * ones[g] >= 8));
    }
}

TEST_CASE("profile counts agree with scalar re-simulation") {
    std::mt19937_64 rng(32);
    auto n = testing::random_netlist(rng, 2, 4, 100, 6);
    auto v = random_vectors(rng, 300, 2, 4);
    auto p = profile(n, v, 3);
    std::vector<std::uint64_t> ones(n.gates().size()), toggles(n.gates().size());
    std::vector<char> prev;
    for (std::size_t r = 0; r < v.rows(); ++r) {
        auto s = testing::eval_scalar(n, {v(r, 0), v(r, 1)});
        for (GateId g = 0; g < n.gates().size(); ++g) {
            ones[g] += s[n.gate(g).output];
            if (r > 0 && s[n.gate(g).output] != prev[n.gate(g).output])
                ++toggles[g];
        }
        prev = s;
    }
    CHECK(p.ones == ones);
    CHECK(p.toggles == toggles);
    CHECK(p.fingerprint == n.fingerprint());
    for (GateId g = 0; g < n.gates().size(); ++g) {
        CHECK(p.tau(g) >= 0.5);
        CHECK(p.tau(g) <= 1.0);
    }
}

TEST_CASE("profile merge is the concatenation and is associative") {
    std::mt19937_64 rng(33);
    auto n = testing::random_netlist(rng, 2, 4, 80, 6);
    auto v = random_vectors(rng, 250, 2, 4);
    auto a = profile(n, slice(v, 0, 70));
    auto b = profile(n, slice(v, 70, 131));
    auto c = profile(n, slice(v, 131, 250));
    auto whole = profile(n, v);
    check_same(merge(merge(a, b), c), whole);
    check_same(merge(a, merge(b, c)), whole);
    for (unsigned t : {1u, 2u, 5u})
        check_same(profile(n, v, t), whole);
    auto other = testing::random_netlist(rng, 2, 4, 80, 6);
    CHECK_THROWS_AS(merge(a, profile(other, v)), Error);
}

TEST_CASE("disagreement with the dominant value is 1 - tau") {
    std::mt19937_64 rng(34);
    auto n = testing::random_netlist(rng, 2, 4, 60, 4);
    auto v = random_vectors(rng, 123, 2, 4);
    auto p = profile(n, v);
    BatchSimulator sim(n);
    std::vector<std::uint64_t> disagree(n.gates().size());
    for (std::size_t first = 0; first < v.rows(); first += 64) {
        auto count = std::min<std::size_t>(64, v.rows() - first);
        auto mask = sim.run(v, first, count);
        for (GateId g = 0; g < n.gates().size(); ++g) {
            auto word = sim.values()[n.gate(g).output];
            auto dom = p.dominant(g) ? ~std::uint64_t{0} : 0;
            disagree[g] += static_cast<std::uint64_t>(std::popcount((word ^ dom) & mask));
        }
    }
    for (GateId g = 0; g < n.gates().size(); ++g)
        CHECK(static_cast<double>(disagree[g]) / 123.0 == doctest::Approx(1.0 - p.tau(g)));
}

TEST_CASE("constant decision gives majority-class-style accuracy") {
    auto f = testing::load_fixture("iris", "mlp_c");
    Netlist n;
    n.add_input_bus("x0", 4);
    for (int i = 1; i < f.q.n_features; ++i)
        n.add_input_bus("x" + std::to_string(i), 4);
    n.add_output_bus({"class", {n.constant(false), n.constant(false)}, false, BusRole::Decision});
    n.meta.model_kind = "MLP-C";
    n.meta.class_labels = f.q.class_labels;
    auto rep = evaluate_accuracy(n, f.test);
    std::size_t hits = 0;
    for (int l : f.test.labels)
        hits += l == f.q.class_labels[0];
    CHECK(rep.accuracy == doctest::Approx(static_cast<double>(hits) / f.test.size()));
    CHECK(rep.correct == hits);
    CHECK(rep.total == f.test.size());
}

TEST_CASE("exact netlist accuracy equals oracle accuracy") {
    auto lib = default_library();
    for (const auto& d : testing::datasets()) {
        auto f = testing::load_fixture(d, "svm_r");
        auto n = synth_model(f.q, lib);
        auto rep = evaluate_accuracy(n, f.test);
        CHECK(rep.accuracy == model_accuracy(f.q, f.test));
        std::size_t total = 0;
        for (auto [k, c] : rep.confusion)
            total += c;
        CHECK(total == f.test.size());
    }
}

TEST_CASE("decode_label handles out-of-range class indices") {
    NetlistMeta m;
    m.class_labels = {3, 5, 7};
    CHECK(decode_label(m, 1) == 5);
    CHECK_FALSE(decode_label(m, 3).has_value());
    m.decode = DecodeMode::LabelOffset;
    m.label_offset = 3;
    CHECK(decode_label(m, 2) == 5);
    auto r = accuracy_from_predictions({std::nullopt, 1, 2}, {0, 1, 3});
    CHECK(r.correct == 1);
    CHECK(r.confusion.at({0, std::numeric_limits<int>::min()}) == 1);
}

TEST_CASE("basis points make grid thresholds exact") {
    CHECK(to_basis_points(0.85) == 8500);
    CHECK(to_basis_points(0.99) == 9900);
    CHECK(to_basis_points(0.8) == 8000);
}
