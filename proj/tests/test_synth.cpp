#include "bespoke/logicsim.hpp"
#include "bespoke/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <functional>
#include <map>
#include <random>

using namespace bespoke;

namespace {

// Fewest signed powers of two summing to w.
int min_signed_digits(std::int64_t w) {
    static std::map<std::int64_t, int> memo;
    if (w == 0)
        return 0;
    if (w == 1 || w == -1)
        return 1;
    if (auto it = memo.find(w); it != memo.end())
        return it->second;
    int r = (w % 2 == 0) ? min_signed_digits(w / 2)
                         : 1 + std::min(min_signed_digits((w - 1) / 2), min_signed_digits((w + 1) / 2));
    memo[w] = r;
    return r;
}

} // namespace

TEST_CASE("csd examples") {
    CHECK(csd_decompose(16).digits == std::vector<CsdDigit>{{4, 1}});
    CHECK(csd_decompose(7).digits == std::vector<CsdDigit>{{0, -1}, {3, 1}});
    CHECK(csd_decompose(0).digits.empty());
    CHECK(csd_decompose(-7).digits == std::vector<CsdDigit>{{0, 1}, {3, -1}});
}

TEST_CASE("csd is exact, non-adjacent and minimal") {
    for (std::int64_t w = -512; w <= 512; ++w) {
        auto c = csd_decompose(w);
        std::int64_t sum = 0;
        for (std::size_t i = 0; i < c.digits.size(); ++i) {
            sum += c.digits[i].sign * (std::int64_t{1} << c.digits[i].shift);
            if (i > 0)
                CHECK(c.digits[i].shift >= c.digits[i - 1].shift + 2);
        }
        CHECK(sum == w);
        CHECK(c.value == w);
        CHECK(static_cast<int>(c.digits.size()) == min_signed_digits(w));
    }
}

TEST_CASE("BM_45 computes 45x for every input") {
    auto lib = default_library();
    auto m = synth_multiplier(45, 4, lib);
    auto p = *m.netlist.find_output("p");
    for (std::int64_t x = 0; x < 16; ++x) {
        auto v = testing::eval_scalar(m.netlist, {x});
        CHECK(testing::bus_value(v, m.netlist.outputs()[p]) == 45 * x);
    }
}

TEST_CASE("every 8-bit multiplier is exhaustively correct") {
    auto lib = default_library();
    for (std::int64_t w = -128; w <= 127; ++w) {
        auto m = synth_multiplier(w, 4, lib);
        CHECK(m.negative == (w < 0));
        const auto& bus = m.netlist.outputs()[*m.netlist.find_output("p")];
        for (std::int64_t x = 0; x < 16; ++x)
            CHECK(testing::bus_value(testing::eval_scalar(m.netlist, {x}), bus) == std::abs(w) * x);
    }
}

TEST_CASE("multiplier area properties") {
    auto lib = default_library();
    auto table = multiplier_area_table(-128, 127, 4, lib, 4);
    auto area = [&](std::int64_t w) { return table[static_cast<std::size_t>(w + 128)]; };
    CHECK(area(0) == 0.0);
    CHECK(area(64) == 0.0);
    CHECK(area(1) == 0.0);
    CHECK(area(7) > 0.0);
    for (std::int64_t w = -127; w <= 127; ++w) {
        CHECK(area(-w) == area(w));
        CHECK(area(w) == doctest::Approx(synth_multiplier(w, 4, lib).area));
        if (std::abs(2 * w) <= 127)
            CHECK(area(2 * w) <= area(w));
    }
}

TEST_CASE("weighted sums are exhaustively exact") {
    auto lib = default_library();
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::int64_t> w{static_cast<std::int64_t>(rng() % 256) - 128,
                                    static_cast<std::int64_t>(rng() % 256) - 128};
        std::int64_t bias = static_cast<std::int64_t>(rng() % 2001) - 1000;
        auto n = synth_weighted_sum(w, bias, 4, lib);
        const auto& s = n.outputs()[*n.find_output("S")];
        for (std::int64_t a = 0; a < 16; ++a)
            for (std::int64_t b = 0; b < 16; ++b)
                CHECK(testing::bus_value(testing::eval_scalar(n, {a, b}), s) == w[0] * a + w[1] * b + bias);
    }
}

TEST_CASE("identity regressor passes its input through") {
    QuantizedModel m;
    m.kind = ModelKind::SvmR;
    m.n_features = 1;
    m.n_classes = 16;
    for (int c = 0; c < 16; ++c)
        m.class_labels.push_back(c);
    // one coefficient LSB times 2^-coeff_exponent, inputs carry 2^-4
    m.coeff_exponent = 0;
    QuantizedLayer l;
    l.weights = {{1}};
    l.biases = {0};
    m.layers.push_back(l);
    m.refresh_widths();
    auto lib = default_library();
    auto n = synth_model(m, lib);
    for (std::int32_t x = 0; x < 16; ++x) {
        VectorSet v;
        std::vector<std::int32_t> row{x};
        v.push_row(row);
        auto expect = predict_label(m, row);
        CHECK(predict_labels(n, v).front() == expect);
        CHECK(testing::predict_big(m, row) == expect);
    }
}

TEST_CASE("synthesized fixture circuits match integer inference") {
    auto lib = default_library();
    std::mt19937_64 rng(17);
    for (const auto& d : testing::datasets())
        for (const auto& k : testing::kinds()) {
            CAPTURE(d);
            CAPTURE(k);
            auto f = testing::load_fixture(d, k);
            auto n = synth_model(f.q, lib);
            n.audit();
            VectorSet vectors = f.test.features;
            for (int i = 0; i < 300; ++i) {
                std::vector<std::int32_t> row(static_cast<std::size_t>(f.q.n_features));
                for (auto& x : row)
                    x = static_cast<std::int32_t>(rng() % 16);
                vectors.push_row(row);
            }
            auto out = simulate(n, vectors);
            auto labels = predict_labels(n, vectors);
            std::vector<std::size_t> sig;
            for (std::size_t b = 0; b < n.outputs().size(); ++b)
                if (n.outputs()[b].role == BusRole::Significance)
                    sig.push_back(b);
            for (std::size_t r = 0; r < vectors.rows(); ++r) {
                auto x = vectors.row(r);
                auto sums = testing::forward_big(f.q, x);
                REQUIRE(sums.size() == sig.size());
                for (std::size_t j = 0; j < sig.size(); ++j)
                    CHECK(testing::BigInt(out(r, sig[j])) == sums[j]);
                REQUIRE(labels[r].has_value());
                CHECK(*labels[r] == testing::predict_big(f.q, x));
            }
            // scalar cross-check on a few vectors
            for (std::size_t r = 0; r < 5; ++r) {
                std::vector<std::int64_t> in(vectors.row(r).begin(), vectors.row(r).end());
                auto v = testing::eval_scalar(n, in);
                auto dec = testing::bus_value(v, n.outputs()[n.decision_bus()]);
                CHECK(decode_label(n.meta, static_cast<std::int64_t>(dec)) == labels[r]);
            }
        }
}

TEST_CASE("3-class SVM-C votes match on random vectors") {
    std::mt19937_64 rng(23);
    auto lib = default_library();
    auto q = testing::random_model(rng, ModelKind::SvmC, 4, 0, 3);
    auto n = synth_model(q, lib);
    VectorSet v;
    for (int i = 0; i < 1000; ++i) {
        std::vector<std::int32_t> row(4);
        for (auto& x : row)
            x = static_cast<std::int32_t>(rng() % 16);
        v.push_row(row);
    }
    auto labels = predict_labels(n, v);
    for (std::size_t r = 0; r < v.rows(); ++r)
        CHECK(labels[r] == testing::predict_big(q, v.row(r)));
}

TEST_CASE("area_of sums cell areas") {
    std::mt19937_64 rng(2);
    auto lib = default_library();
    auto n = testing::random_netlist(rng, 2, 3, 40, 3);
    double a = 0.0;
    for (const auto& g : n.gates())
        a += lib.cell(g.function).area;
    CHECK(area_of(n, lib) == doctest::Approx(a));
}
