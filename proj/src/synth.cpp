#include "bespoke/synth.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace bespoke {

CsdForm csd_decompose(std::int64_t w) {
    CsdForm f;
    f.value = w;
    std::int64_t n = w;
    int shift = 0;
    while (n != 0) {
        if (n & 1) {
            // n mod 4 == 1 -> +1, n mod 4 == 3 -> -1
            int d = ((n & 3) == 1) ? 1 : -1;
            f.digits.push_back({shift, d});
            n -= d;
        }
        n >>= 1;  // arithmetic shift; n is even here
        ++shift;
    }
    return f;
}

namespace {

std::int64_t floor_div_pow2(std::int64_t v, int k) { return v >> k; }

/// A bundle of nets carrying an integer known to lie in [lo, hi]; two's
/// complement when lo < 0, unsigned otherwise.
struct Word {
    std::vector<NetId> bits;
    std::int64_t lo = 0;
    std::int64_t hi = 0;

    bool is_signed() const { return lo < 0; }
};

class Datapath {
public:
    Datapath(Netlist& n, const CellLibrary& lib) : b_(n, &lib) { b_.set_hashing(true); }

    GateBuilder& builder() { return b_; }

    Word constant(std::int64_t v) {
        Word w;
        w.lo = w.hi = v;
        int width = range_width(v, v);
        for (int i = 0; i < width; ++i)
            w.bits.push_back(b_.netlist().constant(((v >> i) & 1) != 0));
        return w;
    }

    Word input(const std::vector<NetId>& bits, std::int64_t max) {
        Word w;
        w.bits = bits;
        w.hi = max;
        return w;
    }

    /// Bits of w resized to width, sign- or zero-extending.
    std::vector<NetId> resize(const Word& w, std::size_t width) {
        std::vector<NetId> out(w.bits.begin(), w.bits.begin() + std::min(width, w.bits.size()));
        NetId fill = (w.is_signed() && !w.bits.empty()) ? w.bits.back() : b_.zero();
        while (out.size() < width)
            out.push_back(fill);
        return out;
    }

    Word shift_left(const Word& w, int k) {
        if (w.bits.empty() || k == 0)
            return w.bits.empty() ? constant(0) : w;
        Word out;
        out.bits.assign(static_cast<std::size_t>(k), b_.zero());
        out.bits.insert(out.bits.end(), w.bits.begin(), w.bits.end());
        out.lo = w.lo * (std::int64_t{1} << k);
        out.hi = w.hi * (std::int64_t{1} << k);
        return out;
    }

    /// a + b, or a - b when subtract is set; ripple carry.
    Word add(const Word& a, const Word& b, bool subtract) {
        Word out;
        out.lo = subtract ? a.lo - b.hi : a.lo + b.lo;
        out.hi = subtract ? a.hi - b.lo : a.hi + b.hi;
        auto width = static_cast<std::size_t>(range_width(out.lo, out.hi));
        if (width == 0)
            return constant(0);
        auto A = resize(a, width);
        auto B = resize(b, width);
        NetId carry = b_.zero();
        if (subtract) {
            for (auto& bit : B)
                bit = b_.inv(bit);
            carry = b_.one();
        }
        for (std::size_t i = 0; i < width; ++i) {
            NetId t = b_.xor2(A[i], B[i]);
            out.bits.push_back(b_.xor2(t, carry));
            if (i + 1 < width)
                carry = b_.nand2(b_.nand2(A[i], B[i]), b_.nand2(carry, t));
        }
        return out;
    }

    /// Narrows w to a range known to contain its value. Dropping high bits is
    /// exact because the value fits the narrower representation.
    Word tighten(Word w, std::int64_t lo, std::int64_t hi) {
        if (lo == hi)
            return constant(lo);
        auto width = static_cast<std::size_t>(range_width(lo, hi));
        if (width < w.bits.size())
            w.bits.resize(width);
        w.bits = resize(w, width);
        w.lo = lo;
        w.hi = hi;
        return w;
    }

    Word negate(const Word& w) { return add(constant(0), w, true); }

    /// 1 when a < b.
    NetId less(const Word& a, const Word& b) {
        if (a.hi < b.lo)
            return b_.one();
        if (a.lo >= b.hi)
            return b_.zero();
        Word d = add(a, b, true);
        return d.bits.back();
    }

    /// sel ? y : x
    Word select(NetId sel, const Word& x, const Word& y) {
        Word out;
        out.lo = std::min(x.lo, y.lo);
        out.hi = std::max(x.hi, y.hi);
        auto width = static_cast<std::size_t>(range_width(out.lo, out.hi));
        auto X = resize(x, width);
        auto Y = resize(y, width);
        for (std::size_t i = 0; i < width; ++i)
            out.bits.push_back(b_.mux2(sel, X[i], Y[i]));
        return out;
    }

    Word relu(const Word& w) {
        if (w.lo >= 0)
            return w;
        if (w.hi <= 0)
            return constant(0);
        NetId keep = b_.inv(w.bits.back());
        Word out;
        out.hi = w.hi;
        auto width = static_cast<std::size_t>(unsigned_width(w.hi));
        for (std::size_t i = 0; i < width; ++i)
            out.bits.push_back(b_.and2(w.bits[i], keep));
        return out;
    }

    /// 1 when w > 0.
    NetId positive(const Word& w) {
        if (w.lo > 0)
            return b_.one();
        if (w.hi <= 0)
            return b_.zero();
        std::vector<NetId> level(w.bits.begin(), w.bits.end());
        while (level.size() > 1) {
            std::vector<NetId> next;
            for (std::size_t i = 0; i + 1 < level.size(); i += 2)
                next.push_back(b_.or2(level[i], level[i + 1]));
            if (level.size() % 2)
                next.push_back(level.back());
            level = std::move(next);
        }
        NetId nonzero = level.front();
        return w.is_signed() ? b_.and2(nonzero, b_.inv(w.bits.back())) : nonzero;
    }

    struct Term {
        Word word;
        bool negative = false;
    };

    /// Balanced pairwise reduction of signed terms, adjacent pairs first.
    Word sum_terms(std::vector<Term> terms) {
        if (terms.empty())
            return constant(0);
        while (terms.size() > 1) {
            std::vector<Term> next;
            for (std::size_t i = 0; i + 1 < terms.size(); i += 2) {
                const Term& l = terms[i];
                const Term& r = terms[i + 1];
                if (l.negative == r.negative)
                    next.push_back({add(l.word, r.word, false), l.negative});
                else if (r.negative)
                    next.push_back({add(l.word, r.word, true), false});
                else
                    next.push_back({add(r.word, l.word, true), false});
            }
            if (terms.size() % 2)
                next.push_back(terms.back());
            terms = std::move(next);
        }
        return terms.front().negative ? negate(terms.front().word) : terms.front().word;
    }

    /// |w| * x via CSD shift-add.
    Word multiply(const Word& x, std::int64_t w) {
        if (w == 0 || x.hi == 0)
            return constant(0);
        auto csd = csd_decompose(w < 0 ? -w : w);
        std::vector<Term> terms;
        for (const auto& d : csd.digits)
            terms.push_back({shift_left(x, d.shift), d.sign < 0});
        std::int64_t m = w < 0 ? -w : w;
        return tighten(sum_terms(std::move(terms)), 0, m * x.hi);
    }

    Word weighted_sum(const std::vector<Word>& xs, std::span<const std::int64_t> w, std::int64_t bias) {
        b_.clear_hash();
        std::vector<Term> terms;
        std::int64_t lo = bias, hi = bias;
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (w[i] != 0 && xs[i].hi != 0) {
                terms.push_back({multiply(xs[i], w[i]), w[i] < 0});
                (w[i] < 0 ? lo : hi) += w[i] * xs[i].hi;
            }
        if (bias != 0)
            terms.push_back({constant(bias < 0 ? -bias : bias), bias < 0});
        return tighten(sum_terms(std::move(terms)), lo, hi);
    }

    /// Index of the maximum value, lowest index on ties.
    Word argmax(const std::vector<Word>& values) {
        struct Entry {
            Word value;
            Word index;
        };
        std::vector<Entry> level;
        for (std::size_t i = 0; i < values.size(); ++i)
            level.push_back({values[i], constant(static_cast<std::int64_t>(i))});
        while (level.size() > 1) {
            std::vector<Entry> next;
            for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
                const Entry& l = level[i];
                const Entry& r = level[i + 1];
                NetId right_wins = less(l.value, r.value);
                next.push_back({select(right_wins, l.value, r.value), select(right_wins, l.index, r.index)});
            }
            if (level.size() % 2)
                next.push_back(level.back());
            level = std::move(next);
        }
        return level.front().index;
    }

private:
    GateBuilder b_;
};

Bus make_bus(std::string name, std::vector<NetId> bits, bool is_signed, BusRole role) {
    Bus b;
    b.name = std::move(name);
    b.bits = std::move(bits);
    b.is_signed = is_signed;
    b.role = role;
    return b;
}

std::vector<Word> add_feature_inputs(Netlist& n, Datapath& dp, int count, int input_bits) {
    std::vector<Word> xs;
    for (int i = 0; i < count; ++i) {
        auto idx = n.add_input_bus(fmt::format("x{}", i), input_bits);
        xs.push_back(dp.input(n.inputs()[idx].bits, (std::int64_t{1} << input_bits) - 1));
    }
    return xs;
}

} // namespace

Multiplier synth_multiplier(std::int64_t w, int input_bits, const CellLibrary& lib) {
    if (input_bits < 1)
        throw Error("multiplier input needs at least one bit");
    Netlist n;
    Datapath dp(n, lib);
    auto idx = n.add_input_bus("x", input_bits);
    Word x = dp.input(n.inputs()[idx].bits, (std::int64_t{1} << input_bits) - 1);
    Word p = dp.multiply(x, w);
    auto bits = p.bits.empty() ? std::vector<NetId>{n.constant(false)} : p.bits;
    n.add_output_bus(make_bus("p", std::move(bits), false, BusRole::Significance));
    Multiplier m;
    m.netlist = const_propagate(n, &lib);
    m.area = area_of(m.netlist, lib);
    m.negative = w < 0;
    return m;
}

std::vector<double> multiplier_area_table(std::int64_t lo, std::int64_t hi, int input_bits, const CellLibrary& lib,
                                          unsigned threads) {
    if (hi < lo)
        return {};
    std::vector<double> out(static_cast<std::size_t>(hi - lo + 1));
    parallel_for(out.size(), threads, [&](std::size_t i) {
        out[i] = synth_multiplier(lo + static_cast<std::int64_t>(i), input_bits, lib).area;
    });
    return out;
}

Netlist synth_weighted_sum(std::span<const std::int64_t> weights, std::int64_t bias, int input_bits,
                           const CellLibrary& lib) {
    Netlist n;
    Datapath dp(n, lib);
    auto xs = add_feature_inputs(n, dp, static_cast<int>(weights.size()), input_bits);
    Word s = dp.weighted_sum(xs, weights, bias);
    auto bits = s.bits.empty() ? std::vector<NetId>{n.constant(false)} : s.bits;
    n.add_output_bus(make_bus("S", std::move(bits), s.is_signed(), BusRole::Significance));
    return const_propagate(n, &lib);
}

Netlist synth_model(const QuantizedModel& m, const CellLibrary& lib) {
    m.validate();
    Netlist n;
    Datapath dp(n, lib);
    auto& gb = dp.builder();
    auto xs = add_feature_inputs(n, dp, m.n_features, m.spec.input_bits);

    gb.set_region(GateRegion::Datapath);
    std::vector<Word> in = xs;
    std::vector<Word> sums;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto& layer = m.layers[l];
        sums.clear();
        for (std::size_t j = 0; j < layer.outputs(); ++j) {
            sums.push_back(dp.weighted_sum(in, layer.weights[j], layer.biases[j]));
        }
        if (l + 1 < m.layers.size()) {
            in.clear();
            for (const auto& s : sums)
                in.push_back(dp.relu(s));
        }
    }

    const auto acc = static_cast<std::size_t>(m.layers.back().acc_width);
    std::vector<Bus> significance;
    if (m.kind == ModelKind::SvmC) {
        std::size_t c = 0;
        for (int i = 0; i < m.n_classes; ++i)
            for (int j = i + 1; j < m.n_classes; ++j, ++c)
                significance.push_back(
                    make_bus(fmt::format("S{}_{}", i, j), dp.resize(sums[c], acc), true, BusRole::Significance));
    } else if (m.kind == ModelKind::MlpC) {
        for (std::size_t i = 0; i < sums.size(); ++i)
            significance.push_back(
                make_bus(fmt::format("O{}", i), dp.resize(sums[i], acc), true, BusRole::Significance));
    } else {
        significance.push_back(make_bus("S", dp.resize(sums.front(), acc), true, BusRole::Significance));
    }

    gb.clear_hash();
    gb.set_region(GateRegion::Decision);
    Bus decision;
    n.meta.model_kind = std::string(to_string(m.kind));
    n.meta.class_labels = m.class_labels;
    if (m.kind == ModelKind::MlpC || m.kind == ModelKind::SvmC) {
        Word index;
        if (m.kind == ModelKind::MlpC) {
            index = dp.argmax(sums);
        } else {
            std::vector<std::vector<Datapath::Term>> ballots(static_cast<std::size_t>(m.n_classes));
            std::size_t c = 0;
            for (int i = 0; i < m.n_classes; ++i)
                for (int j = i + 1; j < m.n_classes; ++j, ++c) {
                    NetId vote_i = dp.positive(sums[c]);
                    Word wi{{vote_i}, 0, 1};
                    Word wj{{gb.inv(vote_i)}, 0, 1};
                    if (auto k = n.constant_value(vote_i)) {
                        wi = dp.constant(*k ? 1 : 0);
                        wj = dp.constant(*k ? 0 : 1);
                    }
                    ballots[static_cast<std::size_t>(i)].push_back({wi, false});
                    ballots[static_cast<std::size_t>(j)].push_back({wj, false});
                }
            std::vector<Word> counts;
            for (auto& b : ballots)
                counts.push_back(dp.sum_terms(std::move(b)));
            index = dp.argmax(counts);
        }
        auto width = static_cast<std::size_t>(std::max(1, ceil_log2(m.n_classes)));
        decision = make_bus("class", dp.resize(index, width), false, BusRole::Decision);
        n.meta.decode = DecodeMode::ClassIndex;
        n.meta.label_offset = 0;
    } else {
        const Word& s = sums.front();
        int k = m.output_shift();
        Word r;
        if (k > 0) {
            Word t = dp.add(s, dp.constant(std::int64_t{1} << (k - 1)), false);
            r.lo = floor_div_pow2(t.lo, k);
            r.hi = floor_div_pow2(t.hi, k);
            if (t.bits.size() > static_cast<std::size_t>(k))
                r.bits.assign(t.bits.begin() + k, t.bits.end());
            else if (t.is_signed())
                r.bits = {t.bits.back()};
            else
                r = dp.constant(0);
            if (r.lo == r.hi)
                r = dp.constant(r.lo);
        } else {
            r = dp.shift_left(s, -k);
        }
        std::int64_t lmin = m.label_min();
        std::int64_t span = m.label_max() - lmin;
        Word d = dp.add(r, dp.constant(lmin < 0 ? -lmin : lmin), lmin >= 0);
        if (lmin == 0)
            d = r;
        NetId below = dp.less(d, dp.constant(0));
        NetId above = dp.less(dp.constant(span), d);
        auto width = static_cast<std::size_t>(std::max(1, unsigned_width(span)));
        auto D = dp.resize(d, width);
        NetId keep = gb.inv(below);
        std::vector<NetId> bits;
        for (std::size_t i = 0; i < width; ++i) {
            NetId top = gb.netlist().constant(((span >> i) & 1) != 0);
            bits.push_back(gb.and2(gb.mux2(above, D[i], top), keep));
        }
        decision = make_bus("label", std::move(bits), false, BusRole::Decision);
        n.meta.decode = DecodeMode::LabelOffset;
        n.meta.label_offset = static_cast<int>(lmin);
    }

    for (auto& b : significance)
        n.add_output_bus(std::move(b));
    n.add_output_bus(std::move(decision));
    Netlist out = const_propagate(n, &lib);
    out.audit();
    return out;
}

double area_of(const Netlist& n, const CellLibrary& lib) {
    double a = 0.0;
    for (const auto& g : n.gates())
        a += lib.cell(g.function).area;
    return a;
}

} // namespace bespoke
