#include "bespoke/coeffapprox.hpp"
#include "bespoke/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>

namespace bespoke {

namespace {

std::int64_t area_units(double area) { return std::llround(area * 1e6); }

int csd_weight(std::int64_t v) { return static_cast<int>(csd_decompose(v).digits.size()); }

} // namespace

AreaTable::AreaTable(const CellLibrary& lib, int coeff_bits, unsigned threads)
    : lib_(lib), lo_(-(std::int64_t{1} << (coeff_bits - 1))), hi_((std::int64_t{1} << (coeff_bits - 1)) - 1),
      threads_(threads) {}

void AreaTable::prepare(int input_bits) {
    if (!tables_.count(input_bits))
        tables_[input_bits] = multiplier_area_table(lo_, hi_, input_bits, lib_, threads_);
}

double AreaTable::area(std::int64_t w, int input_bits) const {
    auto it = tables_.find(input_bits);
    if (it == tables_.end())
        throw Error(fmt::format("area table for {}-bit inputs not prepared", input_bits));
    if (w < lo_ || w > hi_)
        throw Error(fmt::format("coefficient {} outside the area table", w));
    return it->second[static_cast<std::size_t>(w - lo_)];
}

CandidateSet build_candidates(std::span<const std::int64_t> weights, int e, int input_bits, const AreaTable& table) {
    if (e < 0)
        throw Error("approximation radius must be nonnegative");
    CandidateSet set;
    set.radius = e;
    auto best_in = [&](std::int64_t w, std::int64_t a, std::int64_t b) {
        Candidate best{w, table.area(w, input_bits)};
        for (std::int64_t v = a; v <= b; ++v) {
            double area = table.area(v, input_bits);
            auto ka = area_units(area), kb = area_units(best.area);
            auto da = std::llabs(w - v), db = std::llabs(w - best.value);
            if (ka < kb || (ka == kb && (da < db || (da == db && v < best.value))))
                best = {v, area};
        }
        return best;
    };
    for (auto w : weights) {
        CoefficientCandidates c;
        c.w = w;
        c.area_w = table.area(w, input_bits);
        c.minus = best_in(w, w, std::min(w + e, table.hi()));
        c.plus = best_in(w, std::max(w - e, table.lo()), w);
        set.items.push_back(c);
    }
    return set;
}

ApproxAssignment assign(const CandidateSet& cands, int max_log2) {
    const auto& items = cands.items;
    ApproxAssignment out;
    std::vector<std::size_t> free;
    std::int64_t residual = 0, area = 0;
    std::vector<std::int64_t> current(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        // start every coefficient at its `plus` candidate
        current[i] = items[i].plus.value;
        residual += items[i].w - items[i].plus.value;
        area += area_units(items[i].plus.area);
        if (items[i].minus.value != items[i].plus.value)
            free.push_back(i);
    }

    auto better = [](std::int64_t r, std::int64_t a, const std::vector<std::int64_t>& v, std::int64_t br,
                     std::int64_t ba, const std::vector<std::int64_t>& bv) {
        if (std::llabs(r) != std::llabs(br))
            return std::llabs(r) < std::llabs(br);
        if (a != ba)
            return a < ba;
        return v < bv;
    };

    if (free.size() <= static_cast<std::size_t>(max_log2)) {
        std::vector<std::int64_t> best = current;
        std::int64_t best_r = residual, best_a = area;
        const std::uint64_t total = std::uint64_t{1} << free.size();
        std::vector<char> on(free.size(), 0);
        for (std::uint64_t step = 1; step < total; ++step) {
            // Gray code: flip the lowest set bit position of step
            auto bit = static_cast<std::size_t>(std::countr_zero(step));
            const auto& it = items[free[bit]];
            const Candidate& from = on[bit] ? it.minus : it.plus;
            const Candidate& to = on[bit] ? it.plus : it.minus;
            on[bit] = !on[bit];
            residual += from.value - to.value;
            area += area_units(to.area) - area_units(from.area);
            current[free[bit]] = to.value;
            if (std::llabs(residual) > std::llabs(best_r) ||
                (std::llabs(residual) == std::llabs(best_r) && area > best_a))
                continue;
            if (better(residual, area, current, best_r, best_a, best)) {
                best = current;
                best_r = residual;
                best_a = area;
            }
        }
        out.values = std::move(best);
    } else {
        out.exhaustive = false;
        std::int64_t running = 0;
        for (const auto& it : items) {
            std::int64_t rp = running + it.w - it.plus.value;
            std::int64_t rm = running + it.w - it.minus.value;
            bool take_minus = std::llabs(rm) < std::llabs(rp) ||
                              (std::llabs(rm) == std::llabs(rp) &&
                               (area_units(it.minus.area) < area_units(it.plus.area) ||
                                (area_units(it.minus.area) == area_units(it.plus.area) &&
                                 it.minus.value < it.plus.value)));
            out.values.push_back(take_minus ? it.minus.value : it.plus.value);
            running = take_minus ? rm : rp;
        }
    }
    out.residual = 0;
    out.area = 0.0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out.residual += items[i].w - out.values[i];
        out.area += out.values[i] == items[i].minus.value ? items[i].minus.area : items[i].plus.area;
    }
    return out;
}

double proxy_area(const QuantizedModel& m, AreaTable& table) {
    double total = 0.0;
    for (const auto& layer : m.layers) {
        table.prepare(layer.input_width);
        for (const auto& row : layer.weights)
            for (auto w : row)
                total += table.area(w, layer.input_width);
    }
    return total;
}

ApproxResult approximate_model(const QuantizedModel& m, const ApproxOptions& opt, const CellLibrary& lib) {
    AreaTable table(lib, m.spec.coeff_bits, opt.threads);
    return approximate_model(m, opt, table);
}

ApproxResult approximate_model(const QuantizedModel& m, const ApproxOptions& opt, AreaTable& table) {
    m.validate();
    if (opt.e < 0)
        throw Error("approximation radius must be nonnegative");
    if (table.lo() != m.spec.coeff_min() || table.hi() != m.spec.coeff_max())
        throw Error("area table does not match the model's coefficient width");
    ApproxResult r;
    r.model = m;
    r.proxy_area_before = proxy_area(m, table);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto& layer = m.layers[l];
        const int width = layer.input_width;
        std::vector<ApproxAssignment> picks(layer.outputs());
        parallel_for(layer.outputs(), opt.threads, [&](std::size_t j) {
            picks[j] = assign(build_candidates(layer.weights[j], opt.e, width, table));
        });
        std::vector<std::int64_t> res;
        for (std::size_t j = 0; j < layer.outputs(); ++j) {
            res.push_back(picks[j].residual);
            for (std::size_t i = 0; i < layer.fan_in(); ++i) {
                auto w = layer.weights[j][i];
                auto v = picks[j].values[i];
                r.rows.push_back({static_cast<int>(l), static_cast<int>(j), static_cast<int>(i), w, v,
                                  table.area(w, width), table.area(v, width)});
            }
            r.model.layers[l].weights[j] = picks[j].values;
            if (opt.approx_biases) {
                auto b = layer.biases[j];
                auto best = b;
                for (std::int64_t d = 1; d <= opt.e; ++d)
                    for (auto v : {b - d, b + d})
                        if (csd_weight(v) < csd_weight(best))
                            best = v;
                r.model.layers[l].biases[j] = best;
                r.rows.push_back({static_cast<int>(l), static_cast<int>(j), -1, b, best, 0.0, 0.0});
            }
        }
        r.residuals.push_back(std::move(res));
    }
    r.model.refresh_widths();
    r.model.validate();
    r.proxy_area_after = proxy_area(r.model, table);
    return r;
}

std::string approx_report_csv(const ApproxResult& r, const std::string& manifest_hash) {
    std::string out = "manifest_hash,layer,neuron,input,w,w_approx,area_w,area_w_approx\n";
    for (const auto& row : r.rows)
        out += fmt::format("{},{},{},{},{},{},{:.6f},{:.6f}\n", manifest_hash, row.layer, row.neuron, row.input, row.w,
                           row.w_approx, row.area_w, row.area_w_approx);
    return out;
}

} // namespace bespoke
