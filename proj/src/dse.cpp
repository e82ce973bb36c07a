#include "bespoke/dse.hpp"
#include "bespoke/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace bespoke {

Battery battery_preset(const std::string& name) {
    for (const auto& b : battery_presets())
        if (b.name == name)
            return b;
    throw Error(fmt::format("unknown battery preset '{}' (molex-30mw, zinergy-15mw, bluespark-6mw)", name));
}

std::vector<Battery> battery_presets() {
    return {{"molex-30mw", 30.0}, {"zinergy-15mw", 15.0}, {"bluespark-6mw", 6.0}};
}

void GaConfig::validate() const {
    if (lambda < 2)
        throw Error("population size must be at least 2");
    if (epochs < 0)
        throw Error("epoch count must be nonnegative");
    if (!(loss_threshold >= 0.0) || !(prune_loss_cutoff >= 0.0))
        throw Error("accuracy-loss thresholds must be nonnegative");
    if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0))
        throw Error("mutation rate must lie in [0, 1]");
}

int default_epochs(ModelKind kind) { return is_mlp(kind) ? 4 : 8; }

DesignSpace::DesignSpace(Netlist base, const CellLibrary& lib, const VectorSet& profiling, const Dataset& fast_eval,
                         std::vector<double> tau_grid, unsigned threads,
                         const std::optional<std::vector<int>>& phi_only)
    : base_(std::move(base)), lib_(lib), tau_grid_(std::move(tau_grid)), voltages_(lib.voltage().grid()) {
    if (tau_grid_.empty())
        throw Error("tau grid is empty");
    for (double t : tau_grid_)
        if (!(t >= 0.5 && t <= 1.0))
            throw Error(fmt::format("tau_c {} outside [0.5, 1]", t));
    clock_ = base_.meta.clock_period > 0.0 ? base_.meta.clock_period : critical_path(base_, lib_);
    base_.meta.clock_period = clock_;

    auto prof = profile(base_, profiling, threads);
    auto sig = compute_phi(base_);
    for (std::size_t t = 0; t < tau_grid_.size(); ++t) {
        offsets_.push_back(points_.size());
        phi_sets_.push_back(phi_grid(base_, prof, sig, tau_grid_[t], phi_only));
        for (int p = 0; p < phi_count(static_cast<int>(t)); ++p) {
            GridPoint g;
            g.tau = static_cast<int>(t);
            g.phi = p;
            g.tau_c = tau_grid_[t];
            g.phi_c = phi_value(g.tau, p);
            points_.push_back(g);
        }
    }
    variants_.resize(points_.size());

    auto fill = [&](GridPoint& g, const Netlist& n) {
        g.gates = n.gates().size();
        g.area = area_of(n, lib_);
        g.accuracy = evaluate_accuracy(n, fast_eval).accuracy;
        g.critical_path = critical_path(n, lib_);
        g.power = power(n, profile(n, profiling), lib_, lib_.voltage().v_nominal, clock_);
    };
    GridPoint exact;
    fill(exact, base_);
    parallel_for(points_.size(), threads, [&](std::size_t i) {
        auto& g = points_[i];
        if (!g.phi_c) {
            variants_[i] = base_;
            auto keep = g;
            g = exact;
            g.tau = keep.tau;
            g.phi = keep.phi;
            g.tau_c = keep.tau_c;
            g.phi_c = std::nullopt;
            return;
        }
        variants_[i] = prune(base_, prof, sig, {g.tau_c, *g.phi_c}, &lib_).netlist;
        fill(g, variants_[i]);
    });
}

std::optional<int> DesignSpace::phi_value(int tau, int phi) const {
    if (phi == 0)
        return std::nullopt;
    return phi_sets_.at(static_cast<std::size_t>(tau)).at(static_cast<std::size_t>(phi - 1));
}

std::size_t DesignSpace::point_index(int tau, int phi) const {
    if (tau < 0 || static_cast<std::size_t>(tau) >= tau_grid_.size() || phi < 0 || phi >= phi_count(tau))
        throw Error(fmt::format("gene pair (tau {}, phi {}) out of range", tau, phi));
    return offsets_[static_cast<std::size_t>(tau)] + static_cast<std::size_t>(phi);
}

const GridPoint& DesignSpace::point(int tau, int phi) const { return points_[point_index(tau, phi)]; }

const Netlist& DesignSpace::variant(int tau, int phi) const { return variants_[point_index(tau, phi)]; }

bool DesignSpace::valid(const Chromosome& c) const {
    return c.tau >= 0 && static_cast<std::size_t>(c.tau) < tau_grid_.size() && c.phi >= 0 &&
           c.phi < phi_count(c.tau) && c.v >= 0 && static_cast<std::size_t>(c.v) < voltages_.size();
}

std::vector<Chromosome> DesignSpace::all_chromosomes() const {
    std::vector<Chromosome> out;
    for (const auto& g : points_)
        for (std::size_t v = 0; v < voltages_.size(); ++v)
            out.push_back({g.tau, g.phi, static_cast<int>(v)});
    return out;
}

ReducedSpace prune_space(const DesignSpace& space, const Battery& battery, double reference, double cutoff) {
    ReducedSpace r;
    r.grid_points = space.points().size();
    for (const auto& g : space.points()) {
        if (reference - g.accuracy > cutoff)
            continue;
        ++r.accuracy_survivors;
        for (std::size_t v = 0; v < space.voltages().size(); ++v)
            if (rescale_power(g.power, space.voltages()[v]).p_total <= battery.p_bat)
                r.candidates.push_back({g.tau, g.phi, static_cast<int>(v)});
    }
    return r;
}

bool screen(const DesignSpace& space, const Chromosome& c, const Battery& battery, double reference, double t) {
    const auto& g = space.point(c.tau, c.phi);
    if (reference - g.accuracy > t)
        return false;
    if (!min_voltage_for_budget(g.power, battery.p_bat, space.library().voltage()))
        return false;
    return rescale_power(g.power, space.voltages()[static_cast<std::size_t>(c.v)]).p_total <= battery.p_bat;
}

std::vector<Chromosome> pop_init(const DesignSpace& space, const ReducedSpace& reduced, const Battery& battery,
                                 double reference, const GaConfig& cfg) {
    if (reduced.candidates.empty())
        throw Error("reduced design space is empty");
    std::vector<Chromosome> pool;
    for (const auto& c : reduced.candidates)
        if (screen(space, c, battery, reference, cfg.loss_threshold))
            pool.push_back(c);
    if (pool.empty())
        throw Error("no chromosome in the reduced space passes the accuracy/power screen");
    std::mt19937_64 rng(sub_seed(cfg.seed, "pop_init"));
    std::vector<Chromosome> pop;
    if (pool.size() >= cfg.lambda) {
        deterministic_shuffle(rng, pool);
        pop.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cfg.lambda));
    } else {
        pop = pool;
        while (pop.size() < cfg.lambda)
            pop.push_back(pool[uniform_below(rng, pool.size())]);
    }
    return pop;
}

Evaluator::Evaluator(const DesignSpace& space, const VosStimuli& stimuli, const Battery& battery, double reference,
                     double loss_threshold, unsigned threads)
    : space_(space), stimuli_(stimuli), battery_(battery), reference_(reference), loss_threshold_(loss_threshold),
      threads_(std::max(1u, threads)) {
    if (stimuli.vectors.rows() == 0 || stimuli.vectors.rows() != stimuli.labels.size())
        throw Error("VOS stimuli are empty or unlabeled");
}

const Evaluator::Variant& Evaluator::variant(std::size_t point) {
    std::lock_guard lock(mutex_);
    return variants_.at(point);
}

EvaluatedDesign Evaluator::compute(const Chromosome& c) {
    const auto point = space_.point_index(c.tau, c.phi);
    const auto& g = space_.points()[point];
    const auto& n = space_.variant(c.tau, c.phi);
    const auto& var = variant(point);
    const double v = space_.voltages()[static_cast<std::size_t>(c.v)];

    EvaluatedDesign d;
    d.chromosome = c;
    d.tau_c = g.tau_c;
    d.phi_c = g.phi_c;
    d.v_dd = v;
    d.gates = g.gates;
    d.area = g.area;
    auto stale = stale_decision_bits(n, sta(n, space_.library(), v, space_.clock_period()));
    d.accuracy = var.trace->accuracy(stale, stimuli_.labels);
    d.accuracy_loss = reference_ - d.accuracy;
    auto p = rescale_power(var.nominal, v);
    d.p_total = p.p_total;
    d.p_dynamic = p.p_dynamic;
    d.p_static = p.p_static;
    d.feasible = d.p_total <= battery_.p_bat && d.accuracy_loss <= loss_threshold_;
    return d;
}

EvaluatedDesign Evaluator::evaluate(const Chromosome& c) { return evaluate(std::vector<Chromosome>{c}).front(); }

std::vector<EvaluatedDesign> Evaluator::evaluate(const std::vector<Chromosome>& cs) {
    for (const auto& c : cs)
        if (!space_.valid(c))
            throw Error(fmt::format("chromosome ({}, {}, {}) out of range", c.tau, c.phi, c.v));

    std::vector<std::size_t> build;
    std::vector<Chromosome> todo;
    {
        std::set<std::size_t> seen;
        std::set<Chromosome> pending;
        for (const auto& c : cs) {
            auto pi = space_.point_index(c.tau, c.phi);
            if (!variants_.count(pi) && seen.insert(pi).second)
                build.push_back(pi);
            if (!cache_.count(c) && pending.insert(c).second)
                todo.push_back(c);
        }
    }
    std::vector<Variant> built(build.size());
    const auto& pts = space_.points();
    parallel_for(build.size(), threads_, [&](std::size_t i) {
        const auto& g = pts[build[i]];
        const auto& n = space_.variant(g.tau, g.phi);
        built[i].trace = std::make_unique<DecisionTrace>(n, stimuli_.vectors);
        built[i].nominal = power(n, profile(n, stimuli_.vectors), space_.library(),
                                 space_.library().voltage().v_nominal, space_.clock_period());
    });
    for (std::size_t i = 0; i < build.size(); ++i)
        variants_.emplace(build[i], std::move(built[i]));

    std::vector<EvaluatedDesign> fresh(todo.size());
    parallel_for(todo.size(), threads_, [&](std::size_t i) { fresh[i] = compute(todo[i]); });
    for (std::size_t i = 0; i < todo.size(); ++i)
        cache_.emplace(todo[i], fresh[i]);

    std::vector<EvaluatedDesign> out;
    out.reserve(cs.size());
    for (const auto& c : cs)
        out.push_back(cache_.at(c));
    return out;
}

bool dominates(const EvaluatedDesign& a, const EvaluatedDesign& b) {
    if (a.accuracy < b.accuracy || a.area > b.area || a.p_total > b.p_total)
        return false;
    return a.accuracy > b.accuracy || a.area < b.area || a.p_total < b.p_total;
}

std::vector<std::size_t> pareto_front(const std::vector<EvaluatedDesign>& designs) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < designs.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < designs.size() && !dominated; ++j)
            dominated = j != i && dominates(designs[j], designs[i]);
        if (!dominated)
            out.push_back(i);
    }
    return out;
}

std::vector<EvaluatedDesign> feasible_front(const std::vector<EvaluatedDesign>& designs) {
    std::vector<EvaluatedDesign> feasible;
    for (const auto& d : designs)
        if (d.feasible)
            feasible.push_back(d);
    std::sort(feasible.begin(), feasible.end(),
              [](const auto& a, const auto& b) { return a.chromosome < b.chromosome; });
    feasible.erase(std::unique(feasible.begin(), feasible.end(),
                               [](const auto& a, const auto& b) { return a.chromosome == b.chromosome; }),
                   feasible.end());
    std::vector<EvaluatedDesign> out;
    for (auto i : pareto_front(feasible)) {
        const auto& d = feasible[i];
        bool repeat = std::any_of(out.begin(), out.end(), [&](const auto& o) {
            return o.accuracy == d.accuracy && o.area == d.area && o.p_total == d.p_total;
        });
        if (!repeat)
            out.push_back(d);
    }
    return out;
}

namespace {

double violation(const EvaluatedDesign& d, double p_bat, double t) {
    return std::max(0.0, (d.p_total - p_bat) / p_bat) + std::max(0.0, d.accuracy_loss - t);
}

/// Constrained domination: feasible beats infeasible, smaller violation
/// beats larger, and among feasible designs ordinary dominance applies.
bool constrained_dominates(const EvaluatedDesign& a, const EvaluatedDesign& b, double p_bat, double t) {
    if (a.feasible != b.feasible)
        return a.feasible;
    if (!a.feasible) {
        return violation(a, p_bat, t) < violation(b, p_bat, t);
    }
    return dominates(a, b);
}

struct Ranked {
    std::vector<int> rank;
    std::vector<double> crowding;
};

Ranked rank_population(const std::vector<EvaluatedDesign>& pop, double p_bat, double t) {
    const std::size_t n = pop.size();
    Ranked r;
    r.rank.assign(n, 0);
    r.crowding.assign(n, 0.0);
    std::vector<std::vector<std::size_t>> beats(n);
    std::vector<int> beaten(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && constrained_dominates(pop[i], pop[j], p_bat, t)) {
                beats[i].push_back(j);
                ++beaten[j];
            }
    std::vector<std::size_t> front;
    for (std::size_t i = 0; i < n; ++i)
        if (beaten[i] == 0)
            front.push_back(i);
    int level = 0;
    while (!front.empty()) {
        for (auto i : front)
            r.rank[i] = level;
        for (int obj = 0; obj < 3; ++obj) {
            auto key = [&](std::size_t i) { return objectives(pop[i])[static_cast<std::size_t>(obj)]; };
            auto sorted = front;
            std::stable_sort(sorted.begin(), sorted.end(), [&](auto a, auto b) { return key(a) < key(b); });
            double span = key(sorted.back()) - key(sorted.front());
            r.crowding[sorted.front()] = std::numeric_limits<double>::infinity();
            r.crowding[sorted.back()] = std::numeric_limits<double>::infinity();
            if (span <= 0.0)
                continue;
            for (std::size_t k = 1; k + 1 < sorted.size(); ++k)
                r.crowding[sorted[k]] += (key(sorted[k + 1]) - key(sorted[k - 1])) / span;
        }
        std::vector<std::size_t> next;
        for (auto i : front)
            for (auto j : beats[i])
                if (--beaten[j] == 0)
                    next.push_back(j);
        std::sort(next.begin(), next.end());
        front = std::move(next);
        ++level;
    }
    return r;
}

bool better(const Ranked& r, std::size_t a, std::size_t b) {
    if (r.rank[a] != r.rank[b])
        return r.rank[a] < r.rank[b];
    return r.crowding[a] > r.crowding[b];
}

double best_feasible_accuracy(const std::vector<EvaluatedDesign>& ds) {
    double best = -1.0;
    for (const auto& d : ds)
        if (d.feasible)
            best = std::max(best, d.accuracy);
    return best;
}

} // namespace

std::array<double, 3> objectives(const EvaluatedDesign& d) { return {-d.accuracy, d.area, d.p_total}; }

DseResult evolve(const DesignSpace& space, const ReducedSpace& reduced, const std::vector<Chromosome>& population,
                 const GaConfig& cfg, const Battery& battery, double fast_reference, Evaluator& evaluator) {
    cfg.validate();
    if (population.empty())
        throw Error("initial population is empty");
    std::mt19937_64 rng(sub_seed(cfg.seed, "evolve"));

    std::vector<Chromosome> fallback;
    for (const auto& c : reduced.candidates)
        if (screen(space, c, battery, fast_reference, cfg.loss_threshold))
            fallback.push_back(c);

    DseResult result;
    std::vector<EvaluatedDesign> seen;
    auto pop = evaluator.evaluate(population);
    seen.insert(seen.end(), pop.begin(), pop.end());
    double best = best_feasible_accuracy(pop);
    result.best_accuracy_per_epoch.push_back(best);

    const int tau_count = static_cast<int>(space.tau_grid().size());
    const int v_count = static_cast<int>(space.voltages().size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto ranked = rank_population(pop, battery.p_bat, cfg.loss_threshold);
        auto tournament = [&]() {
            auto a = uniform_below(rng, pop.size());
            auto b = uniform_below(rng, pop.size());
            return better(ranked, b, a) ? b : a;
        };
        std::set<Chromosome> present;
        for (const auto& d : pop)
            present.insert(d.chromosome);

        std::vector<Chromosome> children;
        while (children.size() < cfg.lambda) {
            std::optional<Chromosome> pick;
            for (int attempt = 0; attempt < 64; ++attempt) {
                const auto& pa = pop[tournament()].chromosome;
                const auto& pb = pop[tournament()].chromosome;
                // one-point crossover on (tau, phi, v): cut after gene 1 or 2
                auto cut = 1 + uniform_below(rng, 2);
                Chromosome c = cut == 1 ? Chromosome{pa.tau, pb.phi, pb.v} : Chromosome{pa.tau, pa.phi, pb.v};
                if (uniform_unit(rng) < cfg.mutation_rate)
                    c.tau = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(tau_count)));
                if (uniform_unit(rng) < cfg.mutation_rate)
                    c.phi = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(space.phi_count(c.tau))));
                if (uniform_unit(rng) < cfg.mutation_rate)
                    c.v = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(v_count)));
                c.phi = std::min(c.phi, space.phi_count(c.tau) - 1);
                if (!screen(space, c, battery, fast_reference, cfg.loss_threshold))
                    continue;
                pick = c;
                if (!present.count(c))
                    break;
            }
            if (!pick)
                pick = fallback[uniform_below(rng, fallback.size())];
            present.insert(*pick);
            children.push_back(*pick);
        }

        auto offspring = evaluator.evaluate(children);
        seen.insert(seen.end(), offspring.begin(), offspring.end());
        std::vector<EvaluatedDesign> merged = pop;
        merged.insert(merged.end(), offspring.begin(), offspring.end());
        auto r = rank_population(merged, battery.p_bat, cfg.loss_threshold);
        std::vector<std::size_t> order(merged.size());
        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return better(r, a, b); });
        order.resize(cfg.lambda);
        std::sort(order.begin(), order.end());
        std::vector<EvaluatedDesign> next;
        for (auto i : order)
            next.push_back(merged[i]);
        pop = std::move(next);
        best = std::max(best, best_feasible_accuracy(pop));
        result.best_accuracy_per_epoch.push_back(best);
    }
    result.archive = feasible_front(seen);
    result.final_population = pop;
    result.evaluations = evaluator.evaluations();
    return result;
}

double hypervolume(std::vector<std::array<double, 3>> points, const std::array<double, 3>& ref) {
    std::erase_if(points, [&](const auto& p) { return !(p[0] < ref[0] && p[1] < ref[1] && p[2] < ref[2]); });
    if (points.empty())
        return 0.0;
    std::sort(points.begin(), points.end());
    auto area2d = [&](std::size_t upto) {
        std::vector<std::pair<double, double>> yz;
        for (std::size_t i = 0; i < upto; ++i)
            yz.emplace_back(points[i][1], points[i][2]);
        std::sort(yz.begin(), yz.end());
        double a = 0.0, zmin = ref[2];
        for (std::size_t i = 0; i < yz.size(); ++i) {
            zmin = std::min(zmin, yz[i].second);
            double ynext = i + 1 < yz.size() ? yz[i + 1].first : ref[1];
            a += (ynext - yz[i].first) * (ref[2] - zmin);
        }
        return a;
    };
    double vol = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double xnext = i + 1 < points.size() ? points[i + 1][0] : ref[0];
        if (xnext > points[i][0])
            vol += (xnext - points[i][0]) * area2d(i + 1);
    }
    return vol;
}

namespace {

nlohmann::json design_json(const EvaluatedDesign& d) {
    nlohmann::json j;
    j["chromosome"] = {d.chromosome.tau, d.chromosome.phi, d.chromosome.v};
    j["tau_c"] = d.tau_c;
    j["phi_c"] = d.phi_c ? nlohmann::json(*d.phi_c) : nlohmann::json(nullptr);
    j["v_dd"] = d.v_dd;
    j["accuracy"] = d.accuracy;
    j["accuracy_loss"] = d.accuracy_loss;
    j["area"] = d.area;
    j["gates"] = d.gates;
    j["p_total"] = d.p_total;
    j["p_dynamic"] = d.p_dynamic;
    j["p_static"] = d.p_static;
    j["feasible"] = d.feasible;
    return j;
}

} // namespace

nlohmann::json archive_json(const DseResult& r, const Battery& battery, const GaConfig& cfg,
                            const std::string& manifest_hash) {
    nlohmann::json j;
    j["manifest_hash"] = manifest_hash;
    j["battery"] = {{"name", battery.name}, {"p_bat", battery.p_bat}};
    j["ga"] = {{"lambda", cfg.lambda},
               {"epochs", cfg.epochs},
               {"loss_threshold", cfg.loss_threshold},
               {"prune_loss_cutoff", cfg.prune_loss_cutoff},
               {"seed", cfg.seed}};
    j["evaluations"] = r.evaluations;
    j["best_accuracy_per_epoch"] = r.best_accuracy_per_epoch;
    j["archive"] = nlohmann::json::array();
    for (const auto& d : r.archive)
        j["archive"].push_back(design_json(d));
    return j;
}

std::string pareto_csv(const std::vector<EvaluatedDesign>& front, const std::string& manifest_hash) {
    std::string out = "manifest_hash,tau_c,phi_c,v_dd,accuracy,accuracy_loss,area,gates,p_total,p_dynamic,p_static\n";
    for (const auto& d : front)
        out += fmt::format("{},{:.2f},{},{:.2f},{:.6f},{:.6f},{:.4f},{},{:.6f},{:.6f},{:.6f}\n", manifest_hash, d.tau_c,
                           d.phi_c ? std::to_string(*d.phi_c) : std::string("none"), d.v_dd, d.accuracy,
                           d.accuracy_loss, d.area, d.gates, d.p_total, d.p_dynamic, d.p_static);
    return out;
}

} // namespace bespoke
