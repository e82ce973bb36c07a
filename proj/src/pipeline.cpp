#include "bespoke/pipeline.hpp"
#include "bespoke/coeffapprox.hpp"
#include "bespoke/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <limits>

namespace bespoke {

StageError::StageError(std::string stage, const std::string& message)
    : Error(fmt::format("[{}] {}", stage, message)), stage_(std::move(stage)) {}

void RunManifest::validate() const {
    if (model_path.empty() || train_path.empty() || test_path.empty())
        throw Error("manifest needs model, train and test paths");
    if (output_dir.empty())
        throw Error("manifest needs an output directory");
    spec.validate();
    if (e < 0)
        throw Error("approximation radius e must be nonnegative");
    if (population < 2)
        throw Error("population must be at least 2");
    if (epochs && *epochs < 0)
        throw Error("epochs must be nonnegative");
    if (stimuli_count == 0)
        throw Error("stimuli count must be positive");
    if (fitness != "nsga2")
        throw Error(fmt::format("unsupported fitness '{}' (only nsga2)", fitness));
    battery_preset(battery);
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["model"] = model_path;
    j["train"] = train_path;
    j["test"] = test_path;
    j["library"] = library_path;
    j["seed"] = seed;
    j["input_bits"] = spec.input_bits;
    j["coeff_bits"] = spec.coeff_bits;
    j["e"] = e;
    j["approx_biases"] = approx_biases;
    j["tau_grid"] = tau_grid.empty() ? default_tau_grid() : tau_grid;
    j["phi"] = phi_list ? nlohmann::json(*phi_list) : nlohmann::json("auto");
    j["battery"] = battery;
    j["epochs"] = epochs ? nlohmann::json(*epochs) : nlohmann::json("auto");
    j["population"] = population;
    j["loss_threshold"] = loss_threshold;
    j["prune_loss_cutoff"] = prune_loss_cutoff;
    j["stimuli_count"] = stimuli_count;
    j["fitness"] = fitness;
    j["output_dir"] = output_dir;
    j["threads"] = threads;
    j["tool_version"] = kToolVersion;
    return j;
}

std::string RunManifest::hash() const {
    auto j = to_json();
    j.erase("output_dir");
    j.erase("threads");
    Fnv1a h;
    h.str(j.dump());
    for (const auto* p : {&model_path, &train_path, &test_path, &library_path})
        if (!p->empty() && std::filesystem::exists(*p))
            h.str(read_text_file(*p));
    return hex64(h.digest());
}

RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    m.model_path = j.at("model").get<std::string>();
    m.train_path = j.at("train").get<std::string>();
    m.test_path = j.at("test").get<std::string>();
    m.library_path = j.value("library", std::string());
    m.seed = j.value("seed", std::uint64_t{1});
    m.spec.input_bits = j.value("input_bits", 4);
    m.spec.coeff_bits = j.value("coeff_bits", 8);
    m.e = j.value("e", 4);
    m.approx_biases = j.value("approx_biases", false);
    if (j.contains("tau_grid"))
        m.tau_grid = j["tau_grid"].get<std::vector<double>>();
    if (j.contains("phi") && j["phi"].is_array())
        m.phi_list = j["phi"].get<std::vector<int>>();
    m.battery = j.value("battery", std::string("molex-30mw"));
    if (j.contains("epochs") && j["epochs"].is_number_integer())
        m.epochs = j["epochs"].get<int>();
    m.population = j.value("population", std::size_t{20});
    m.loss_threshold = j.value("loss_threshold", 0.05);
    m.prune_loss_cutoff = j.value("prune_loss_cutoff", 0.20);
    m.stimuli_count = j.value("stimuli_count", std::size_t{100000});
    m.fitness = j.value("fitness", std::string("nsga2"));
    m.output_dir = j.value("output_dir", std::string());
    m.threads = j.value("threads", 1u);
    return m;
}

namespace {

nlohmann::json design_summary(const EvaluatedDesign& d) {
    return {{"tau_c", d.tau_c},
            {"phi_c", d.phi_c ? nlohmann::json(*d.phi_c) : nlohmann::json(nullptr)},
            {"v_dd", d.v_dd},
            {"accuracy", d.accuracy},
            {"accuracy_loss", d.accuracy_loss},
            {"area", d.area},
            {"p_total", d.p_total}};
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

} // namespace

nlohmann::json PipelineSummary::to_json() const {
    nlohmann::json j;
    j["manifest_hash"] = manifest_hash;
    j["model_kind"] = model_kind;
    j["exact"] = {{"accuracy", exact_accuracy}, {"area", exact_area}, {"p_total", exact_power},
                  {"critical_path", clock_period}};
    j["coeff_approx"] = {{"accuracy", cax_accuracy}, {"area", cax_area}, {"p_total", cax_power},
                         {"critical_path", cax_critical_path}};
    j["design_space"] = {{"grid_points", grid_points}, {"full", full_space}, {"reduced", reduced_space},
                         {"evaluations", evaluations}, {"archive", archive_size}};
    j["pruning_only"] = pruning_only ? design_summary(*pruning_only) : nlohmann::json(nullptr);
    j["cross"] = cross ? design_summary(*cross) : nlohmann::json(nullptr);
    return j;
}

PipelineSummary run_pipeline(const RunManifest& m) {
    stage("manifest", [&] { m.validate(); });
    namespace fs = std::filesystem;
    const auto hash = m.hash();
    const fs::path out = m.output_dir;
    stage("manifest", [&] {
        fs::create_directories(out);
        auto j = m.to_json();
        j["manifest_hash"] = hash;
        j.erase("threads");
        j.erase("output_dir");
        write_text_file((out / "manifest.json").string(), j.dump(2) + "\n");
    });
    auto put = [&](const char* name, const std::string& text) { write_text_file((out / name).string(), text); };
    const unsigned threads = std::max(1u, m.threads);
    const auto taus = m.tau_grid.empty() ? default_tau_grid() : m.tau_grid;

    auto lib = stage("library", [&] { return m.library_path.empty() ? default_library() : load_library(m.library_path); });
    auto train = stage("data", [&] { return load_dataset(m.train_path, m.spec.input_bits, Split::Train); });
    auto test = stage("data", [&] { return load_dataset(m.test_path, m.spec.input_bits, Split::Test); });
    const double v_nom = lib.voltage().v_nominal;

    PipelineSummary s;
    s.manifest_hash = hash;

    auto q = stage("quantize", [&] {
        auto q = quantize(load_model(m.model_path), m.spec);
        put("quantized.json", to_json(q).dump(2) + "\n");
        return q;
    });
    s.model_kind = std::string(to_string(q.kind));

    auto exact = stage("synth", [&] {
        auto n = synth_model(q, lib);
        n.meta.clock_period = critical_path(n, lib);
        save_netlist(n, (out / "exact.netlist.json").string());
        return n;
    });
    s.clock_period = exact.meta.clock_period;
    s.exact_area = area_of(exact, lib);
    s.exact_accuracy = evaluate_accuracy(exact, test).accuracy;

    auto cax = stage("coeff-approx", [&] {
        auto r = approximate_model(q, {m.e, m.approx_biases, threads}, lib);
        put("approx_model.json", to_json(r.model).dump(2) + "\n");
        put("coeff_approx.csv", approx_report_csv(r, hash));
        auto n = synth_model(r.model, lib);
        n.meta.clock_period = exact.meta.clock_period;
        save_netlist(n, (out / "cax.netlist.json").string());
        return n;
    });
    s.cax_area = area_of(cax, lib);
    s.cax_accuracy = evaluate_accuracy(cax, test).accuracy;
    s.cax_critical_path = critical_path(cax, lib);

    auto prof = stage("profile", [&] {
        auto p = profile(cax, train.features, threads);
        put("activity.txt", activity_dump(p));
        return p;
    });

    stage("prune-sweep", [&] {
        put("prune_sweep.csv", sweep_csv(prune_sweep(cax, prof, lib, taus, test, threads, m.phi_list), hash));
    });

    stage("sta", [&] { put("timing.csv", timing_report_csv(cax, sta(cax, lib, v_nom), hash)); });

    auto stimuli = stage("vos", [&] {
        auto st = build_vos_stimuli(test, m.stimuli_count, sub_seed(m.seed, "vos"));
        std::string csv = "manifest_hash,design,v_dd,stale_bits,accuracy\n";
        for (const auto* d : {&exact, &cax}) {
            DecisionTrace trace(*d, st.vectors, threads);
            for (double v : lib.voltage().grid()) {
                auto stale = stale_decision_bits(*d, sta(*d, lib, v));
                csv += fmt::format("{},{},{:.2f},{},{:.6f}\n", hash, d == &exact ? "exact" : "coeff_approx", v,
                                   std::count(stale.begin(), stale.end(), true), trace.accuracy(stale, st.labels));
            }
        }
        put("vos.csv", csv);
        return st;
    });

    stage("power", [&] {
        std::string csv = "manifest_hash,design,v_dd,p_static,p_dynamic,p_total\n";
        for (const auto* d : {&exact, &cax}) {
            auto nominal = power(*d, profile(*d, stimuli.vectors, threads), lib, v_nom, d->meta.clock_period);
            (d == &exact ? s.exact_power : s.cax_power) = nominal.p_total;
            for (double v : lib.voltage().grid()) {
                auto p = rescale_power(nominal, v);
                csv += fmt::format("{},{},{:.2f},{:.6f},{:.6f},{:.6f}\n", hash, d == &exact ? "exact" : "coeff_approx",
                                   v, p.p_static, p.p_dynamic, p.p_total);
            }
        }
        put("power.csv", csv);
    });

    stage("dse", [&] {
        const auto battery = battery_preset(m.battery);
        GaConfig cfg;
        cfg.lambda = m.population;
        cfg.epochs = m.epochs.value_or(default_epochs(q.kind));
        cfg.loss_threshold = m.loss_threshold;
        cfg.prune_loss_cutoff = m.prune_loss_cutoff;
        cfg.seed = sub_seed(m.seed, "dse");
        cfg.validate();

        const double fast_ref = s.exact_accuracy;
        const double vos_ref = DecisionTrace(exact, stimuli.vectors, threads)
                                   .accuracy(std::vector<bool>(exact.outputs()[exact.decision_bus()].bits.size()),
                                             stimuli.labels);

        DesignSpace space(cax, lib, train.features, test, taus, threads, m.phi_list);
        auto reduced = prune_space(space, battery, fast_ref, cfg.prune_loss_cutoff);
        s.grid_points = space.points().size();
        s.full_space = space.size();
        s.reduced_space = reduced.candidates.size();
        Evaluator eval(space, stimuli, battery, vos_ref, cfg.loss_threshold, threads);

        DseResult result;
        std::string status = "ok";
        bool screened = std::any_of(reduced.candidates.begin(), reduced.candidates.end(), [&](const auto& c) {
            return screen(space, c, battery, fast_ref, cfg.loss_threshold);
        });
        if (reduced.candidates.empty())
            status = "empty reduced design space";
        else if (!screened)
            status = "no chromosome passes the screen";
        else
            result = evolve(space, reduced, pop_init(space, reduced, battery, fast_ref, cfg), cfg, battery, fast_ref,
                            eval);
        s.evaluations = result.evaluations;
        s.archive_size = result.archive.size();
        for (const auto& d : result.archive)
            if (!s.cross || d.p_total < s.cross->p_total)
                s.cross = d;
        auto j = archive_json(result, battery, cfg, hash);
        j["status"] = status;
        j["design_space"] = {{"grid_points", space.points().size()},
                             {"accuracy_survivors", reduced.accuracy_survivors},
                             {"full", space.size()},
                             {"reduced", reduced.candidates.size()}};
        put("dse_archive.json", j.dump(2) + "\n");
        put("pareto.csv", pareto_csv(result.archive, hash));

        // pruning only: exact coefficients, nominal supply, no battery
        DesignSpace exact_space(exact, lib, train.features, test, taus, threads, m.phi_list);
        Evaluator exact_eval(exact_space, stimuli, {"unbounded", std::numeric_limits<double>::infinity()}, vos_ref,
                             cfg.loss_threshold, threads);
        std::vector<Chromosome> nominal;
        const int vn = static_cast<int>(exact_space.voltages().size()) - 1;
        for (const auto& g : exact_space.points())
            nominal.push_back({g.tau, g.phi, vn});
        for (const auto& d : exact_eval.evaluate(nominal))
            if (d.feasible && (!s.pruning_only || d.p_total < s.pruning_only->p_total))
                s.pruning_only = d;
    });

    put("summary.json", s.to_json().dump(2) + "\n");
    return s;
}

std::string render_report(const nlohmann::json& j) {
    auto num = [](const nlohmann::json& v, const char* key) {
        return v.contains(key) && v[key].is_number() ? fmt::format("{:.4f}", v[key].get<double>()) : std::string("-");
    };
    std::string out = fmt::format("manifest {}  model {}\n", j.value("manifest_hash", std::string("?")),
                                  j.value("model_kind", std::string("?")));
    out += fmt::format("{:<14} {:>10} {:>10} {:>10} {:>8} {:>6} {:>6}\n", "design", "accuracy", "area", "power", "v_dd",
                       "tau_c", "phi_c");
    auto row = [&](const char* name, const nlohmann::json& d) {
        if (d.is_null()) {
            out += fmt::format("{:<14} (none)\n", name);
            return;
        }
        std::string phi = d.contains("phi_c") ? (d["phi_c"].is_null() ? "none" : d["phi_c"].dump()) : "-";
        out += fmt::format("{:<14} {:>10} {:>10} {:>10} {:>8} {:>6} {:>6}\n", name, num(d, "accuracy"), num(d, "area"),
                           num(d, "p_total"), d.contains("v_dd") ? num(d, "v_dd") : "1.0000",
                           d.contains("tau_c") ? num(d, "tau_c") : "-", phi);
    };
    row("exact", j.value("exact", nlohmann::json(nullptr)));
    row("coeff_approx", j.value("coeff_approx", nlohmann::json(nullptr)));
    row("pruning_only", j.value("pruning_only", nlohmann::json(nullptr)));
    row("cross", j.value("cross", nlohmann::json(nullptr)));
    if (j.contains("design_space")) {
        const auto& ds = j["design_space"];
        out += fmt::format("design space: {} grid points, {} chromosomes, {} after pruning, {} evaluated, {} archived\n",
                           ds.value("grid_points", 0), ds.value("full", 0), ds.value("reduced", 0),
                           ds.value("evaluations", 0), ds.value("archive", 0));
    }
    return out;
}

} // namespace bespoke
