#include "bespoke/coeffapprox.hpp"
#include "bespoke/dse.hpp"
#include "bespoke/pipeline.hpp"
#include "bespoke/power.hpp"
#include "bespoke/pruner.hpp"
#include "bespoke/synth.hpp"
#include "bespoke/timing.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>

using namespace bespoke;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitStage = 3;

std::vector<double> parse_tau_grid(const std::string& text) {
    if (text.empty() || text == "default")
        return default_tau_grid();
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> f;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= text.size(); ++i)
            if (i == text.size() || text[i] == ':') {
                f.push_back(text.substr(start, i - start));
                start = i + 1;
            }
        if (f.size() != 3)
            throw CLI::ValidationError("--tau-grid", "expected lo:hi:step");
        auto lo = to_basis_points(std::stod(f[0])), hi = to_basis_points(std::stod(f[1]));
        auto step = to_basis_points(std::stod(f[2]));
        if (step <= 0 || lo > hi)
            throw CLI::ValidationError("--tau-grid", "empty range");
        std::vector<double> g;
        for (auto bp = lo; bp <= hi; bp += step)
            g.push_back(static_cast<double>(bp) / 10000.0);
        return g;
    }
    std::vector<double> g;
    for (const auto& f : split_csv_line(text))
        g.push_back(std::stod(f));
    return g;
}

std::optional<std::vector<int>> parse_phi(const std::string& text) {
    if (text.empty() || text == "auto")
        return std::nullopt;
    std::vector<int> out;
    for (const auto& f : split_csv_line(text))
        out.push_back(std::stoi(f));
    return out;
}

std::vector<double> parse_voltages(const std::string& text, const CellLibrary& lib) {
    if (text == "grid")
        return lib.voltage().grid();
    std::vector<double> out;
    for (const auto& f : split_csv_line(text))
        out.push_back(std::stod(f));
    return out;
}

/// Hash over the subcommand, its option values (threads and output paths
/// excluded) and the contents of the named input files.
std::string command_hash(const CLI::App& cmd, const std::vector<std::string>& inputs) {
    Fnv1a h;
    h.str(cmd.get_name());
    h.str(kToolVersion);
    for (const auto* opt : cmd.get_options()) {
        auto name = opt->get_name();
        if (name == "--threads" || name == "--help" || name.rfind("--out", 0) == 0)
            continue;
        h.str(name);
        for (const auto& r : opt->results())
            h.str(r);
    }
    for (const auto& p : inputs)
        if (!p.empty())
            h.str(read_text_file(p));
    return hex64(h.digest());
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_text_file(path, text);
}

CellLibrary library(const std::string& path) { return path.empty() ? default_library() : load_library(path); }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bespoke printed-ML classifier synthesis and cross-approximation toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    std::string lib_path;
    unsigned threads = 1;
    std::uint64_t seed = 1;
    app.add_option("--library", lib_path, "Cell library JSON (default: built-in)");
    app.add_option("--threads", threads, "Worker threads")->check(CLI::Range(1u, 1024u));
    app.add_option("--seed", seed, "Master seed");

    // quantize
    auto* q_cmd = app.add_subcommand("quantize", "Quantize a trained model to fixed point");
    std::string q_model, q_out, q_data;
    FixedPointSpec q_spec;
    q_cmd->add_option("--model", q_model, "Trained model JSON")->required()->check(CLI::ExistingFile);
    q_cmd->add_option("--input-bits", q_spec.input_bits, "Input width");
    q_cmd->add_option("--coeff-bits", q_spec.coeff_bits, "Coefficient width");
    q_cmd->add_option("--data", q_data, "Dataset CSV to report accuracy on");
    q_cmd->add_option("--out", q_out, "Quantized model JSON")->required();

    // synth
    auto* s_cmd = app.add_subcommand("synth", "Synthesize a quantized model into a gate netlist");
    std::string s_model, s_out;
    double s_clock = 0.0;
    s_cmd->add_option("--quantized", s_model, "Quantized model JSON")->required()->check(CLI::ExistingFile);
    s_cmd->add_option("--clock", s_clock, "Clock period to record (default: critical path)");
    s_cmd->add_option("--out", s_out, "Netlist JSON")->required();

    // coeff-approx
    auto* c_cmd = app.add_subcommand("coeff-approx", "Hardware-driven coefficient approximation");
    std::string c_model, c_out, c_report;
    int c_e = 4;
    bool c_biases = false;
    c_cmd->add_option("--quantized", c_model, "Quantized model JSON")->required()->check(CLI::ExistingFile);
    c_cmd->add_option("--e", c_e, "Approximation radius")->check(CLI::NonNegativeNumber);
    c_cmd->add_flag("--approx-biases", c_biases, "Also move biases to cheaper values within e");
    c_cmd->add_option("--out", c_out, "Approximated model JSON")->required();
    c_cmd->add_option("--out-report", c_report, "Per-coefficient CSV");

    // profile
    auto* p_cmd = app.add_subcommand("profile", "Switching-activity profile of a netlist");
    std::string p_net, p_data, p_out;
    p_cmd->add_option("--netlist", p_net, "Netlist JSON")->required()->check(CLI::ExistingFile);
    p_cmd->add_option("--data", p_data, "Profiling dataset CSV")->required()->check(CLI::ExistingFile);
    p_cmd->add_option("--out", p_out, "Activity dump (- for stdout)");

    // prune
    auto* r_cmd = app.add_subcommand("prune", "Netlist pruning sweep or single pruned netlist");
    std::string r_net, r_train, r_test, r_tau_grid, r_phi = "auto", r_out, r_net_out;
    std::optional<double> r_tau;
    std::optional<int> r_phi_c;
    r_cmd->add_option("--netlist", r_net, "Netlist JSON")->required()->check(CLI::ExistingFile);
    r_cmd->add_option("--train", r_train, "Profiling dataset CSV")->required()->check(CLI::ExistingFile);
    r_cmd->add_option("--test", r_test, "Evaluation dataset CSV")->required()->check(CLI::ExistingFile);
    r_cmd->add_option("--tau-grid", r_tau_grid, "default | lo:hi:step | comma list");
    r_cmd->add_option("--phi", r_phi, "auto | comma list");
    r_cmd->add_option("--tau", r_tau, "Single tau_c (with --phi-c)");
    r_cmd->add_option("--phi-c", r_phi_c, "Single phi_c (with --tau)");
    r_cmd->add_option("--out", r_out, "Sweep CSV (- for stdout)");
    r_cmd->add_option("--out-netlist", r_net_out, "Pruned netlist JSON for --tau/--phi-c");

    // sta
    auto* t_cmd = app.add_subcommand("sta", "Static timing analysis");
    std::string t_net, t_out;
    double t_vdd = 1.0, t_clock = 0.0;
    t_cmd->add_option("--netlist", t_net, "Netlist JSON")->required()->check(CLI::ExistingFile);
    t_cmd->add_option("--vdd", t_vdd, "Supply voltage");
    t_cmd->add_option("--clock", t_clock, "Clock period (default: netlist clock)");
    t_cmd->add_option("--out", t_out, "Per-gate arrival CSV");

    // vos-sim
    auto* v_cmd = app.add_subcommand("vos-sim", "Voltage over-scaling aware simulation");
    std::string v_net, v_data, v_vdd = "grid", v_out;
    double v_clock = 0.0;
    std::size_t v_count = 100000;
    v_cmd->add_option("--netlist", v_net, "Netlist JSON")->required()->check(CLI::ExistingFile);
    v_cmd->add_option("--data", v_data, "Test dataset CSV")->required()->check(CLI::ExistingFile);
    v_cmd->add_option("--vdd", v_vdd, "grid | comma list of voltages");
    v_cmd->add_option("--clock", v_clock, "Clock period (default: netlist clock)");
    v_cmd->add_option("--stimuli-count", v_count, "Stimuli stream length");
    v_cmd->add_option("--out", v_out, "Accuracy-per-voltage CSV (- for stdout)");

    // power
    auto* w_cmd = app.add_subcommand("power", "Power estimation");
    std::string w_net, w_data, w_vdd = "grid", w_out;
    double w_clock = 0.0;
    w_cmd->add_option("--netlist", w_net, "Netlist JSON")->required()->check(CLI::ExistingFile);
    w_cmd->add_option("--data", w_data, "Activity dataset CSV")->required()->check(CLI::ExistingFile);
    w_cmd->add_option("--vdd", w_vdd, "grid | comma list of voltages");
    w_cmd->add_option("--clock", w_clock, "Clock period (default: netlist clock)");
    w_cmd->add_option("--out", w_out, "Power CSV (- for stdout)");

    // dse
    auto* d_cmd = app.add_subcommand("dse", "Battery-constrained design-space exploration");
    std::string d_net, d_exact, d_train, d_test, d_tau_grid, d_phi = "auto", d_battery = "molex-30mw",
                                                                  d_fitness = "nsga2", d_out;
    std::optional<int> d_epochs;
    std::size_t d_pop = 20, d_count = 100000;
    double d_loss = 0.05, d_cutoff = 0.20;
    d_cmd->add_option("--netlist", d_net, "Coefficient-approximated netlist JSON")->required()->check(CLI::ExistingFile);
    d_cmd->add_option("--exact", d_exact, "Exact netlist JSON (reference accuracy and clock)")
        ->required()
        ->check(CLI::ExistingFile);
    d_cmd->add_option("--train", d_train, "Profiling dataset CSV")->required()->check(CLI::ExistingFile);
    d_cmd->add_option("--test", d_test, "Test dataset CSV")->required()->check(CLI::ExistingFile);
    d_cmd->add_option("--tau-grid", d_tau_grid, "default | lo:hi:step | comma list");
    d_cmd->add_option("--phi", d_phi, "auto | comma list");
    d_cmd->add_option("--battery", d_battery, "molex-30mw | zinergy-15mw | bluespark-6mw");
    d_cmd->add_option("--epochs", d_epochs, "Epochs (default 4 for MLPs, 8 for SVMs)");
    d_cmd->add_option("--population", d_pop, "Population size");
    d_cmd->add_option("--loss-threshold", d_loss, "Accuracy-loss threshold T");
    d_cmd->add_option("--prune-cutoff", d_cutoff, "Design-space accuracy-loss cutoff");
    d_cmd->add_option("--stimuli-count", d_count, "VOS stimuli stream length");
    d_cmd->add_option("--fitness", d_fitness, "Fitness scheme")->check(CLI::IsMember({"nsga2"}));
    d_cmd->add_option("--out-dir", d_out, "Output directory")->required();

    // report
    auto* e_cmd = app.add_subcommand("report", "Summarize a pipeline run directory");
    std::string e_dir;
    e_cmd->add_option("--run-dir", e_dir, "Pipeline output directory")->required()->check(CLI::ExistingDirectory);

    // pipeline
    auto* l_cmd = app.add_subcommand("pipeline", "Run every stage end to end");
    std::string l_manifest, l_tau_grid, l_phi = "auto";
    RunManifest lm;
    std::optional<int> l_epochs;
    l_cmd->add_option("--manifest", l_manifest, "Run manifest JSON (flags override nothing)")->check(CLI::ExistingFile);
    l_cmd->add_option("--model", lm.model_path, "Trained model JSON");
    l_cmd->add_option("--train", lm.train_path, "Training dataset CSV");
    l_cmd->add_option("--test", lm.test_path, "Test dataset CSV");
    l_cmd->add_option("--input-bits", lm.spec.input_bits, "Input width");
    l_cmd->add_option("--coeff-bits", lm.spec.coeff_bits, "Coefficient width");
    l_cmd->add_option("--e", lm.e, "Approximation radius")->check(CLI::NonNegativeNumber);
    l_cmd->add_flag("--approx-biases", lm.approx_biases, "Also approximate biases");
    l_cmd->add_option("--tau-grid", l_tau_grid, "default | lo:hi:step | comma list");
    l_cmd->add_option("--phi", l_phi, "auto | comma list");
    l_cmd->add_option("--battery", lm.battery, "molex-30mw | zinergy-15mw | bluespark-6mw");
    l_cmd->add_option("--epochs", l_epochs, "Epochs (default 4 for MLPs, 8 for SVMs)");
    l_cmd->add_option("--population", lm.population, "Population size");
    l_cmd->add_option("--loss-threshold", lm.loss_threshold, "Accuracy-loss threshold T");
    l_cmd->add_option("--prune-cutoff", lm.prune_loss_cutoff, "Design-space accuracy-loss cutoff");
    l_cmd->add_option("--stimuli-count", lm.stimuli_count, "VOS stimuli stream length");
    l_cmd->add_option("--fitness", lm.fitness, "Fitness scheme")->check(CLI::IsMember({"nsga2"}));
    l_cmd->add_option("--out-dir", lm.output_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    const char* current = "cli";
    try {
        if (q_cmd->parsed()) {
            current = "quantize";
            auto m = quantize(load_model(q_model), q_spec);
            write_text_file(q_out, to_json(m).dump(2) + "\n");
            fmt::print("quantized {} model: {} coefficients, exponent {}\n", to_string(m.kind), m.coefficient_count(),
                       m.coeff_exponent);
            if (!q_data.empty())
                fmt::print("accuracy {:.4f}\n", model_accuracy(m, load_dataset(q_data, q_spec.input_bits)));
        } else if (s_cmd->parsed()) {
            current = "synth";
            auto lib = library(lib_path);
            auto n = synth_model(quantized_from_json(nlohmann::json::parse(read_text_file(s_model))), lib);
            n.meta.clock_period = s_clock > 0.0 ? s_clock : critical_path(n, lib);
            save_netlist(n, s_out);
            fmt::print("{} gates, area {:.2f}, critical path {:.4f}\n", n.gates().size(), area_of(n, lib),
                       critical_path(n, lib));
        } else if (c_cmd->parsed()) {
            current = "coeff-approx";
            auto lib = library(lib_path);
            auto m = quantized_from_json(nlohmann::json::parse(read_text_file(c_model)));
            auto r = approximate_model(m, {c_e, c_biases, threads}, lib);
            write_text_file(c_out, to_json(r.model).dump(2) + "\n");
            if (!c_report.empty())
                write_text_file(c_report, approx_report_csv(r, command_hash(*c_cmd, {c_model, lib_path})));
            fmt::print("proxy area {:.2f} -> {:.2f}\n", r.proxy_area_before, r.proxy_area_after);
        } else if (p_cmd->parsed()) {
            current = "profile";
            auto n = load_netlist(p_net);
            emit(p_out, activity_dump(profile(n, load_dataset(p_data, 4, Split::Train).features, threads)));
        } else if (r_cmd->parsed()) {
            current = "prune";
            auto lib = library(lib_path);
            auto n = load_netlist(r_net);
            auto prof = profile(n, load_dataset(r_train, 4, Split::Train).features, threads);
            auto test = load_dataset(r_test);
            if (r_tau.has_value() != r_phi_c.has_value())
                throw Error("--tau and --phi-c go together");
            if (r_tau) {
                auto pr = prune(n, prof, compute_phi(n), {*r_tau, *r_phi_c}, &lib);
                fmt::print("pruned {} gates: {} -> {} gates, accuracy {:.4f}\n", pr.pruned, n.gates().size(),
                           pr.netlist.gates().size(), evaluate_accuracy(pr.netlist, test).accuracy);
                if (!r_net_out.empty())
                    save_netlist(pr.netlist, r_net_out);
            } else {
                auto rows = prune_sweep(n, prof, lib, parse_tau_grid(r_tau_grid), test, threads, parse_phi(r_phi));
                emit(r_out, sweep_csv(rows, command_hash(*r_cmd, {r_net, r_train, r_test, lib_path})));
            }
        } else if (t_cmd->parsed()) {
            current = "sta";
            auto lib = library(lib_path);
            auto n = load_netlist(t_net);
            auto t = sta(n, lib, t_vdd, t_clock);
            fmt::print("critical path {:.4f}, clock {:.4f}, slack {:.4f}\n", t.critical_path, t.clock_period,
                       t.slack);
            if (!t_out.empty())
                emit(t_out, timing_report_csv(n, t, command_hash(*t_cmd, {t_net, lib_path})));
        } else if (v_cmd->parsed()) {
            current = "vos-sim";
            auto lib = library(lib_path);
            auto n = load_netlist(v_net);
            auto st = build_vos_stimuli(load_dataset(v_data), v_count, sub_seed(seed, "vos"));
            DecisionTrace trace(n, st.vectors, threads);
            auto hash = command_hash(*v_cmd, {v_net, v_data, lib_path});
            std::string csv = "manifest_hash,v_dd,stale_bits,accuracy\n";
            for (double v : parse_voltages(v_vdd, lib)) {
                auto stale = stale_decision_bits(n, sta(n, lib, v, v_clock));
                csv += fmt::format("{},{:.2f},{},{:.6f}\n", hash, v, std::count(stale.begin(), stale.end(), true),
                                   trace.accuracy(stale, st.labels));
            }
            emit(v_out, csv);
        } else if (w_cmd->parsed()) {
            current = "power";
            auto lib = library(lib_path);
            auto n = load_netlist(w_net);
            auto prof = profile(n, load_dataset(w_data).features, threads);
            double clock = w_clock > 0.0 ? w_clock : (n.meta.clock_period > 0.0 ? n.meta.clock_period
                                                                               : critical_path(n, lib));
            auto hash = command_hash(*w_cmd, {w_net, w_data, lib_path});
            std::string csv = "manifest_hash,v_dd,p_static,p_dynamic,p_total\n";
            for (double v : parse_voltages(w_vdd, lib)) {
                auto p = power(n, prof, lib, v, clock);
                csv += fmt::format("{},{:.2f},{:.6f},{:.6f},{:.6f}\n", hash, v, p.p_static, p.p_dynamic, p.p_total);
            }
            emit(w_out, csv);
        } else if (d_cmd->parsed()) {
            current = "dse";
            auto lib = library(lib_path);
            auto cax = load_netlist(d_net);
            auto exact = load_netlist(d_exact);
            auto train = load_dataset(d_train, 4, Split::Train);
            auto test = load_dataset(d_test);
            auto battery = battery_preset(d_battery);
            if (exact.meta.clock_period <= 0.0)
                exact.meta.clock_period = critical_path(exact, lib);
            cax.meta.clock_period = exact.meta.clock_period;
            GaConfig cfg;
            cfg.lambda = d_pop;
            cfg.epochs = d_epochs.value_or(default_epochs(parse_model_kind(exact.meta.model_kind)));
            cfg.loss_threshold = d_loss;
            cfg.prune_loss_cutoff = d_cutoff;
            cfg.seed = sub_seed(seed, "dse");
            cfg.validate();
            auto st = build_vos_stimuli(test, d_count, sub_seed(seed, "vos"));
            double fast_ref = evaluate_accuracy(exact, test).accuracy;
            double vos_ref = DecisionTrace(exact, st.vectors, threads)
                                 .accuracy(std::vector<bool>(exact.outputs()[exact.decision_bus()].bits.size()),
                                           st.labels);
            DesignSpace space(cax, lib, train.features, test, parse_tau_grid(d_tau_grid), threads, parse_phi(d_phi));
            auto reduced = prune_space(space, battery, fast_ref, cfg.prune_loss_cutoff);
            fmt::print("design space: {} grid points, {} chromosomes, {} survive pruning\n", space.points().size(),
                       space.size(), reduced.candidates.size());
            Evaluator eval(space, st, battery, vos_ref, cfg.loss_threshold, threads);
            auto pop = pop_init(space, reduced, battery, fast_ref, cfg);
            auto r = evolve(space, reduced, pop, cfg, battery, fast_ref, eval);
            auto hash = command_hash(*d_cmd, {d_net, d_exact, d_train, d_test, lib_path});
            std::filesystem::create_directories(d_out);
            write_text_file(d_out + "/dse_archive.json", archive_json(r, battery, cfg, hash).dump(2) + "\n");
            write_text_file(d_out + "/pareto.csv", pareto_csv(r.archive, hash));
            fmt::print("{} evaluations, {} designs archived\n", r.evaluations, r.archive.size());
        } else if (e_cmd->parsed()) {
            current = "report";
            std::cout << render_report(nlohmann::json::parse(read_text_file(e_dir + "/summary.json")));
        } else if (l_cmd->parsed()) {
            current = "pipeline";
            RunManifest m = lm;
            if (!l_manifest.empty()) {
                m = manifest_from_json(nlohmann::json::parse(read_text_file(l_manifest)));
                if (!lm.output_dir.empty())
                    m.output_dir = lm.output_dir;
            } else {
                m.tau_grid = parse_tau_grid(l_tau_grid);
                m.phi_list = parse_phi(l_phi);
                m.epochs = l_epochs;
            }
            if (app.count("--seed") || l_manifest.empty())
                m.seed = seed;
            m.threads = threads;
            m.library_path = lib_path.empty() ? m.library_path : lib_path;
            auto s = run_pipeline(m);
            std::cout << render_report(s.to_json());
        }
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStage;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: [" << current << "] " << e.what() << "\n";
        return kExitStage;
    }
    return 0;
}
