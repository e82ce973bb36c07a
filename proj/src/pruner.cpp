#include "bespoke/pruner.hpp"
#include "bespoke/synth.hpp"
#include "bespoke/timing.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace bespoke {

GateSignificance compute_phi(const Netlist& n) {
    GateSignificance sig;
    sig.fingerprint = n.fingerprint();
    auto cones = all_cone_bits(n);
    sig.phi.assign(n.gates().size(), -1);
    for (GateId g = 0; g < n.gates().size(); ++g)
        for (std::size_t b = 0; b < n.outputs().size(); ++b)
            if (n.outputs()[b].role == BusRole::Significance)
                sig.phi[g] = std::max(sig.phi[g], cones[g][b]);
    return sig;
}

std::vector<double> default_tau_grid() {
    std::vector<double> grid;
    for (int bp = 8000; bp <= 9900; bp += 100)
        grid.push_back(bp / 10000.0);
    return grid;
}

namespace {

void check_revision(const Netlist& n, const ActivityProfile& prof, const GateSignificance& sig) {
    auto fp = n.fingerprint();
    if (prof.fingerprint != fp || prof.gates() != n.gates().size())
        throw Error("activity profile is stale for this netlist revision");
    if (sig.fingerprint != fp || sig.phi.size() != n.gates().size())
        throw Error("gate significance is stale for this netlist revision");
}

} // namespace

std::vector<GateId> prune_candidates(const Netlist& n, const ActivityProfile& prof, const GateSignificance& sig,
                                     const PruneConfig& cfg) {
    check_revision(n, prof, sig);
    std::vector<GateId> out;
    for (GateId g = 0; g < n.gates().size(); ++g)
        if (n.gate(g).region == GateRegion::Datapath && sig.phi[g] <= cfg.phi_c && prof.tau_at_least(g, cfg.tau_c))
            out.push_back(g);
    return out;
}

PruneResult prune(const Netlist& n, const ActivityProfile& prof, const GateSignificance& sig, const PruneConfig& cfg,
                  const CellLibrary* lib) {
    auto cands = prune_candidates(n, prof, sig, cfg);
    std::vector<ConstantOverride> ties;
    ties.reserve(cands.size());
    for (GateId g : cands)
        ties.push_back({g, prof.dominant(g)});
    PruneResult r;
    r.pruned = cands.size();
    r.netlist = const_propagate(n, lib, ties);
    return r;
}

std::vector<int> phi_grid(const Netlist& n, const ActivityProfile& prof, const GateSignificance& sig, double tau_c,
                          const std::optional<std::vector<int>>& only) {
    check_revision(n, prof, sig);
    std::vector<int> out;
    for (GateId g = 0; g < n.gates().size(); ++g)
        if (n.gate(g).region == GateRegion::Datapath && prof.tau_at_least(g, tau_c))
            out.push_back(sig.phi[g]);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (only)
        std::erase_if(out, [&](int p) { return std::find(only->begin(), only->end(), p) == only->end(); });
    return out;
}

std::vector<SweepRow> prune_sweep(const Netlist& n, const ActivityProfile& prof, const CellLibrary& lib,
                                  const std::vector<double>& tau_grid, const Dataset& eval, unsigned threads,
                                  const std::optional<std::vector<int>>& phi_only) {
    auto sig = compute_phi(n);
    std::vector<SweepRow> rows;
    for (double tau : tau_grid)
        for (int phi : phi_grid(n, prof, sig, tau, phi_only))
            rows.push_back({tau, phi, 0, 0, 0.0, 0.0, 0.0});
    parallel_for(rows.size(), threads, [&](std::size_t i) {
        auto& row = rows[i];
        auto r = prune(n, prof, sig, {row.tau_c, row.phi_c}, &lib);
        row.gates_pruned = r.pruned;
        row.gates = r.netlist.gates().size();
        row.area = area_of(r.netlist, lib);
        row.accuracy = evaluate_accuracy(r.netlist, eval).accuracy;
        row.critical_path = critical_path(r.netlist, lib);
    });
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& manifest_hash) {
    std::string out = "manifest_hash,tau_c,phi_c,gates_pruned,gates,area,accuracy,critical_path\n";
    for (const auto& r : rows)
        out += fmt::format("{},{:.2f},{},{},{},{:.4f},{:.6f},{:.6f}\n", manifest_hash, r.tau_c, r.phi_c, r.gates_pruned,
                           r.gates, r.area, r.accuracy, r.critical_path);
    return out;
}

} // namespace bespoke
