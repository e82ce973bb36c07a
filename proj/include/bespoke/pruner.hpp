#pragma once

#include "bespoke/celllib.hpp"
#include "bespoke/logicsim.hpp"
#include "bespoke/netlist.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bespoke {

struct GateSignificance {
    std::uint64_t fingerprint = 0;
    /// Highest significance-bus bit reachable from each gate, -1 if none.
    std::vector<int> phi;
};

GateSignificance compute_phi(const Netlist& n);

struct PruneConfig {
    double tau_c = 1.0;
    int phi_c = -1;
};

/// Default tau_c grid: 0.80, 0.81, ..., 0.99.
std::vector<double> default_tau_grid();

/// Datapath gates with tau >= tau_c and phi <= phi_c.
std::vector<GateId> prune_candidates(const Netlist& n, const ActivityProfile& prof, const GateSignificance& sig,
                                     const PruneConfig& cfg);

struct PruneResult {
    Netlist netlist;
    std::size_t pruned = 0;  // gates tied to their dominant value before propagation
};

/// Ties each candidate to its dominant value, then constant-propagates.
PruneResult prune(const Netlist& n, const ActivityProfile& prof, const GateSignificance& sig, const PruneConfig& cfg,
                  const CellLibrary* lib = nullptr);

/// Sorted unique phi among datapath gates with tau >= tau_c, optionally
/// restricted to the values in `only`.
std::vector<int> phi_grid(const Netlist& n, const ActivityProfile& prof, const GateSignificance& sig, double tau_c,
                          const std::optional<std::vector<int>>& only = std::nullopt);

struct SweepRow {
    double tau_c = 0.0;
    int phi_c = -1;
    std::size_t gates_pruned = 0;
    std::size_t gates = 0;
    double area = 0.0;
    double accuracy = 0.0;
    double critical_path = 0.0;
};

/// Every (tau_c, phi_c in Phi_tau) point: zero-delay accuracy on `eval`, area
/// and nominal critical path of the pruned netlist.
std::vector<SweepRow> prune_sweep(const Netlist& n, const ActivityProfile& prof, const CellLibrary& lib,
                                  const std::vector<double>& tau_grid, const Dataset& eval, unsigned threads = 1,
                                  const std::optional<std::vector<int>>& phi_only = std::nullopt);

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& manifest_hash);

} // namespace bespoke
