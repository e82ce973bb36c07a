#pragma once

#include "bespoke/celllib.hpp"
#include "bespoke/logicsim.hpp"
#include "bespoke/netlist.hpp"
#include "bespoke/power.hpp"
#include "bespoke/pruner.hpp"
#include "bespoke/timing.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace bespoke {

struct Battery {
    std::string name;
    double p_bat = 0.0;  // mW
};

/// molex-30mw, zinergy-15mw, bluespark-6mw
Battery battery_preset(const std::string& name);
std::vector<Battery> battery_presets();

/// Genes are indices: tau on the tau grid, phi into {no-prune} ++ Phi_tau
/// (0 = no pruning), v on the voltage grid.
struct Chromosome {
    int tau = 0;
    int phi = 0;
    int v = 0;

    auto operator<=>(const Chromosome&) const = default;
};

struct GaConfig {
    std::size_t lambda = 20;
    int epochs = 4;
    /// T, accuracy-loss threshold (absolute fraction)
    double loss_threshold = 0.05;
    std::uint64_t seed = 1;
    double prune_loss_cutoff = 0.20;
    double mutation_rate = 1.0 / 3.0;

    void validate() const;
};

/// Default epoch count: 4 for MLPs, 8 for SVMs.
int default_epochs(ModelKind kind);

/// One (tau_c, phi_c) point evaluated at nominal voltage with zero-delay
/// simulation.
struct GridPoint {
    int tau = 0;
    int phi = 0;
    double tau_c = 1.0;
    std::optional<int> phi_c;  // none = no pruning
    std::size_t gates = 0;
    double area = 0.0;
    double accuracy = 0.0;       // fast estimate
    double critical_path = 0.0;  // nominal
    PowerReport power;           // at v_nominal, profiling-set activity
};

/// The pruned variants of one coefficient-approximated netlist over a
/// (tau_c, Phi_tau) grid. Variants are built once and shared by the fast
/// grid evaluation and the VOS-aware evaluator.
class DesignSpace {
public:
    /// `base` must carry the iso-frequency clock in meta.clock_period.
    /// Activity for pruning comes from `profiling`; fast accuracy from `fast_eval`.
    DesignSpace(Netlist base, const CellLibrary& lib, const VectorSet& profiling, const Dataset& fast_eval,
                std::vector<double> tau_grid, unsigned threads = 1,
                const std::optional<std::vector<int>>& phi_only = std::nullopt);

    const CellLibrary& library() const { return lib_; }
    const Netlist& base() const { return base_; }
    double clock_period() const { return clock_; }
    const std::vector<double>& tau_grid() const { return tau_grid_; }
    const std::vector<double>& voltages() const { return voltages_; }
    /// Phi gene range for a tau index: 1 + |Phi_tau|.
    int phi_count(int tau) const { return static_cast<int>(phi_sets_[static_cast<std::size_t>(tau)].size()) + 1; }
    std::optional<int> phi_value(int tau, int phi) const;
    const GridPoint& point(int tau, int phi) const;
    const std::vector<GridPoint>& points() const { return points_; }
    const Netlist& variant(int tau, int phi) const;
    /// Index into points() / variants for a (tau, phi) gene pair.
    std::size_t point_index(int tau, int phi) const;
    bool valid(const Chromosome& c) const;
    /// Total number of chromosomes.
    std::size_t size() const { return points_.size() * voltages_.size(); }
    std::vector<Chromosome> all_chromosomes() const;

private:
    Netlist base_;
    const CellLibrary& lib_;
    double clock_ = 0.0;
    std::vector<double> tau_grid_;
    std::vector<double> voltages_;
    std::vector<std::vector<int>> phi_sets_;
    std::vector<std::size_t> offsets_;
    std::vector<GridPoint> points_;
    std::vector<Netlist> variants_;
};

struct ReducedSpace {
    /// Chromosomes whose grid point loses <= cutoff accuracy and whose
    /// analytically rescaled power fits the battery.
    std::vector<Chromosome> candidates;
    std::size_t grid_points = 0;
    std::size_t accuracy_survivors = 0;
};

/// `reference` is the exact design's fast accuracy.
ReducedSpace prune_space(const DesignSpace& space, const Battery& battery, double reference, double cutoff);

/// Pre-screen for initial members and offspring: fast accuracy loss <= T
/// and the nominal power, rescaled to the chromosome's voltage, within the
/// battery.
bool screen(const DesignSpace& space, const Chromosome& c, const Battery& battery, double reference, double t);

std::vector<Chromosome> pop_init(const DesignSpace& space, const ReducedSpace& reduced, const Battery& battery,
                                 double reference, const GaConfig& cfg);

struct EvaluatedDesign {
    Chromosome chromosome;
    double tau_c = 1.0;
    std::optional<int> phi_c;
    double v_dd = 1.0;
    double accuracy = 0.0;  // VOS-aware
    double accuracy_loss = 0.0;
    double area = 0.0;
    double p_total = 0.0;
    double p_dynamic = 0.0;
    double p_static = 0.0;
    std::size_t gates = 0;
    bool feasible = false;
};

/// VOS-aware evaluation: accuracy over the stimuli stream with late
/// decision bits capturing stale values at the design's clock, power from
/// stimuli activity. Results are cached per chromosome.
class Evaluator {
public:
    /// `reference` is the exact design's accuracy on the same stimuli.
    Evaluator(const DesignSpace& space, const VosStimuli& stimuli, const Battery& battery, double reference,
              double loss_threshold, unsigned threads = 1);

    EvaluatedDesign evaluate(const Chromosome& c);
    std::vector<EvaluatedDesign> evaluate(const std::vector<Chromosome>& cs);
    std::size_t evaluations() const { return cache_.size(); }
    double reference() const { return reference_; }

private:
    struct Variant {
        std::unique_ptr<DecisionTrace> trace;
        PowerReport nominal;
    };
    const Variant& variant(std::size_t point);
    EvaluatedDesign compute(const Chromosome& c);

    const DesignSpace& space_;
    const VosStimuli& stimuli_;
    Battery battery_;
    double reference_;
    double loss_threshold_;
    unsigned threads_;
    std::mutex mutex_;
    std::map<std::size_t, Variant> variants_;
    std::map<Chromosome, EvaluatedDesign> cache_;
};

/// a dominates b: accuracy >=, area <=, power <=, one strictly.
bool dominates(const EvaluatedDesign& a, const EvaluatedDesign& b);

/// Indices of the non-dominated members, ascending.
std::vector<std::size_t> pareto_front(const std::vector<EvaluatedDesign>& designs);

/// Non-dominated feasible designs with identical objective vectors collapsed
/// to the first occurrence, ordered by chromosome.
std::vector<EvaluatedDesign> feasible_front(const std::vector<EvaluatedDesign>& designs);

struct DseResult {
    std::vector<EvaluatedDesign> archive;
    std::vector<EvaluatedDesign> final_population;
    std::vector<double> best_accuracy_per_epoch;  // best feasible, index 0 = initial
    std::size_t evaluations = 0;
};

/// NSGA-II: binary tournaments on (rank, crowding), one-point crossover,
/// per-gene uniform mutation, screened offspring, elitist (mu + lambda)
/// reduction under constrained domination.
DseResult evolve(const DesignSpace& space, const ReducedSpace& reduced, const std::vector<Chromosome>& population,
                 const GaConfig& cfg, const Battery& battery, double fast_reference, Evaluator& evaluator);

/// Points are minimized objective triples (-accuracy, area, power); the
/// dominated volume up to `ref`, exact.
double hypervolume(std::vector<std::array<double, 3>> points, const std::array<double, 3>& ref);
std::array<double, 3> objectives(const EvaluatedDesign& d);

nlohmann::json archive_json(const DseResult& r, const Battery& battery, const GaConfig& cfg,
                            const std::string& manifest_hash);
std::string pareto_csv(const std::vector<EvaluatedDesign>& front, const std::string& manifest_hash);

} // namespace bespoke
