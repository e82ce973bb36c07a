#pragma once

#include "bespoke/dse.hpp"
#include "bespoke/model.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace bespoke {

inline constexpr const char* kToolVersion = "0.1.0";

/// Error raised by a pipeline stage; what() carries the "[stage] " prefix.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message);
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct RunManifest {
    std::string model_path;
    std::string train_path;
    std::string test_path;
    std::string library_path;  // empty = built-in default library
    std::uint64_t seed = 1;
    FixedPointSpec spec;
    int e = 4;
    bool approx_biases = false;
    std::vector<double> tau_grid;  // empty = default grid
    std::optional<std::vector<int>> phi_list;  // none = auto (Phi_tau)
    std::string battery = "molex-30mw";
    std::optional<int> epochs;  // none = per model kind
    std::size_t population = 20;
    double loss_threshold = 0.05;
    double prune_loss_cutoff = 0.20;
    std::size_t stimuli_count = 100000;
    std::string fitness = "nsga2";
    std::string output_dir;
    unsigned threads = 1;

    void validate() const;
    nlohmann::json to_json() const;
    /// Hash over every field except threads and output_dir, plus the
    /// contents of the input files.
    std::string hash() const;
};

RunManifest manifest_from_json(const nlohmann::json& doc);

struct PipelineSummary {
    std::string manifest_hash;
    std::string model_kind;
    double exact_accuracy = 0.0;  // zero-delay, test set
    double exact_area = 0.0;
    double exact_power = 0.0;     // nominal, stimuli activity
    double clock_period = 0.0;    // exact design critical path
    double cax_accuracy = 0.0;
    double cax_area = 0.0;
    double cax_power = 0.0;
    double cax_critical_path = 0.0;
    std::size_t grid_points = 0;
    std::size_t reduced_space = 0;
    std::size_t full_space = 0;
    std::size_t evaluations = 0;
    std::size_t archive_size = 0;
    /// Lowest-power design with loss <= T among pruning-only (exact
    /// coefficients, nominal voltage) and among the DSE archive.
    std::optional<EvaluatedDesign> pruning_only;
    std::optional<EvaluatedDesign> cross;

    nlohmann::json to_json() const;
};

/// quantize -> synth -> coeff-approx -> profile -> prune-sweep -> sta -> vos
/// -> power -> dse, writing each stage's artifact into output_dir.
PipelineSummary run_pipeline(const RunManifest& m);

/// Human-readable summary of a pipeline output directory.
std::string render_report(const nlohmann::json& summary);

} // namespace bespoke
