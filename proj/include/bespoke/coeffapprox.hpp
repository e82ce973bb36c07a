#pragma once

#include "bespoke/celllib.hpp"
#include "bespoke/model.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace bespoke {

/// AREA(BM_w) for every representable coefficient, per multiplier input width.
class AreaTable {
public:
    AreaTable(const CellLibrary& lib, int coeff_bits, unsigned threads = 1);

    /// Synthesizes the table for an input width if not present yet. Not
    /// thread-safe; call before sharing the table across workers.
    void prepare(int input_bits);
    double area(std::int64_t w, int input_bits) const;
    std::int64_t lo() const { return lo_; }
    std::int64_t hi() const { return hi_; }

private:
    const CellLibrary& lib_;
    std::int64_t lo_, hi_;
    unsigned threads_;
    std::map<int, std::vector<double>> tables_;
};

struct Candidate {
    std::int64_t value = 0;
    double area = 0.0;
};

/// R_i = {minus, plus}: minus is area-minimal in [w, w+e] (error w - w~ <= 0),
/// plus is area-minimal in [w-e, w] (error >= 0). Segments are clipped to the
/// coefficient range.
struct CoefficientCandidates {
    std::int64_t w = 0;
    double area_w = 0.0;
    Candidate minus;
    Candidate plus;
};

struct CandidateSet {
    int radius = 0;
    std::vector<CoefficientCandidates> items;
};

CandidateSet build_candidates(std::span<const std::int64_t> weights, int e, int input_bits, const AreaTable& table);

struct ApproxAssignment {
    std::vector<std::int64_t> values;
    std::int64_t residual = 0;  // sum of (w_i - w~_i)
    double area = 0.0;          // sum of AREA(BM_w~_i)
    bool exhaustive = true;     // false when the greedy fallback ran
};

/// Exhaustive search over prod R_i minimizing |sum(w_i - w~_i)|, then total
/// area, then the lexicographically smallest value vector. Falls back to a
/// greedy balance when 2^N exceeds 2^max_log2.
ApproxAssignment assign(const CandidateSet& cands, int max_log2 = 24);

struct ApproxRow {
    int layer = 0;
    int neuron = 0;
    int input = 0;  // -1 for the bias
    std::int64_t w = 0;
    std::int64_t w_approx = 0;
    double area_w = 0.0;
    double area_w_approx = 0.0;
};

struct ApproxResult {
    QuantizedModel model;
    std::vector<ApproxRow> rows;
    /// residual per weighted sum, [layer][neuron]
    std::vector<std::vector<std::int64_t>> residuals;
    double proxy_area_before = 0.0;
    double proxy_area_after = 0.0;
};

struct ApproxOptions {
    int e = 4;
    /// Biases are left exact unless set; when set each bias moves to the
    /// value within +-e with the fewest nonzero CSD digits (closest first).
    bool approx_biases = false;
    unsigned threads = 1;
};

ApproxResult approximate_model(const QuantizedModel& m, const ApproxOptions& opt, const CellLibrary& lib);
ApproxResult approximate_model(const QuantizedModel& m, const ApproxOptions& opt, AreaTable& table);

/// Sum of AREA(BM_w) over all multiplicative coefficients.
double proxy_area(const QuantizedModel& m, AreaTable& table);

std::string approx_report_csv(const ApproxResult& r, const std::string& manifest_hash);

} // namespace bespoke
