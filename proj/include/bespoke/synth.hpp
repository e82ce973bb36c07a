#pragma once

#include "bespoke/celllib.hpp"
#include "bespoke/model.hpp"
#include "bespoke/netlist.hpp"

#include <cstdint>
#include <vector>

namespace bespoke {

struct CsdDigit {
    int shift = 0;
    int sign = 1;
    bool operator==(const CsdDigit&) const = default;
};

struct CsdForm {
    std::vector<CsdDigit> digits;  // ascending shift
    std::int64_t value = 0;
};

CsdForm csd_decompose(std::int64_t w);

/// Bespoke multiplier BM_w. The network computes |w| * x; the sign of w is
/// absorbed by the adder tree that consumes it (subtraction instead of
/// addition), so BM_w and BM_-w are the same circuit.
struct Multiplier {
    Netlist netlist;  // input bus "x", output bus "p"
    double area = 0.0;
    bool negative = false;
};

Multiplier synth_multiplier(std::int64_t w, int input_bits, const CellLibrary& lib);

/// Area of BM_w for every w in [lo, hi], indexed by w - lo.
std::vector<double> multiplier_area_table(std::int64_t lo, std::int64_t hi, int input_bits, const CellLibrary& lib,
                                          unsigned threads = 1);

/// One weighted sum S = sum w_i x_i + bias over unsigned inputs x0..x{N-1}
/// of `input_bits` each; output bus "S".
Netlist synth_weighted_sum(std::span<const std::int64_t> weights, std::int64_t bias, int input_bits,
                           const CellLibrary& lib);

/// Full bespoke circuit for a quantized model.
///
/// Output buses: one significance bus per output-layer weighted sum (O_i for
/// MLP-C, S_i_j for SVM-C pairs, S for regressors) at the layer's accumulator
/// width, and a decision bus "class" (class index) or "label" (label minus
/// the smallest label).
Netlist synth_model(const QuantizedModel& m, const CellLibrary& lib);

double area_of(const Netlist& n, const CellLibrary& lib);

} // namespace bespoke
