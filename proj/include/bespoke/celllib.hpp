#pragma once

#include "bespoke/util.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bespoke {

enum class CellFunction : std::uint8_t { Inv, Nand2, Nor2, And2, Or2, Xor2, Xnor2, Mux2, Buf, Tie0, Tie1 };

inline constexpr std::size_t kCellFunctionCount = 11;
inline constexpr std::array<CellFunction, kCellFunctionCount> kAllCellFunctions = {
    CellFunction::Inv,   CellFunction::Nand2, CellFunction::Nor2, CellFunction::And2,
    CellFunction::Or2,   CellFunction::Xor2,  CellFunction::Xnor2, CellFunction::Mux2,
    CellFunction::Buf,   CellFunction::Tie0,  CellFunction::Tie1};

std::string_view cell_function_name(CellFunction f);
std::optional<CellFunction> parse_cell_function(std::string_view name);
int cell_arity(CellFunction f);

/// Bitwise evaluation over 64 lanes. MUX2 pins are (select, in0, in1).
inline std::uint64_t eval_cell(CellFunction f, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    switch (f) {
    case CellFunction::Inv: return ~a;
    case CellFunction::Nand2: return ~(a & b);
    case CellFunction::Nor2: return ~(a | b);
    case CellFunction::And2: return a & b;
    case CellFunction::Or2: return a | b;
    case CellFunction::Xor2: return a ^ b;
    case CellFunction::Xnor2: return ~(a ^ b);
    case CellFunction::Mux2: return (a & c) | (~a & b);
    case CellFunction::Buf: return a;
    case CellFunction::Tie0: return 0;
    case CellFunction::Tie1: return ~std::uint64_t{0};
    }
    return 0;
}

struct Cell {
    std::string name;
    CellFunction function = CellFunction::Inv;
    double area = 0.0;
    double intrinsic_delay = 0.0;
    double input_capacitance = 0.0;
    double leakage = 0.0;

    bool operator==(const Cell&) const = default;
};

struct VoltageModel {
    double v_nominal = 1.0;
    double v_min = 0.6;
    double v_step = 0.02;
    double v_threshold = 0.3;
    double alpha = 1.3;

    void validate() const;
    /// Grid voltages from v_min to v_nominal inclusive, ascending.
    std::vector<double> grid() const;
    std::size_t grid_size() const;
    double grid_voltage(std::size_t index) const;
    /// Index of v on the grid; throws when v is off-grid.
    std::size_t grid_index(double v) const;

    bool operator==(const VoltageModel&) const = default;
};

/// Alpha-power-law delay factor relative to the nominal supply.
double delay_scale(const VoltageModel& vm, double v);

class CellLibrary {
public:
    CellLibrary(std::string name, std::vector<Cell> cells, VoltageModel voltage, double wire_capacitance,
                double output_load, std::string units);

    const std::string& name() const { return name_; }
    const Cell& cell(CellFunction f) const { return cells_[static_cast<std::size_t>(f)]; }
    const std::vector<Cell>& cells() const { return ordered_; }
    const VoltageModel& voltage() const { return voltage_; }
    double wire_capacitance() const { return wire_capacitance_; }
    double output_load() const { return output_load_; }
    const std::string& units() const { return units_; }

    bool operator==(const CellLibrary& other) const;

private:
    std::string name_;
    std::vector<Cell> ordered_;
    std::array<Cell, kCellFunctionCount> cells_{};
    VoltageModel voltage_;
    double wire_capacitance_ = 0.0;
    double output_load_ = 0.0;
    std::string units_;
};

CellLibrary default_library();
CellLibrary library_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const CellLibrary& lib);
CellLibrary load_library(const std::string& path);
void save_library(const CellLibrary& lib, const std::string& path);

} // namespace bespoke
