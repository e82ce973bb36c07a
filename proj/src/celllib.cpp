#include "bespoke/celllib.hpp"

#include <fmt/format.h>

#include <cmath>
#include <set>

namespace bespoke {

namespace {

constexpr std::array<std::string_view, kCellFunctionCount> kNames = {
    "INV", "NAND2", "NOR2", "AND2", "OR2", "XOR2", "XNOR2", "MUX2", "BUF", "TIE0", "TIE1"};

std::int64_t to_microvolts(double v) { return std::llround(v * 1e6); }

} // namespace

std::string_view cell_function_name(CellFunction f) { return kNames[static_cast<std::size_t>(f)]; }

std::optional<CellFunction> parse_cell_function(std::string_view name) {
    for (std::size_t i = 0; i < kNames.size(); ++i)
        if (kNames[i] == name)
            return static_cast<CellFunction>(i);
    return std::nullopt;
}

int cell_arity(CellFunction f) {
    switch (f) {
    case CellFunction::Inv:
    case CellFunction::Buf: return 1;
    case CellFunction::Mux2: return 3;
    case CellFunction::Tie0:
    case CellFunction::Tie1: return 0;
    default: return 2;
    }
}

void VoltageModel::validate() const {
    if (!(v_threshold >= 0.0 && v_min > v_threshold && v_nominal >= v_min && v_step > 0.0 && alpha > 0.0))
        throw Error("voltage model needs 0 <= v_threshold < v_min <= v_nominal, v_step > 0, alpha > 0");
    auto span = to_microvolts(v_nominal) - to_microvolts(v_min);
    if (span % to_microvolts(v_step) != 0)
        throw Error("voltage grid step does not divide [v_min, v_nominal]");
}

std::size_t VoltageModel::grid_size() const {
    return static_cast<std::size_t>((to_microvolts(v_nominal) - to_microvolts(v_min)) / to_microvolts(v_step)) + 1;
}

double VoltageModel::grid_voltage(std::size_t index) const {
    if (index >= grid_size())
        throw Error(fmt::format("voltage grid index {} out of range", index));
    if (index + 1 == grid_size())
        return v_nominal;
    auto uv = to_microvolts(v_min) + static_cast<std::int64_t>(index) * to_microvolts(v_step);
    return static_cast<double>(uv) / 1e6;
}

std::vector<double> VoltageModel::grid() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < grid_size(); ++i)
        out.push_back(grid_voltage(i));
    return out;
}

std::size_t VoltageModel::grid_index(double v) const {
    auto off = to_microvolts(v) - to_microvolts(v_min);
    auto step = to_microvolts(v_step);
    if (off < 0 || off % step != 0 || static_cast<std::size_t>(off / step) >= grid_size())
        throw Error(fmt::format("{} V is not on the {}-{} V grid", v, v_min, v_nominal));
    return static_cast<std::size_t>(off / step);
}

double delay_scale(const VoltageModel& vm, double v) {
    if (!(v > vm.v_threshold))
        throw Error(fmt::format("supply {} V is at or below the threshold voltage {} V", v, vm.v_threshold));
    if (v == vm.v_nominal)
        return 1.0;
    return std::pow(vm.v_nominal - vm.v_threshold, vm.alpha) / std::pow(v - vm.v_threshold, vm.alpha) *
           (v / vm.v_nominal);
}

CellLibrary::CellLibrary(std::string name, std::vector<Cell> cells, VoltageModel voltage, double wire_capacitance,
                         double output_load, std::string units)
    : name_(std::move(name)), ordered_(std::move(cells)), voltage_(voltage), wire_capacitance_(wire_capacitance),
      output_load_(output_load), units_(std::move(units)) {
    voltage_.validate();
    if (wire_capacitance_ < 0.0 || output_load_ < 0.0)
        throw Error("negative library parameter: wire_capacitance/output_load");
    std::array<bool, kCellFunctionCount> seen{};
    for (const auto& c : ordered_) {
        auto idx = static_cast<std::size_t>(c.function);
        if (seen[idx])
            throw Error(fmt::format("duplicate cell function {}", cell_function_name(c.function)));
        seen[idx] = true;
        if (c.area < 0.0 || c.intrinsic_delay < 0.0 || c.input_capacitance < 0.0 || c.leakage < 0.0)
            throw Error(fmt::format("negative parameter in cell '{}'", c.name));
        bool tie = c.function == CellFunction::Tie0 || c.function == CellFunction::Tie1;
        if (!tie && c.intrinsic_delay <= 0.0)
            throw Error(fmt::format("cell '{}' needs a positive intrinsic delay", c.name));
        cells_[idx] = c;
    }
    for (std::size_t i = 0; i < kCellFunctionCount; ++i)
        if (!seen[i])
            throw Error(fmt::format("cell library is missing function {}", kNames[i]));
}

bool CellLibrary::operator==(const CellLibrary& o) const {
    return name_ == o.name_ && ordered_ == o.ordered_ && voltage_ == o.voltage_ &&
           wire_capacitance_ == o.wire_capacitance_ && output_load_ == o.output_load_ && units_ == o.units_;
}

CellLibrary default_library() {
    // Relative figures for a printed-technology style library. Inverter = 1
    // area unit; a full adder (2 XOR2 + 3 NAND2) is 5.5 units.
    std::vector<Cell> cells = {
        {"inv_x1", CellFunction::Inv, 1.00, 1.00, 1.50, 0.0090},
        {"nand2_x1", CellFunction::Nand2, 1.00, 1.20, 1.50, 0.0090},
        {"nor2_x1", CellFunction::Nor2, 1.00, 1.40, 1.50, 0.0090},
        {"and2_x1", CellFunction::And2, 1.25, 1.80, 1.50, 0.0110},
        {"or2_x1", CellFunction::Or2, 1.25, 2.00, 1.50, 0.0110},
        {"xor2_x1", CellFunction::Xor2, 1.25, 2.40, 2.25, 0.0110},
        {"xnor2_x1", CellFunction::Xnor2, 1.25, 2.40, 2.25, 0.0110},
        {"mux2_x1", CellFunction::Mux2, 1.50, 2.20, 1.80, 0.0135},
        {"buf_x1", CellFunction::Buf, 1.00, 1.60, 1.50, 0.0090},
        {"tie0", CellFunction::Tie0, 0.30, 0.00, 0.00, 0.0020},
        {"tie1", CellFunction::Tie1, 0.30, 0.00, 0.00, 0.0020},
    };
    return CellLibrary("printed-generic", std::move(cells), VoltageModel{}, 0.60, 3.00,
                       "area: relative units (inverter = 1); intrinsic_delay: ms at v_nominal; capacitance: "
                       "uF-scale units per input pin, per fanout wire and per output register; leakage: mW at "
                       "v_nominal; with delays in ms, toggle_rate * C * (1/clock) * V^2 is in mW");
}

CellLibrary library_from_json(const nlohmann::json& doc) {
    try {
        VoltageModel vm;
        const auto& v = doc.at("voltage");
        vm.v_nominal = v.at("v_nominal").get<double>();
        vm.v_min = v.at("v_min").get<double>();
        vm.v_step = v.at("v_step").get<double>();
        vm.v_threshold = v.at("v_threshold").get<double>();
        vm.alpha = v.at("alpha").get<double>();
        std::vector<Cell> cells;
        for (const auto& c : doc.at("cells")) {
            Cell cell;
            cell.name = c.at("name").get<std::string>();
            auto fn = c.at("function").get<std::string>();
            auto parsed = parse_cell_function(fn);
            if (!parsed)
                throw Error(fmt::format("unknown cell function '{}'", fn));
            cell.function = *parsed;
            cell.area = c.at("area").get<double>();
            cell.intrinsic_delay = c.at("intrinsic_delay").get<double>();
            cell.input_capacitance = c.at("input_capacitance").get<double>();
            cell.leakage = c.at("leakage").get<double>();
            cells.push_back(std::move(cell));
        }
        return CellLibrary(doc.value("name", std::string("unnamed")), std::move(cells), vm,
                           doc.at("wire_capacitance").get<double>(), doc.at("output_load").get<double>(),
                           doc.value("units", std::string()));
    } catch (const nlohmann::json::exception& e) {
        throw Error(fmt::format("malformed cell library: {}", e.what()));
    }
}

nlohmann::json to_json(const CellLibrary& lib) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : lib.cells())
        cells.push_back({{"name", c.name},
                         {"function", cell_function_name(c.function)},
                         {"area", c.area},
                         {"intrinsic_delay", c.intrinsic_delay},
                         {"input_capacitance", c.input_capacitance},
                         {"leakage", c.leakage}});
    const auto& vm = lib.voltage();
    return {{"units", lib.units()},
            {"name", lib.name()},
            {"voltage",
             {{"v_nominal", vm.v_nominal},
              {"v_min", vm.v_min},
              {"v_step", vm.v_step},
              {"v_threshold", vm.v_threshold},
              {"alpha", vm.alpha}}},
            {"wire_capacitance", lib.wire_capacitance()},
            {"output_load", lib.output_load()},
            {"cells", cells}};
}

CellLibrary load_library(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(fmt::format("malformed cell library '{}': {}", path, e.what()));
    }
    return library_from_json(doc);
}

void save_library(const CellLibrary& lib, const std::string& path) {
    write_text_file(path, to_json(lib).dump(2) + "\n");
}

} // namespace bespoke
