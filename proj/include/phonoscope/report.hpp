#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace phonoscope {

// Empty cell, number, or text.
using Cell = std::variant<std::monostate, double, std::string>;

struct ReportTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::string> row_labels;
    std::vector<std::vector<Cell>> cells;  // row-major, cells[r].size() == columns.size()

    ReportTable() = default;
    ReportTable(std::string table_name, std::vector<std::string> column_names)
        : name(std::move(table_name)), columns(std::move(column_names)) {}

    // Appends a row of empty cells and returns its index.
    std::size_t add_row(std::string label);
    void set(std::size_t row, std::string_view column, Cell value);
    const Cell& get(std::string_view row, std::string_view column) const;
    // Numeric value or NaN.
    double number(std::string_view row, std::string_view column) const;
    bool has_row(std::string_view row) const;

    bool operator==(const ReportTable&) const = default;
};

struct AnalysisReport {
    std::string analysis_id;
    std::map<std::string, std::string> parameters;
    std::deque<ReportTable> tables;  // deque: references from add_table stay valid
    std::vector<std::string> findings;
    std::uint64_t seed = 0;

    ReportTable& add_table(std::string name, std::vector<std::string> columns);
    const ReportTable& table(std::string_view name) const;
    const ReportTable* find_table(std::string_view name) const;

    bool operator==(const AnalysisReport&) const = default;
};

std::string report_to_json(const AnalysisReport& report);
AnalysisReport report_from_json(std::string_view json_text);
std::string table_to_csv(const ReportTable& table);
std::string report_to_markdown(const AnalysisReport& report, std::string_view tool_version = {});

// Writes <id>.json, <id>.md and one <id>.<table>.csv per table into dir.
std::vector<std::filesystem::path> write_report(const AnalysisReport& report,
                                                const std::filesystem::path& dir,
                                                std::string_view tool_version = {});

// Shortest round-trip decimal form; "" for NaN.
std::string format_number(double x);

} // namespace phonoscope
