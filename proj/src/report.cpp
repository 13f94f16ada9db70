#include "phonoscope/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "phonoscope/error.hpp"

namespace phonoscope {

using nlohmann::json;

std::string format_number(double x) {
    if (std::isnan(x)) return {};
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) fail(ErrorKind::InvalidArgument, "cannot format number");
    return std::string(buf, ptr);
}

std::size_t ReportTable::add_row(std::string label) {
    row_labels.push_back(std::move(label));
    cells.emplace_back(columns.size());
    return cells.size() - 1;
}

namespace {

std::size_t column_index(const ReportTable& t, std::string_view column) {
    for (std::size_t c = 0; c < t.columns.size(); ++c)
        if (t.columns[c] == column) return c;
    fail(ErrorKind::InvalidArgument,
         "table '" + t.name + "' has no column '" + std::string(column) + "'");
}

std::size_t row_index(const ReportTable& t, std::string_view row) {
    for (std::size_t r = 0; r < t.row_labels.size(); ++r)
        if (t.row_labels[r] == row) return r;
    fail(ErrorKind::InvalidArgument, "table '" + t.name + "' has no row '" + std::string(row) + "'");
}

} // namespace

void ReportTable::set(std::size_t row, std::string_view column, Cell value) {
    // Non-finite numbers are stored as empty cells so JSON stays lossless.
    if (const double* d = std::get_if<double>(&value); d && !std::isfinite(*d)) value = {};
    cells.at(row).at(column_index(*this, column)) = std::move(value);
}

const Cell& ReportTable::get(std::string_view row, std::string_view column) const {
    return cells[row_index(*this, row)][column_index(*this, column)];
}

double ReportTable::number(std::string_view row, std::string_view column) const {
    const Cell& c = get(row, column);
    if (const double* d = std::get_if<double>(&c)) return *d;
    return std::nan("");
}

bool ReportTable::has_row(std::string_view row) const {
    for (const auto& r : row_labels)
        if (r == row) return true;
    return false;
}

ReportTable& AnalysisReport::add_table(std::string name, std::vector<std::string> columns) {
    tables.emplace_back(std::move(name), std::move(columns));
    return tables.back();
}

const ReportTable* AnalysisReport::find_table(std::string_view name) const {
    for (const auto& t : tables)
        if (t.name == name) return &t;
    return nullptr;
}

const ReportTable& AnalysisReport::table(std::string_view name) const {
    if (const ReportTable* t = find_table(name)) return *t;
    fail(ErrorKind::InvalidArgument, "report has no table '" + std::string(name) + "'");
}

namespace {

json cell_to_json(const Cell& c) {
    if (const double* d = std::get_if<double>(&c)) return *d;
    if (const std::string* s = std::get_if<std::string>(&c)) return *s;
    return nullptr;
}

Cell cell_from_json(const json& j) {
    if (j.is_null()) return {};
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    fail(ErrorKind::MalformedFile, "report cell must be null, number or string");
}

} // namespace

std::string report_to_json(const AnalysisReport& report) {
    json j;
    j["analysis_id"] = report.analysis_id;
    j["seed"] = report.seed;
    j["parameters"] = report.parameters;
    j["findings"] = report.findings;
    j["tables"] = json::array();
    for (const auto& t : report.tables) {
        json jt;
        jt["name"] = t.name;
        jt["columns"] = t.columns;
        jt["rows"] = json::array();
        for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
            json cells = json::array();
            for (const auto& c : t.cells[r]) cells.push_back(cell_to_json(c));
            jt["rows"].push_back({{"label", t.row_labels[r]}, {"cells", std::move(cells)}});
        }
        j["tables"].push_back(std::move(jt));
    }
    return j.dump(2) + "\n";
}

AnalysisReport report_from_json(std::string_view json_text) {
    try {
        const json j = json::parse(json_text);
        AnalysisReport report;
        report.analysis_id = j.at("analysis_id").get<std::string>();
        report.seed = j.at("seed").get<std::uint64_t>();
        report.parameters = j.at("parameters").get<std::map<std::string, std::string>>();
        report.findings = j.at("findings").get<std::vector<std::string>>();
        for (const auto& jt : j.at("tables")) {
            ReportTable t(jt.at("name").get<std::string>(),
                          jt.at("columns").get<std::vector<std::string>>());
            for (const auto& jr : jt.at("rows")) {
                const std::size_t r = t.add_row(jr.at("label").get<std::string>());
                const auto& jc = jr.at("cells");
                if (jc.size() != t.columns.size())
                    fail(ErrorKind::MalformedFile, "report row width does not match columns");
                for (std::size_t c = 0; c < jc.size(); ++c) t.cells[r][c] = cell_from_json(jc[c]);
            }
            report.tables.push_back(std::move(t));
        }
        return report;
    } catch (const json::exception& e) {
        fail(ErrorKind::MalformedFile, std::string("report JSON: ") + e.what());
    }
}

namespace {

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string cell_text(const Cell& c) {
    if (const double* d = std::get_if<double>(&c)) return format_number(*d);
    if (const std::string* s = std::get_if<std::string>(&c)) return *s;
    return {};
}

} // namespace

std::string table_to_csv(const ReportTable& table) {
    std::string out = "row";
    for (const auto& c : table.columns) out += "," + csv_field(c);
    out += "\n";
    for (std::size_t r = 0; r < table.row_labels.size(); ++r) {
        out += csv_field(table.row_labels[r]);
        for (const auto& c : table.cells[r]) out += "," + csv_field(cell_text(c));
        out += "\n";
    }
    return out;
}

std::string report_to_markdown(const AnalysisReport& report, std::string_view tool_version) {
    std::ostringstream os;
    os << "# " << report.analysis_id << "\n\n";
    if (!tool_version.empty()) os << "phonoscope " << tool_version << "\n\n";
    os << "- seed: " << report.seed << "\n";
    for (const auto& [k, v] : report.parameters) os << "- " << k << ": " << v << "\n";
    os << "\n";
    for (const auto& t : report.tables) {
        os << "## " << t.name << "\n\n|  |";
        for (const auto& c : t.columns) os << " " << c << " |";
        os << "\n|---|";
        for (std::size_t c = 0; c < t.columns.size(); ++c) os << "---|";
        os << "\n";
        for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
            os << "| " << t.row_labels[r] << " |";
            for (const auto& c : t.cells[r]) os << " " << cell_text(c) << " |";
            os << "\n";
        }
        os << "\n";
    }
    if (!report.findings.empty()) {
        os << "## findings\n\n";
        for (const auto& f : report.findings) os << "- " << f << "\n";
    }
    return os.str();
}

namespace {

std::filesystem::path write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
    out << text;
    if (!out) fail(ErrorKind::IoError, "short write to " + path.string());
    return path;
}

} // namespace

std::vector<std::filesystem::path> write_report(const AnalysisReport& report,
                                                const std::filesystem::path& dir,
                                                std::string_view tool_version) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    const std::string& id = report.analysis_id;
    written.push_back(write_text(dir / (id + ".json"), report_to_json(report)));
    written.push_back(write_text(dir / (id + ".md"), report_to_markdown(report, tool_version)));
    for (const auto& t : report.tables)
        written.push_back(write_text(dir / (id + "." + t.name + ".csv"), table_to_csv(t)));
    return written;
}

} // namespace phonoscope
