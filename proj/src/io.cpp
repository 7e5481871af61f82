#include "biphoton/io.hpp"

#include "biphoton/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace biphoton {

namespace {

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        const auto first = cell.find_first_not_of(" \t\r");
        const auto last = cell.find_last_not_of(" \t\r");
        cells.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string join(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) out += (i ? ", " : "") + names[i];
    return out;
}

// Maps each expected column to its position in `found`, or throws naming the problem.
std::vector<std::size_t> match_columns(const std::string& where, const std::vector<std::string>& found,
                                       const std::vector<std::string>& expected) {
    for (const auto& name : found) {
        if (std::find(expected.begin(), expected.end(), name) == expected.end()) {
            throw InvalidInput(where + ": unexpected column '" + name + "' (expected " + join(expected) + ")");
        }
    }
    std::vector<std::size_t> index;
    for (const auto& name : expected) {
        const auto it = std::find(found.begin(), found.end(), name);
        if (it == found.end()) {
            throw InvalidInput(where + ": missing column '" + name + "' (expected " + join(expected) + ")");
        }
        index.push_back(static_cast<std::size_t>(it - found.begin()));
    }
    if (found.size() != expected.size()) {
        throw InvalidInput(where + ": expected " + std::to_string(expected.size()) + " columns (" + join(expected) +
                           "), found " + std::to_string(found.size()));
    }
    return index;
}

Table read_csv(const std::filesystem::path& path, const std::vector<std::string>& expected) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path.string());
    std::string line;
    std::size_t row = 0;
    std::vector<std::size_t> index;
    std::vector<std::vector<double>> values(expected.size());
    bool have_header = false;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r" || line[0] == '#') continue;
        const auto cells = split_row(line);
        const std::string where = path.string() + ":" + std::to_string(row);
        if (!have_header) {
            index = match_columns(where, cells, expected);
            have_header = true;
            continue;
        }
        if (cells.size() != expected.size()) {
            std::string detail;
            if (cells.size() < expected.size()) {
                // Header position of the first column with no value on this row.
                const auto j = std::find(index.begin(), index.end(), cells.size()) - index.begin();
                detail = "; column '" + expected[static_cast<std::size_t>(j)] + "' has no value";
            }
            throw InvalidInput(where + ": expected " + std::to_string(expected.size()) + " values (" + join(expected) +
                               "), found " + std::to_string(cells.size()) + detail);
        }
        for (std::size_t j = 0; j < expected.size(); ++j) {
            values[j].push_back(parse_double(cells[index[j]], where + " column '" + expected[j] + "'"));
        }
    }
    if (!have_header) throw InvalidInput(path.string() + ": empty file (expected header " + join(expected) + ")");
    Table t;
    t.columns = expected;
    for (auto& v : values) t.data.emplace_back(Eigen::Map<Eigen::ArrayXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    return t;
}

Table read_json(const std::filesystem::path& path, const std::vector<std::string>& expected) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(path.string() + ": invalid JSON: " + e.what());
    }
    if (!doc.contains("data") || !doc["data"].is_object()) throw InvalidInput(path.string() + ": missing 'data' object");
    std::vector<std::string> found;
    for (const auto& item : doc["data"].items()) found.push_back(item.key());
    match_columns(path.string(), found, expected);
    Table t;
    t.columns = expected;
    Eigen::Index n = -1;
    for (const auto& name : expected) {
        const auto& arr = doc["data"][name];
        if (!arr.is_array()) throw InvalidInput(path.string() + ": column '" + name + "' is not an array");
        Eigen::ArrayXd col(static_cast<Eigen::Index>(arr.size()));
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_number()) {
                throw InvalidInput(path.string() + ": row " + std::to_string(i + 1) + " column '" + name +
                                   "' is not a number");
            }
            col(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
        }
        if (n >= 0 && col.size() != n) throw InvalidInput(path.string() + ": column '" + name + "' has a different length");
        n = col.size();
        t.data.push_back(std::move(col));
    }
    return t;
}

}  // namespace

std::string to_string(Format format) { return format == Format::json ? "json" : "csv"; }

Format format_from_string(const std::string& text) {
    if (text == "csv") return Format::csv;
    if (text == "json") return Format::json;
    throw InvalidInput("unknown format '" + text + "' (expected csv or json)");
}

std::string extension(Format format) { return format == Format::json ? ".json" : ".csv"; }

std::string format_double(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

double parse_double(const std::string& text, const std::string& what) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    if (begin != end && *begin == '+') ++begin;
    const auto result = std::from_chars(begin, end, value);
    if (text.empty() || result.ec != std::errc() || result.ptr != end) {
        throw InvalidInput(what + ": cannot parse '" + text + "' as a number");
    }
    return value;
}

const Eigen::ArrayXd& Table::column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw InvalidInput("table has no column '" + name + "'");
    return data[static_cast<std::size_t>(it - columns.begin())];
}

void write_table(const std::filesystem::path& path, const Table& table, Format format) {
    require(table.columns.size() == table.data.size(), "table column names and data disagree");
    for (const auto& col : table.data) require(col.size() == table.rows(), "table columns must have equal lengths");
    std::string text;
    if (format == Format::csv) {
        text = join(table.columns);
        text.erase(std::remove(text.begin(), text.end(), ' '), text.end());
        text += '\n';
        for (Eigen::Index i = 0; i < table.rows(); ++i) {
            for (std::size_t j = 0; j < table.data.size(); ++j) {
                if (j) text += ',';
                text += format_double(table.data[j](i));
            }
            text += '\n';
        }
    } else {
        nlohmann::ordered_json doc;
        doc["columns"] = table.columns;
        nlohmann::ordered_json data = nlohmann::ordered_json::object();
        for (std::size_t j = 0; j < table.columns.size(); ++j) {
            data[table.columns[j]] = std::vector<double>(table.data[j].data(), table.data[j].data() + table.rows());
        }
        doc["data"] = std::move(data);
        text = doc.dump(1) + '\n';
    }
    write_text(path, text);
}

Table read_table(const std::filesystem::path& path, const std::vector<std::string>& expected) {
    if (!std::filesystem::exists(path)) throw InvalidInput("missing file " + path.string());
    return path.extension() == ".json" ? read_json(path, expected) : read_csv(path, expected);
}

Table interferogram_table(const Interferogram& ig, double stage_fs_per_um) {
    Table t;
    t.columns = {"delay_fs", "value"};
    t.data = {ig.scan.delays(), ig.values};
    if (stage_fs_per_um > 0.0) {
        t.columns.push_back("stage_position_um");
        t.data.push_back(ig.scan.delays() / stage_fs_per_um);
    }
    return t;
}

Interferogram read_interferogram(const std::filesystem::path& path, Channel channel, Normalization normalization) {
    Table t;
    try {
        t = read_table(path, {"delay_fs", "value", "stage_position_um"});
    } catch (const InvalidInput&) {
        t = read_table(path, {"delay_fs", "value"});
    }
    try {
        return Interferogram(DelayScan(t.column("delay_fs")), t.column("value"), channel, normalization);
    } catch (const InvalidInput& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

Table spectrum_table(const Spectrum& spectrum) {
    Table t;
    t.columns = {"omega_rad_per_s", "wavelength_nm", "density_per_rad_per_s"};
    t.data = {spectrum.omega(), spectrum.wavelength_nm(), spectrum.density()};
    return t;
}

Spectrum read_spectrum(const std::filesystem::path& path, const std::string& label) {
    const Table t = read_table(path, {"omega_rad_per_s", "wavelength_nm", "density_per_rad_per_s"});
    try {
        return Spectrum(t.column("omega_rad_per_s"), t.column("density_per_rad_per_s"), label);
    } catch (const InvalidInput& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

Table power_scan_table(const PowerScan& scan) {
    Table t;
    t.columns = {"input_rate_per_s", "output_rate_per_s", "output_sigma_per_s"};
    t.data = {scan.input_rate, scan.output_rate, scan.output_sigma};
    return t;
}

PowerScan read_power_scan(const std::filesystem::path& path) {
    const Table t = read_table(path, {"input_rate_per_s", "output_rate_per_s", "output_sigma_per_s"});
    PowerScan scan{t.column("input_rate_per_s"), t.column("output_rate_per_s"), t.column("output_sigma_per_s")};
    try {
        scan.validate();
    } catch (const InvalidInput& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
    return scan;
}

std::vector<std::pair<double, double>> read_wavelength_table(const std::filesystem::path& path) {
    const Table t = read_table(path, {"wavelength_nm", "value"});
    std::vector<std::pair<double, double>> rows;
    for (Eigen::Index i = 0; i < t.rows(); ++i) rows.emplace_back(t.data[0](i), t.data[1](i));
    return rows;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw RuntimeFailure("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace biphoton
