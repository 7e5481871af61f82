#pragma once

#include "biphoton/interferometer.hpp"
#include "biphoton/spectrum.hpp"
#include "biphoton/xsec.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace biphoton {

enum class Format { csv, json };

std::string to_string(Format format);
Format format_from_string(const std::string& text);
/// ".csv" or ".json".
std::string extension(Format format);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
/// Strict full-string parse; throws InvalidInput naming `what` on failure.
double parse_double(const std::string& text, const std::string& what);

/// Named numeric columns of equal length.
struct Table {
    std::vector<std::string> columns;
    std::vector<Eigen::ArrayXd> data;

    Eigen::Index rows() const { return data.empty() ? 0 : data.front().size(); }
    const Eigen::ArrayXd& column(const std::string& name) const;
};

/// CSV: header line then one row per sample. JSON: {"columns": [...], "data": {name: [...]}}.
void write_table(const std::filesystem::path& path, const Table& table, Format format);

/// Reads a table in the format given by the file extension. The columns must be exactly
/// `expected` (any order); errors name the file, row and column.
Table read_table(const std::filesystem::path& path, const std::vector<std::string>& expected);

/// Columns delay_fs, value and optionally stage_position_um (delay / fs_per_um).
Table interferogram_table(const Interferogram& ig, double stage_fs_per_um = 0.0);
Interferogram read_interferogram(const std::filesystem::path& path, Channel channel, Normalization normalization);

/// Columns omega_rad_per_s, wavelength_nm, density_per_rad_per_s.
Table spectrum_table(const Spectrum& spectrum);
Spectrum read_spectrum(const std::filesystem::path& path, const std::string& label);

/// Columns input_rate_per_s, output_rate_per_s, output_sigma_per_s.
Table power_scan_table(const PowerScan& scan);
PowerScan read_power_scan(const std::filesystem::path& path);

/// Two-column (wavelength_nm, value) table, rows in file order.
std::vector<std::pair<double, double>> read_wavelength_table(const std::filesystem::path& path);

/// Writes text exactly as given (binary mode, so output bytes do not depend on the platform).
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace biphoton
