#pragma once

#include "biphoton/analysis.hpp"
#include "biphoton/interferometer.hpp"
#include "biphoton/sample.hpp"
#include "biphoton/source.hpp"
#include "biphoton/timetag.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace biphoton {

struct ScanParams {
    double start_fs = -150.0;
    double stop_fs = 150.0;
    double step_fs = 0.2;

    DelayScan build() const;
};

/// How the coincidence trace is produced: per-point Poisson counts of the windowed coincidences
/// (fast) or the full time-tag pipeline at every delay.
enum class CoincidenceMode { poisson, timetag };

std::string to_string(CoincidenceMode mode);
CoincidenceMode coincidence_mode_from_string(const std::string& text);

/// Preset plus per-field overrides. Without a preset the fields describe the sample inline.
struct SampleConfig {
    std::optional<SamplePreset> preset = SamplePreset::r6g_5mM;
    std::optional<std::string> name;
    std::optional<double> concentration_mM;
    std::optional<double> pathlength_cm;
    std::optional<double> sigma_one_photon_cm2; // constant over wavelength
    std::optional<double> sigma_scatter_cm2;    // constant over wavelength
    std::optional<std::string> sigma_one_photon_csv;
    std::optional<std::string> sigma_scatter_csv;
    std::optional<double> sigma_etpa_cm2;
    std::optional<std::string> fluorescence_csv;
    std::optional<double> quantum_yield;
    std::optional<double> group_delay_shift_fs;

    SampleSpec build() const;
};

struct DetectorConfig {
    DetectorSpec a;
    DetectorSpec b;
    CoincidenceMode mode = CoincidenceMode::poisson;
    /// duration, pair rate at the detection splitter, bins, window and tail fraction.
    CoincidenceScanOptions coincidence;
    double emiccd_dark_rate_cps = 1.0;
    double emiccd_exposure_s = 1.0;
};

struct AnalysisConfig {
    Window window = Window::hann;
    int fit_peaks = 2;
    /// Fit band as fractions of the pump frequency (the one-photon band sits near 1/2).
    double fit_band_low = 0.3;
    double fit_band_high = 0.7;
    VisibilityOptions visibility;
    ClassificationThresholds thresholds;
    bool resimulate = true;
};

struct PowerScanConfig {
    double decades = 4.0;
    int points = 20;
    double min_rate_per_s = 1e4;
    double integration_s = 1.0;
    /// Flat loss cross section for the transmission measurement; unset uses the sample's
    /// spectrum-weighted one-photon plus scatter cross sections.
    std::optional<double> sigma_cm2;
    /// Concentration used to express a bound when the sample itself has none (blank).
    double reference_concentration_mM = 5.0;
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::uint64_t seed = 1;
    std::string outputs = "run";
    bool emit_timetags = false;

    SourceSpec source;
    std::optional<std::string> spectrum_table_csv;

    InterferometerSpec interferometer;
    /// Damp the persistent pump fringe with the coherence time implied by the pump linewidth.
    bool pump_linewidth_damping = false;
    /// Delay per micrometre of stage travel (double pass).
    double stage_fs_per_um = 6.671281903963041;

    ScanParams scan;
    SampleConfig sample;
    DetectorConfig detectors;
    GeometrySpec geometry;
    AnalysisConfig analysis;
    PowerScanConfig power_scan;

    /// Checks every section against its module's invariants; throws InvalidInput.
    void validate() const;
    /// Source spec with the tabulated spectrum loaded, when one is configured.
    SourceSpec resolved_source() const;
    /// Interferometer spec with linewidth damping applied.
    InterferometerSpec resolved_interferometer() const;
};

/// Parses sectioned key = value text. Unknown sections or keys are rejected. Relative file
/// paths are resolved against `base_dir`.
ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Canonical text form; parse_scenario(serialize_scenario(c)) reproduces c exactly.
std::string serialize_scenario(const ScenarioConfig& config);

std::string sha256_hex(std::string_view data);

}  // namespace biphoton
