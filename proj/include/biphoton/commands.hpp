#pragma once

#include "biphoton/analysis.hpp"
#include "biphoton/io.hpp"
#include "biphoton/scenario.hpp"
#include "biphoton/xsec.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace biphoton {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunOptions {
    int threads = 1;
    Format format = Format::csv;
};

struct SimulationProducts {
    Spectrum input_spectrum;
    Spectrum transmitted_spectrum;      // one-photon transmission of the input beam
    std::optional<Spectrum> spectrum_90; // emitted 90-degree spectrum, absent without signal
    Interferogram coincidence_reference; // through the solvent blank
    Interferogram coincidence_sample;
    Interferogram emiccd_90;
    double pair_rate_per_s = 0.0;
    double photon_rate_per_s = 0.0;
    PairsPerMode pairs_per_mode;
    double transmitted_pair_fraction = 0.0;
    double scatter_rate_cps = 0.0;
    double mean_sigma_scatter_cm2 = 0.0;
    double etpa_rate_cps = 0.0;
    double emiccd_dark_floor_cps = 0.0;
};

/// Runs every forward model for a validated scenario. Randomness comes from
/// derive_seed(config.seed, <channel>, <point>).
SimulationProducts simulate(const ScenarioConfig& config, int threads = 1);

struct AnalysisProducts {
    FrequencySpectrumEstimate coincidence_dft;
    GaussianFit fit;
    VisibilityResult visibility;
    CorrelationTimeResult correlation_time;
    std::optional<ClassificationReport> classification;
    std::optional<double> resimulation_residual;
    std::optional<CrossSectionEstimate> scatter_estimate;
    std::vector<std::string> notes;
};

/// Spectral recovery, fits, visibility, correlation time, 90-degree classification, scatter
/// cross section and (optionally) resimulation from the fitted spectrum.
AnalysisProducts analyze(const ScenarioConfig& config, const Interferogram& coincidence,
                         const std::optional<Interferogram>& emiccd_90, const std::optional<Spectrum>& spectrum_90);

/// Relative RMS of data - s * model with the least-squares scale s.
double scaled_residual(const Eigen::ArrayXd& data, const Eigen::ArrayXd& model);

struct PowerScanProducts {
    PowerScan scan;
    PowerLawFit fit;
    CrossSectionEstimate estimate;
    double sigma_loss_cm2 = 0.0;     // cross section used to generate the scan
    double concentration_mM = 0.0;   // concentration used for the estimate
    bool reference_concentration = false;
};

/// Log-uniform input rates over `decades`, Beer-Lambert loss with Poisson shot noise on the
/// transmitted counts, then power_law_fit and sigma_from_transmission.
PowerScanProducts power_scan(const ScenarioConfig& config, std::optional<double> decades = std::nullopt,
                             std::optional<int> points = std::nullopt);

nlohmann::json to_json(const GaussianFit& fit);
nlohmann::json to_json(const VisibilityResult& v);
nlohmann::json to_json(const CorrelationTimeResult& c);
nlohmann::json to_json(const ClassificationReport& r);
nlohmann::json to_json(const CrossSectionEstimate& e);
nlohmann::json to_json(const PowerLawFit& f);
nlohmann::json to_json(const AnalysisProducts& a);

/// Writes the run directory: config.ini, data tables, summary.json and timings.json (the only
/// file holding wall-clock values).
void cmd_simulate(const ScenarioConfig& config, const std::filesystem::path& out_dir, const RunOptions& options);

/// Analyzes a run directory written by cmd_simulate; writes analysis.json into it.
nlohmann::json cmd_analyze_run(const std::filesystem::path& run_dir);

/// Analyzes external tables. The config supplies the pump, input spectrum and sample.
nlohmann::json cmd_analyze_files(const ScenarioConfig& config, const std::filesystem::path& coincidence,
                                 const std::optional<std::filesystem::path>& emiccd_90,
                                 const std::optional<std::filesystem::path>& spectrum_90,
                                 const std::filesystem::path& out_dir);

/// Writes power_scan.<ext> and xsec_transmission.json.
nlohmann::json cmd_power_scan(const ScenarioConfig& config, const std::filesystem::path& out_dir,
                              std::optional<double> decades, std::optional<int> points, const RunOptions& options);

/// Writes report/ (figure-ready tables, summary.txt, manifest.json) for an analyzed run.
std::vector<std::string> cmd_report(const std::filesystem::path& run_dir);

/// Preset parameter listing.
nlohmann::json cmd_presets();

}  // namespace biphoton
