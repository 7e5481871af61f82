#pragma once

#include "biphoton/spectrum.hpp"

#include <string>
#include <utility>
#include <vector>

namespace biphoton {

/// CW pump laser.
struct PumpSpec {
    double center_wavelength_nm = 406.0;
    double linewidth_fwhm_nm = 1.5;
    double power_w = 2.0;

    void validate() const;
    double angular_frequency() const;
};

enum class SpectrumMode { degenerate, split, tabulated };

std::string to_string(SpectrumMode mode);
SpectrumMode spectrum_mode_from_string(const std::string& text);

/// Parameters for the selected spectrum mode. Unused fields are ignored.
struct SpectrumParams {
    double center_wavelength_nm = 812.0;
    double fwhm_nm = 100.0;            // degenerate
    double lobe_separation_nm = 150.0; // split
    double lobe_fwhm_nm = 30.0;        // split
    int grid_points = 2048;
    std::vector<std::pair<double, double>> table; // tabulated: (wavelength nm, intensity)
};

struct SourceSpec {
    PumpSpec pump;
    double spdc_power_w = 20e-9;
    double conversion_efficiency = 1e-8;
    SpectrumMode spectrum_mode = SpectrumMode::split;
    SpectrumParams spectrum_params;
    /// Phenomenological Gaussian blur (FWHM) of interferogram envelopes.
    double envelope_broadening_fs = 0.0;

    void validate() const;
};

/// Single Gaussian lobe centered at 2 pi c / center. The wavelength FWHM maps to
/// frequency through c * fwhm / center^2.
Spectrum make_degenerate_spectrum(double center_wavelength_nm, double fwhm_nm, int grid_points);

/// Two equal Gaussian lobes at omega0 +/- delta, where delta is chosen so the lobe centers are
/// `lobe_separation_nm` apart in wavelength. Zero separation reproduces the degenerate spectrum.
Spectrum make_split_spectrum(double center_wavelength_nm, double lobe_separation_nm, double lobe_fwhm_nm,
                             int grid_points);

/// Resamples a (wavelength nm, intensity per nm) table onto a uniform angular-frequency grid,
/// applying the lambda^2 Jacobian, then normalizes.
Spectrum load_spectrum(std::vector<std::pair<double, double>> table, int grid_points = 2048);

Spectrum make_spectrum(const SourceSpec& source);

/// Pairs per second: power / (2 hbar <omega>).
double pair_rate(double spdc_power_w, const Spectrum& spectrum);
double pair_rate(const SourceSpec& source);

struct PairsPerMode {
    double value = 0.0;
    /// The isolated-pair regime requires value < 1; callers should warn when this is set.
    bool exceeds_single_pair_limit = false;
};

/// Pair rate divided by the spectrum FWHM in Hz.
PairsPerMode pairs_per_mode(double pairs_per_second, const Spectrum& spectrum);
PairsPerMode pairs_per_mode(const SourceSpec& source, const Spectrum& spectrum);

}  // namespace biphoton
