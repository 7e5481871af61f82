#pragma once

#include "biphoton/interferometer.hpp"
#include "biphoton/spectrum.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace biphoton {

/// Wavelength-indexed table (nm -> value). Linear interpolation inside, clamped outside.
class WavelengthTable {
 public:
    WavelengthTable() = default;
    explicit WavelengthTable(std::vector<std::pair<double, double>> rows);
    static WavelengthTable constant(double value);

    double at(double wavelength_nm) const;
    Eigen::ArrayXd at(const Eigen::ArrayXd& wavelength_nm) const;
    WavelengthTable scaled(double factor) const;
    const std::vector<std::pair<double, double>>& rows() const { return rows_; }
    bool empty() const { return rows_.empty(); }

 private:
    std::vector<std::pair<double, double>> rows_;
};

struct SampleSpec {
    std::string name;
    double concentration_mM = 0.0;
    double pathlength_cm = 1.0;
    WavelengthTable sigma_one_photon_cm2;
    WavelengthTable sigma_scatter_cm2;
    /// Counterfactual entangled two-photon channel strength.
    double sigma_etpa_cm2 = 0.0;
    std::optional<Spectrum> fluorescence;
    double quantum_yield = 0.0;
    double group_delay_shift_fs = 0.0;

    void validate() const;
};

struct GeometrySpec {
    double collection_efficiency = 1e-4;
    double beam_waist_um = 500.0;

    void validate() const;
    /// pi w^2 / 4 with w the beam waist, in cm^2.
    double beam_area_cm2() const;
};

/// concentration * 1e-6 * N_A, molecules per cm^3.
double number_density(const SampleSpec& sample);

struct TransmissionResult {
    Spectrum spectrum;            // renormalized transmitted spectrum
    double rate = 0.0;            // transmitted photons/s
    Eigen::ArrayXd transmittance; // per grid point
    Eigen::ArrayXd absorbed;      // per grid point, fraction removed by one-photon absorption
    Eigen::ArrayXd scattered;     // per grid point, fraction removed by scattering
};

/// Beer-Lambert attenuation exp(-(sigma_1 + sigma_s) n l) per frequency.
TransmissionResult transmit(const Spectrum& spectrum, double input_rate, const SampleSpec& sample);

/// Pair spectrum after both photons traverse the sample: S(W) T(W) T(w_p - W).
/// Returns the renormalized spectrum and the surviving pair fraction.
std::pair<Spectrum, double> transmit_pairs(const Spectrum& spectrum, double pump_omega, const SampleSpec& sample);

struct ScatterResult {
    Spectrum spectrum;                  // scattered spectral shape (normalized)
    double rate_cps = 0.0;              // detected counts/s
    double mean_sigma_scatter_cm2 = 0.0;
    bool has_signal = false;            // false when the scattering cross section vanishes
};

/// Detected rate S_E = gamma N_E n l <sigma_s>, with <sigma_s> the spectrum-weighted mean.
ScatterResult scatter_signal(const Spectrum& spectrum, double input_rate, const SampleSpec& sample,
                             const GeometrySpec& geom);

struct EtpaResult {
    std::optional<Spectrum> spectrum; // emitted (fluorescence) spectrum, absent without one
    Interferogram delay_trace;  // counts/s versus delay
    double rate_cps = 0.0;      // far-delay detected rate
};

/// Counterfactual ETPA fluorescence. Flux density pair_rate / (pi w^2 / 4) times sigma_E per
/// molecule, integrated over the illuminated column (n l times the same area), times the
/// quantum yield and collection efficiency. The area cancels, so the rate is
/// gamma * QY * pair_rate * sigma_E * n * l. The delay dependence copies the supplied
/// coincidence interferogram.
EtpaResult etpa_fluorescence_signal(double pair_rate, double beam_waist_um, const SampleSpec& sample,
                                    const GeometrySpec& geom, const Interferogram& coincidence);

enum class SamplePreset { r6g_5mM, r6g_110mM, ethanol_blank, zntpp };

std::string to_string(SamplePreset preset);
SamplePreset sample_preset_from_string(const std::string& text);
const std::vector<SamplePreset>& all_sample_presets();

SampleSpec preset_sample(SamplePreset preset);

/// Red-shifted R6G emission band (skewed Gaussian in wavelength, peak 590 nm).
Spectrum r6g_fluorescence_spectrum();

/// Classical two-photon absorption cross section of R6G in cm^4 s / molecule. The published value
/// carries a positive exponent (70 x 10^50), which is read as 70 x 10^-50 (GM scale).
inline constexpr double r6g_classical_tpa_cm4s = 70e-50;

}  // namespace biphoton
