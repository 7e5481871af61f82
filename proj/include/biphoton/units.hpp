#pragma once

#include <cmath>
#include <numbers>

namespace biphoton {

// CODATA exact values (SI).
inline constexpr double speed_of_light = 299792458.0;          // m/s
inline constexpr double planck = 6.62607015e-34;               // J s
inline constexpr double hbar = planck / (2.0 * std::numbers::pi);
inline constexpr double avogadro = 6.02214076e23;              // 1/mol

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double fwhm_per_sigma = 2.3548200450309493;   // 2 sqrt(2 ln 2)

inline constexpr double femto = 1e-15;
inline constexpr double pico = 1e-12;
inline constexpr double nano = 1e-9;

/// Angular frequency (rad/s) of vacuum wavelength given in nm.
inline double angular_frequency_from_nm(double wavelength_nm) {
    return two_pi * speed_of_light / (wavelength_nm * nano);
}

inline double nm_from_angular_frequency(double omega) {
    return two_pi * speed_of_light / omega / nano;
}

/// Linearized wavelength-to-frequency bandwidth conversion, c * dlambda / lambda^2 (Hz).
inline double bandwidth_hz_from_nm(double center_nm, double width_nm) {
    const double lambda = center_nm * nano;
    return speed_of_light * width_nm * nano / (lambda * lambda);
}

inline double bandwidth_nm_from_hz(double center_nm, double width_hz) {
    const double lambda = center_nm * nano;
    return width_hz * lambda * lambda / speed_of_light / nano;
}

/// Molecules per cm^3 for a concentration in mM (mol/L * 1e-3 -> mol/cm^3 * 1e-6).
inline double molecules_per_cm3(double concentration_mM) {
    return concentration_mM * 1e-6 * avogadro;
}

}  // namespace biphoton
