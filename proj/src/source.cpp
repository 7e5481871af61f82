#include "biphoton/source.hpp"

#include "biphoton/error.hpp"
#include "biphoton/units.hpp"

#include <algorithm>
#include <cmath>

namespace biphoton {

namespace {

// Grid half-span in units of the lobe sigma.
constexpr double kSpanSigmas = 6.0;
constexpr double kMinPointsPerFwhm = 8.0;

void check_common(double center_nm, double width_nm, int grid_points) {
    require(center_nm > 0.0, "center wavelength must be positive");
    require(width_nm > 0.0, "bandwidth must be positive");
    require(grid_points >= 64, "spectrum needs at least 64 grid points");
}

Spectrum build_lobes(double omega0, double delta, double sigma, int grid_points, const std::string& label) {
    const double half_span = delta + kSpanSigmas * sigma;
    require(omega0 - half_span > 0.0, "spectrum lobes fall outside the positive-frequency grid");
    const double step = 2.0 * half_span / static_cast<double>(grid_points - 1);
    require(fwhm_per_sigma * sigma / step >= kMinPointsPerFwhm,
            "grid too coarse: fewer than 8 points across the lobe FWHM");

    Eigen::ArrayXd omega = centered_grid(omega0, step, grid_points);
    Eigen::ArrayXd density;
    if (delta == 0.0) {
        density = gaussian(omega, omega0, sigma);
    } else {
        density = 0.5 * (gaussian(omega, omega0 - delta, sigma) + gaussian(omega, omega0 + delta, sigma));
    }
    return Spectrum::normalized(std::move(omega), std::move(density), label);
}

}  // namespace

void PumpSpec::validate() const {
    require(center_wavelength_nm > 0.0, "pump center wavelength must be positive");
    require(linewidth_fwhm_nm >= 0.0, "pump linewidth must be non-negative");
    require(power_w >= 0.0, "pump power must be non-negative");
}

double PumpSpec::angular_frequency() const { return angular_frequency_from_nm(center_wavelength_nm); }

std::string to_string(SpectrumMode mode) {
    switch (mode) {
        case SpectrumMode::degenerate: return "degenerate";
        case SpectrumMode::split: return "split";
        case SpectrumMode::tabulated: return "tabulated";
    }
    return "unknown";
}

SpectrumMode spectrum_mode_from_string(const std::string& text) {
    if (text == "degenerate") return SpectrumMode::degenerate;
    if (text == "split") return SpectrumMode::split;
    if (text == "tabulated") return SpectrumMode::tabulated;
    throw InvalidInput("unknown spectrum mode '" + text + "' (expected degenerate, split or tabulated)");
}

void SourceSpec::validate() const {
    pump.validate();
    require(conversion_efficiency > 0.0 && conversion_efficiency <= 1.0, "conversion efficiency must be in (0, 1]");
    require(spdc_power_w >= 0.0, "SPDC power must be non-negative");
    require(spdc_power_w <= pump.power_w, "SPDC power cannot exceed pump power");
    require(envelope_broadening_fs >= 0.0, "envelope broadening must be non-negative");
}

Spectrum make_degenerate_spectrum(double center_wavelength_nm, double fwhm_nm, int grid_points) {
    check_common(center_wavelength_nm, fwhm_nm, grid_points);
    const double omega0 = angular_frequency_from_nm(center_wavelength_nm);
    const double sigma = two_pi * bandwidth_hz_from_nm(center_wavelength_nm, fwhm_nm) / fwhm_per_sigma;
    return build_lobes(omega0, 0.0, sigma, grid_points, "degenerate");
}

Spectrum make_split_spectrum(double center_wavelength_nm, double lobe_separation_nm, double lobe_fwhm_nm,
                             int grid_points) {
    check_common(center_wavelength_nm, lobe_fwhm_nm, grid_points);
    require(lobe_separation_nm >= 0.0, "lobe separation must be non-negative");
    const double omega0 = angular_frequency_from_nm(center_wavelength_nm);
    const double sigma = two_pi * bandwidth_hz_from_nm(center_wavelength_nm, lobe_fwhm_nm) / fwhm_per_sigma;
    if (lobe_separation_nm == 0.0) return build_lobes(omega0, 0.0, sigma, grid_points, "degenerate");

    // Lobes at omega0 (1 +/- x): lambda0/(1-x) - lambda0/(1+x) = s  =>  s x^2 + 2 lambda0 x - s = 0.
    const double l0 = center_wavelength_nm;
    const double s = lobe_separation_nm;
    const double x = (std::sqrt(l0 * l0 + s * s) - l0) / s;
    require(x < 1.0, "lobe separation too large for the center wavelength");
    return build_lobes(omega0, x * omega0, sigma, grid_points, "split");
}

Spectrum load_spectrum(std::vector<std::pair<double, double>> table, int grid_points) {
    require(table.size() >= 2, "spectrum table needs at least two rows");
    require(grid_points >= 2, "spectrum grid needs at least two points");
    for (const auto& [wl, value] : table) {
        require(std::isfinite(wl) && wl > 0.0, "spectrum table wavelengths must be positive");
        require(std::isfinite(value) && value >= 0.0, "spectrum table intensities must be non-negative");
    }
    std::sort(table.begin(), table.end());
    for (std::size_t i = 1; i < table.size(); ++i) {
        require(table[i].first > table[i - 1].first, "spectrum table has duplicate wavelengths");
    }

    // Increasing angular frequency = decreasing wavelength.
    const std::size_t n = table.size();
    std::vector<double> w(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& [wl, value] = table[n - 1 - i];
        w[i] = angular_frequency_from_nm(wl);
        v[i] = value * wl * wl;
    }

    Eigen::ArrayXd omega = Eigen::ArrayXd::LinSpaced(grid_points, w.front(), w.back());
    Eigen::ArrayXd density(grid_points);
    std::size_t j = 0;
    for (Eigen::Index i = 0; i < grid_points; ++i) {
        const double x = omega(i);
        while (j + 2 < n && w[j + 1] < x) ++j;
        const double t = std::clamp((x - w[j]) / (w[j + 1] - w[j]), 0.0, 1.0);
        density(i) = (1.0 - t) * v[j] + t * v[j + 1];
    }
    return Spectrum::normalized(std::move(omega), std::move(density), "tabulated");
}

Spectrum make_spectrum(const SourceSpec& source) {
    const auto& p = source.spectrum_params;
    switch (source.spectrum_mode) {
        case SpectrumMode::degenerate:
            return make_degenerate_spectrum(p.center_wavelength_nm, p.fwhm_nm, p.grid_points);
        case SpectrumMode::split:
            return make_split_spectrum(p.center_wavelength_nm, p.lobe_separation_nm, p.lobe_fwhm_nm, p.grid_points);
        case SpectrumMode::tabulated:
            return load_spectrum(p.table, p.grid_points);
    }
    throw InvalidInput("unknown spectrum mode");
}

double pair_rate(double spdc_power_w, const Spectrum& spectrum) {
    require(spdc_power_w >= 0.0, "SPDC power must be non-negative");
    return spdc_power_w / (2.0 * hbar * spectrum.mean_omega());
}

double pair_rate(const SourceSpec& source) {
    source.validate();
    return pair_rate(source.spdc_power_w, make_spectrum(source));
}

PairsPerMode pairs_per_mode(double pairs_per_second, const Spectrum& spectrum) {
    const double bandwidth = spectrum.fwhm_hz();
    require(bandwidth > 0.0, "pairs per mode needs a spectrum with finite non-zero FWHM");
    PairsPerMode out;
    out.value = pairs_per_second / bandwidth;
    out.exceeds_single_pair_limit = out.value >= 1.0;
    return out;
}

PairsPerMode pairs_per_mode(const SourceSpec& source, const Spectrum& spectrum) {
    source.validate();
    return pairs_per_mode(pair_rate(source.spdc_power_w, spectrum), spectrum);
}

}  // namespace biphoton
