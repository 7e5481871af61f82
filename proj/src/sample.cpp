#include "biphoton/sample.hpp"

#include "biphoton/error.hpp"
#include "biphoton/source.hpp"
#include "biphoton/units.hpp"

#include <algorithm>
#include <cmath>

namespace biphoton {

namespace {

constexpr double kTableStartNm = 350.0;
constexpr double kTableStopNm = 1200.0;
constexpr double kTableStepNm = 5.0;

/// Fraction of the far-delay level used to locate the baseline of a raw trace.
double far_baseline(const Interferogram& ig) {
    if (ig.normalization == Normalization::baseline_unit) return 1.0;
    const Eigen::Index n = ig.values.size();
    const Eigen::Index tail = std::max<Eigen::Index>(1, n * 15 / 100);
    const double sum = ig.values.head(tail).sum() + ig.values.tail(tail).sum();
    return sum / static_cast<double>(2 * tail);
}

template <typename F>
WavelengthTable tabulate(F&& f) {
    std::vector<std::pair<double, double>> rows;
    for (double wl = kTableStartNm; wl <= kTableStopNm + 1e-9; wl += kTableStepNm) rows.emplace_back(wl, f(wl));
    return WavelengthTable(std::move(rows));
}

double band(double wl, double center, double fwhm) {
    const double x = (wl - center) / fwhm;
    return std::exp(-4.0 * std::log(2.0) * x * x);
}

/// Absorption-tail shape shared by the R6G one-photon and scattering tables: rises toward the
/// 530 nm absorption band.
double r6g_tail(double wl) { return std::exp(-(wl - 530.0) / 80.0); }

/// Scale that makes the split-spectrum weighted mean of `table` equal `target`.
double scale_to_split_mean(const WavelengthTable& table, double target) {
    const Spectrum split = make_split_spectrum(812.0, 150.0, 30.0, 2048);
    const Eigen::ArrayXd sigma = table.at(split.wavelength_nm());
    const double mean = trapezoid(Eigen::ArrayXd(split.density() * sigma), split.step());
    return target / mean;
}

Spectrum skewed_band_spectrum(double peak_nm, double blue_sigma_nm, double red_sigma_nm, double lo_nm, double hi_nm,
                              double second_peak_nm = 0.0, double second_weight = 0.0) {
    std::vector<std::pair<double, double>> rows;
    for (double wl = lo_nm; wl <= hi_nm + 1e-9; wl += 1.0) {
        auto lobe = [&](double center) {
            const double s = wl < center ? blue_sigma_nm : red_sigma_nm;
            const double x = (wl - center) / s;
            return std::exp(-0.5 * x * x);
        };
        double value = lobe(peak_nm);
        if (second_weight > 0.0) value += second_weight * lobe(second_peak_nm);
        rows.emplace_back(wl, value);
    }
    return load_spectrum(std::move(rows), 1024);
}

}  // namespace

WavelengthTable::WavelengthTable(std::vector<std::pair<double, double>> rows) : rows_(std::move(rows)) {
    require(!rows_.empty(), "wavelength table needs at least one row");
    std::sort(rows_.begin(), rows_.end());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        require(std::isfinite(rows_[i].first) && rows_[i].first > 0.0, "table wavelengths must be positive");
        require(std::isfinite(rows_[i].second) && rows_[i].second >= 0.0, "table values must be non-negative");
        if (i > 0) require(rows_[i].first > rows_[i - 1].first, "table has duplicate wavelengths");
    }
}

WavelengthTable WavelengthTable::constant(double value) { return WavelengthTable({{1.0, value}}); }

double WavelengthTable::at(double wavelength_nm) const {
    if (rows_.empty()) return 0.0;
    if (wavelength_nm <= rows_.front().first) return rows_.front().second;
    if (wavelength_nm >= rows_.back().first) return rows_.back().second;
    const auto hi = std::upper_bound(rows_.begin(), rows_.end(), wavelength_nm,
                                     [](double x, const auto& row) { return x < row.first; });
    const auto lo = hi - 1;
    const double t = (wavelength_nm - lo->first) / (hi->first - lo->first);
    return (1.0 - t) * lo->second + t * hi->second;
}

Eigen::ArrayXd WavelengthTable::at(const Eigen::ArrayXd& wavelength_nm) const {
    Eigen::ArrayXd out(wavelength_nm.size());
    for (Eigen::Index i = 0; i < wavelength_nm.size(); ++i) out(i) = at(wavelength_nm(i));
    return out;
}

WavelengthTable WavelengthTable::scaled(double factor) const {
    require(factor >= 0.0, "table scale must be non-negative");
    auto rows = rows_;
    for (auto& row : rows) row.second *= factor;
    return rows.empty() ? WavelengthTable{} : WavelengthTable(std::move(rows));
}

void SampleSpec::validate() const {
    require(concentration_mM >= 0.0, "concentration must be non-negative");
    require(pathlength_cm > 0.0, "pathlength must be positive");
    require(sigma_etpa_cm2 >= 0.0, "ETPA cross section must be non-negative");
    require(quantum_yield >= 0.0 && quantum_yield <= 1.0, "quantum yield must be in [0, 1]");
    require(std::isfinite(group_delay_shift_fs), "group delay shift must be finite");
}

void GeometrySpec::validate() const {
    require(collection_efficiency > 0.0 && collection_efficiency <= 1.0, "collection efficiency must be in (0, 1]");
    require(beam_waist_um > 0.0, "beam waist must be positive");
}

double GeometrySpec::beam_area_cm2() const {
    const double w_cm = beam_waist_um * 1e-4;
    return std::numbers::pi * w_cm * w_cm / 4.0;
}

double number_density(const SampleSpec& sample) { return molecules_per_cm3(sample.concentration_mM); }

TransmissionResult transmit(const Spectrum& spectrum, double input_rate, const SampleSpec& sample) {
    sample.validate();
    require(spectrum.is_normalized(), "transmit needs a normalized spectrum");
    require(input_rate >= 0.0, "input rate must be non-negative");

    const Eigen::ArrayXd wl = spectrum.wavelength_nm();
    const Eigen::ArrayXd s1 = sample.sigma_one_photon_cm2.at(wl);
    const Eigen::ArrayXd ss = sample.sigma_scatter_cm2.at(wl);
    const Eigen::ArrayXd total = s1 + ss;
    const double column = number_density(sample) * sample.pathlength_cm;

    Eigen::ArrayXd transmittance = (-total * column).exp();
    const Eigen::ArrayXd lost = 1.0 - transmittance;
    const Eigen::ArrayXd share = (total > 0.0).select(s1 / total, 0.0);
    Eigen::ArrayXd absorbed = lost * share;
    Eigen::ArrayXd scattered = lost - absorbed;

    const Eigen::ArrayXd passed = spectrum.density() * transmittance;
    const double fraction = trapezoid(passed, spectrum.step());
    TransmissionResult out{fraction > 0.0 ? Spectrum::normalized(spectrum.omega(), passed, spectrum.label() + "+transmitted")
                                          : spectrum,
                           input_rate * fraction, std::move(transmittance), std::move(absorbed), std::move(scattered)};
    return out;
}

std::pair<Spectrum, double> transmit_pairs(const Spectrum& spectrum, double pump_omega, const SampleSpec& sample) {
    sample.validate();
    require(spectrum.is_normalized(), "transmit_pairs needs a normalized spectrum");
    const double column = number_density(sample) * sample.pathlength_cm;
    auto transmittance = [&](double omega) {
        if (omega <= 0.0) return 0.0;
        const double wl = nm_from_angular_frequency(omega);
        return std::exp(-(sample.sigma_one_photon_cm2.at(wl) + sample.sigma_scatter_cm2.at(wl)) * column);
    };
    Eigen::ArrayXd passed(spectrum.size());
    for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
        const double w = spectrum.omega()(i);
        passed(i) = spectrum.density()(i) * transmittance(w) * transmittance(pump_omega - w);
    }
    const double fraction = trapezoid(passed, spectrum.step());
    if (!(fraction > 0.0)) return {spectrum, 0.0};
    return {Spectrum::normalized(spectrum.omega(), passed, spectrum.label() + "+pair-transmitted"), fraction};
}

ScatterResult scatter_signal(const Spectrum& spectrum, double input_rate, const SampleSpec& sample,
                             const GeometrySpec& geom) {
    sample.validate();
    geom.validate();
    require(spectrum.is_normalized(), "scatter_signal needs a normalized spectrum");
    require(input_rate >= 0.0, "input rate must be non-negative");

    const Eigen::ArrayXd sigma = sample.sigma_scatter_cm2.at(spectrum.wavelength_nm());
    const Eigen::ArrayXd weighted = spectrum.density() * sigma;
    const double mean_sigma = trapezoid(weighted, spectrum.step()) / spectrum.integral();
    const double rate =
        geom.collection_efficiency * input_rate * number_density(sample) * sample.pathlength_cm * mean_sigma;

    if (!(mean_sigma > 0.0)) return ScatterResult{spectrum, 0.0, 0.0, false};
    return ScatterResult{Spectrum::normalized(spectrum.omega(), weighted, "scatter"), rate, mean_sigma, true};
}

EtpaResult etpa_fluorescence_signal(double pair_rate, double beam_waist_um, const SampleSpec& sample,
                                    const GeometrySpec& geom, const Interferogram& coincidence) {
    sample.validate();
    geom.validate();
    require(pair_rate >= 0.0, "pair rate must be non-negative");
    require(beam_waist_um > 0.0, "beam waist must be positive");

    const double w_cm = beam_waist_um * 1e-4;
    const double area = std::numbers::pi * w_cm * w_cm / 4.0;
    const double flux_density = pair_rate / area;
    const double per_molecule = flux_density * sample.sigma_etpa_cm2;
    const double molecules_in_beam = number_density(sample) * sample.pathlength_cm * area;
    const double rate = geom.collection_efficiency * sample.quantum_yield * per_molecule * molecules_in_beam;

    const double baseline = far_baseline(coincidence);
    require(baseline > 0.0, "coincidence interferogram has no far-delay baseline");
    Eigen::ArrayXd trace = coincidence.values * (rate / baseline);
    return EtpaResult{sample.fluorescence,
                      Interferogram(coincidence.scan, std::move(trace), Channel::emiccd_90deg, Normalization::raw),
                      rate};
}

std::string to_string(SamplePreset preset) {
    switch (preset) {
        case SamplePreset::r6g_5mM: return "r6g_5mM";
        case SamplePreset::r6g_110mM: return "r6g_110mM";
        case SamplePreset::ethanol_blank: return "ethanol_blank";
        case SamplePreset::zntpp: return "zntpp";
    }
    return "unknown";
}

SamplePreset sample_preset_from_string(const std::string& text) {
    for (const auto p : all_sample_presets()) {
        if (to_string(p) == text) return p;
    }
    throw InvalidInput("unknown sample preset '" + text + "' (expected r6g_5mM, r6g_110mM, ethanol_blank or zntpp)");
}

const std::vector<SamplePreset>& all_sample_presets() {
    static const std::vector<SamplePreset> presets{SamplePreset::r6g_5mM, SamplePreset::r6g_110mM,
                                                   SamplePreset::ethanol_blank, SamplePreset::zntpp};
    return presets;
}

Spectrum r6g_fluorescence_spectrum() {
    return skewed_band_spectrum(590.0, 15.0, 28.0, 500.0, 800.0).relabeled("r6g_fluorescence");
}

SampleSpec preset_sample(SamplePreset preset) {
    SampleSpec s;
    s.name = to_string(preset);
    s.pathlength_cm = 1.0;

    switch (preset) {
        case SamplePreset::r6g_5mM:
        case SamplePreset::r6g_110mM: {
            // Both tables share the absorption-tail shape; each is scaled to a 2e-21 cm^2 mean
            // under the split spectrum, so the total attenuation mean is 4e-21 cm^2.
            const WavelengthTable tail = tabulate(r6g_tail);
            const WavelengthTable scatter = tail.scaled(scale_to_split_mean(tail, 2e-21));
            const double tail_scale = scale_to_split_mean(tail, 2e-21);
            s.sigma_scatter_cm2 = scatter;
            s.sigma_one_photon_cm2 =
                tabulate([&](double wl) { return 4e-16 * band(wl, 530.0, 45.0) + tail_scale * r6g_tail(wl); });
            s.fluorescence = r6g_fluorescence_spectrum();
            s.group_delay_shift_fs = 1.0;
            if (preset == SamplePreset::r6g_5mM) {
                s.concentration_mM = 5.0;
                s.quantum_yield = 0.95;
            } else {
                // Ten times the 5 mM fluorescence after self-absorption and quantum-yield loss.
                s.concentration_mM = 110.0;
                s.quantum_yield = 0.95 * 10.0 / 22.0;
            }
            break;
        }
        case SamplePreset::ethanol_blank:
            s.concentration_mM = 0.0;
            s.sigma_one_photon_cm2 = WavelengthTable::constant(0.0);
            s.sigma_scatter_cm2 = WavelengthTable::constant(0.0);
            s.quantum_yield = 0.0;
            break;
        case SamplePreset::zntpp:
            s.concentration_mM = 1.0;
            s.sigma_one_photon_cm2 =
                tabulate([](double wl) { return 5e-16 * band(wl, 420.0, 15.0) + 3e-17 * band(wl, 550.0, 20.0); });
            s.sigma_scatter_cm2 = WavelengthTable::constant(1e-26);
            s.fluorescence =
                skewed_band_spectrum(600.0, 10.0, 14.0, 560.0, 720.0, 650.0, 0.6).relabeled("zntpp_fluorescence");
            s.quantum_yield = 0.03;
            s.group_delay_shift_fs = 0.5;
            break;
    }
    return s;
}

}  // namespace biphoton
