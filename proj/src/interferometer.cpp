#include "biphoton/interferometer.hpp"

#include "biphoton/error.hpp"
#include "biphoton/units.hpp"

#include <cmath>
#include <complex>
#include <sstream>

namespace biphoton {

namespace {

using Complex = std::complex<double>;
using ArrayXc = Eigen::ArrayXcd;

/// Sum_i w_i S_i exp(i W_i t), fixed summation order.
Complex spectral_transform(const Eigen::ArrayXd& omega, const Eigen::ArrayXd& weighted, double t) {
    double re = 0.0;
    double im = 0.0;
    for (Eigen::Index i = 0; i < omega.size(); ++i) {
        const double phase = omega(i) * t;
        re += weighted(i) * std::cos(phase);
        im += weighted(i) * std::sin(phase);
    }
    return {re, im};
}

/// Convolves the slowly varying envelope z(t) exp(-i carrier t) with a normalized Gaussian
/// kernel (FWHM in fs) and restores the carrier. The kernel is renormalized at scan edges.
ArrayXc blur_envelope(const ArrayXc& z, double carrier, const Eigen::ArrayXd& t_s, double step_fs, double fwhm_fs) {
    const Eigen::Index n = z.size();
    ArrayXc env(n);
    for (Eigen::Index j = 0; j < n; ++j) env(j) = z(j) * std::polar(1.0, -carrier * t_s(j));

    const double sigma = fwhm_fs / fwhm_per_sigma;
    const auto half = static_cast<Eigen::Index>(std::ceil(4.0 * sigma / step_fs));
    Eigen::ArrayXd kernel(2 * half + 1);
    for (Eigen::Index k = -half; k <= half; ++k) {
        const double x = static_cast<double>(k) * step_fs;
        kernel(k + half) = std::exp(-x * x / (2.0 * sigma * sigma));
    }

    ArrayXc out(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Complex acc{0.0, 0.0};
        double norm = 0.0;
        for (Eigen::Index k = -half; k <= half; ++k) {
            const Eigen::Index m = j + k;
            if (m < 0 || m >= n) continue;
            acc += kernel(k + half) * env(m);
            norm += kernel(k + half);
        }
        out(j) = acc / norm * std::polar(1.0, carrier * t_s(j));
    }
    return out;
}

void check_inputs(const Spectrum& spectrum, const InterferometerSpec& ifo, const DelayScan& scan) {
    ifo.validate();
    require(spectrum.is_normalized(), "interferogram model needs a normalized spectrum");
    const double need = required_half_span_fs(spectrum);
    if (scan.front() > ifo.delay_offset_fs - need || scan.back() < ifo.delay_offset_fs + need) {
        std::ostringstream msg;
        msg << "delay scan too short: needs at least +/-" << need << " fs around the delay offset, got ["
            << scan.front() << ", " << scan.back() << "] fs";
        throw InvalidInput(msg.str());
    }
}

Eigen::ArrayXd shifted_seconds(const DelayScan& scan, double offset_fs) {
    return (scan.delays() - offset_fs) * femto;
}

}  // namespace

DelayScan::DelayScan(Eigen::ArrayXd delays_fs) : delays_(std::move(delays_fs)) {
    require(delays_.size() >= 2, "delay scan needs at least two points");
    require(delays_.allFinite(), "delay scan contains non-finite values");
    for (Eigen::Index i = 1; i < delays_.size(); ++i) {
        require(delays_(i) > delays_(i - 1), "delay scan must be strictly increasing");
    }
    require(grid_nonuniformity(delays_) <= 1e-9, "delay scan must be uniform to 1 part in 1e9");
    step_ = (delays_(size() - 1) - delays_(0)) / static_cast<double>(size() - 1);
}

DelayScan DelayScan::uniform(double start_fs, double stop_fs, double step_fs) {
    require(step_fs > 0.0, "delay step must be positive");
    require(stop_fs > start_fs, "delay scan stop must exceed start");
    const auto n = static_cast<Eigen::Index>(std::floor((stop_fs - start_fs) / step_fs + 0.5)) + 1;
    Eigen::ArrayXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) d(i) = start_fs + static_cast<double>(i) * step_fs;
    return DelayScan(std::move(d));
}

DelayScan DelayScan::centered(double half_span_fs, double step_fs) {
    require(step_fs > 0.0 && half_span_fs > 0.0, "centered scan needs positive span and step");
    const auto half = static_cast<Eigen::Index>(std::ceil(half_span_fs / step_fs - 1e-12));
    Eigen::ArrayXd d(2 * half + 1);
    for (Eigen::Index i = -half; i <= half; ++i) d(i + half) = static_cast<double>(i) * step_fs;
    return DelayScan(std::move(d));
}

std::string to_string(Channel channel) {
    switch (channel) {
        case Channel::coincidence: return "coincidence";
        case Channel::singles: return "singles";
        case Channel::emiccd_90deg: return "emiccd_90deg";
    }
    return "unknown";
}

std::string to_string(Normalization normalization) {
    return normalization == Normalization::raw ? "raw" : "baseline_unit";
}

Channel channel_from_string(const std::string& text) {
    if (text == "coincidence") return Channel::coincidence;
    if (text == "singles") return Channel::singles;
    if (text == "emiccd_90deg") return Channel::emiccd_90deg;
    throw InvalidInput("unknown channel '" + text + "'");
}

Normalization normalization_from_string(const std::string& text) {
    if (text == "raw") return Normalization::raw;
    if (text == "baseline_unit") return Normalization::baseline_unit;
    throw InvalidInput("unknown normalization '" + text + "'");
}

Interferogram::Interferogram(DelayScan scan_, Eigen::ArrayXd values_, Channel channel_, Normalization normalization_)
    : scan(std::move(scan_)), values(std::move(values_)), channel(channel_), normalization(normalization_) {
    require(values.size() == scan.size(), "interferogram values and delays differ in length");
    require(values.allFinite(), "interferogram contains non-finite values");
    require((values >= 0.0).all(), "interferogram values must be non-negative");
}

void InterferometerSpec::validate() const {
    require(splitter_reflectance > 0.0 && splitter_reflectance < 1.0, "splitter reflectance must be in (0, 1)");
    require(interference_suppression >= 0.0 && interference_suppression <= 1.0,
            "interference suppression must be in [0, 1]");
    require(pump_fringe_damping_fs > 0.0, "pump fringe damping time must be positive");
    require(std::isfinite(delay_offset_fs), "delay offset must be finite");
}

double InterferometerSpec::effective_suppression() const {
    return interference_suppression * 4.0 * splitter_reflectance * (1.0 - splitter_reflectance);
}

InterferometerSpec InterferometerSpec::with_fringe_visibility(double visibility) {
    InterferometerSpec spec;
    spec.interference_suppression = suppression_for_visibility(visibility);
    return spec;
}

double suppression_for_visibility(double visibility) {
    require(visibility >= 0.0 && visibility <= 1.0, "visibility must be in [0, 1]");
    if (visibility == 0.0) return 0.0;
    return (1.0 - std::sqrt(1.0 - visibility * visibility)) / visibility;
}

double fringe_visibility_for_suppression(double kappa) { return 2.0 * kappa / (1.0 + kappa * kappa); }

double pump_coherence_damping_fs(const PumpSpec& pump) {
    pump.validate();
    if (pump.linewidth_fwhm_nm == 0.0) return std::numeric_limits<double>::infinity();
    const double sigma_omega =
        two_pi * bandwidth_hz_from_nm(pump.center_wavelength_nm, pump.linewidth_fwhm_nm) / fwhm_per_sigma;
    return std::sqrt(2.0) / sigma_omega / femto;
}

double required_half_span_fs(const Spectrum& spectrum) {
    const double bw = spectrum.fwhm_hz();
    require(bw > 0.0, "spectrum has no resolvable FWHM");
    return 3.0 / bw / femto;
}

Interferogram coincidence_interferogram(const Spectrum& spectrum, const PumpSpec& pump, const InterferometerSpec& ifo,
                                        const DelayScan& scan, const InterferogramOptions& options) {
    pump.validate();
    check_inputs(spectrum, ifo, scan);
    require(options.envelope_broadening_fs >= 0.0, "envelope broadening must be non-negative");

    const double kappa = ifo.effective_suppression();
    const double wp = pump.angular_frequency();
    const Eigen::ArrayXd& omega = spectrum.omega();
    const Eigen::ArrayXd weighted = spectrum.weights() * spectrum.density();
    const double m0 = weighted.sum();
    const Eigen::ArrayXd t = shifted_seconds(scan, ifo.delay_offset_fs);
    const Eigen::Index n = scan.size();

    // One-photon terms G and H = e^{i wp t} conj(G); two-photon difference term K(t) = e^{-i wp t} G(2t).
    ArrayXc g(n), h(n), k(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        g(j) = spectral_transform(omega, weighted, t(j));
        h(j) = std::polar(1.0, wp * t(j)) * std::conj(g(j));
        k(j) = std::polar(1.0, -wp * t(j)) * spectral_transform(omega, weighted, 2.0 * t(j));
    }
    if (options.envelope_broadening_fs > 0.0) {
        const double wbar = spectrum.mean_omega();
        g = blur_envelope(g, wbar, t, scan.step(), options.envelope_broadening_fs);
        h = blur_envelope(h, wp - wbar, t, scan.step(), options.envelope_broadening_fs);
        k = blur_envelope(k, 2.0 * wbar - wp, t, scan.step(), options.envelope_broadening_fs);
    }

    const bool damped = std::isfinite(ifo.pump_fringe_damping_fs);
    Eigen::ArrayXd values(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double persistent = m0 * std::cos(wp * t(j));
        if (damped) {
            const double x = t(j) / (ifo.pump_fringe_damping_fs * femto);
            persistent *= std::exp(-x * x);
        }
        const double r = 0.25 * (m0 + kappa * (g(j).real() + h(j).real()) +
                                 0.5 * kappa * kappa * (persistent + k(j).real()));
        values(j) = std::max(r, 0.0);
    }
    if (options.normalization == Normalization::baseline_unit) values /= 0.25 * m0;
    return Interferogram(scan, std::move(values), Channel::coincidence, options.normalization);
}

Interferogram singles_interferogram(const Spectrum& spectrum, const InterferometerSpec& ifo, const DelayScan& scan,
                                    const InterferogramOptions& options) {
    check_inputs(spectrum, ifo, scan);
    require(options.envelope_broadening_fs >= 0.0, "envelope broadening must be non-negative");

    const double kappa = ifo.effective_suppression();
    const Eigen::ArrayXd weighted = spectrum.weights() * spectrum.density();
    const double m0 = weighted.sum();
    const Eigen::ArrayXd t = shifted_seconds(scan, ifo.delay_offset_fs);
    const Eigen::Index n = scan.size();

    ArrayXc g(n);
    for (Eigen::Index j = 0; j < n; ++j) g(j) = spectral_transform(spectrum.omega(), weighted, t(j));
    if (options.envelope_broadening_fs > 0.0) {
        g = blur_envelope(g, spectrum.mean_omega(), t, scan.step(), options.envelope_broadening_fs);
    }

    Eigen::ArrayXd values = (0.5 * (m0 + kappa * g.real())).max(0.0);
    if (options.normalization == Normalization::baseline_unit) values /= 0.5 * m0;
    return Interferogram(scan, std::move(values), Channel::singles, options.normalization);
}

double brute_force_coincidence(const Spectrum& spectrum, const PumpSpec& pump, const InterferometerSpec& ifo,
                               double delay_fs) {
    pump.validate();
    ifo.validate();
    require(spectrum.size() <= 2048, "brute-force oracle is limited to 2048 grid points");

    const double kappa = ifo.effective_suppression();
    const double a = kappa == 0.0 ? 0.0 : (1.0 - std::sqrt(1.0 - kappa * kappa)) / kappa;
    const double wp = pump.angular_frequency();
    const double t = (delay_fs - ifo.delay_offset_fs) * femto;
    const Eigen::ArrayXd w = spectrum.weights();

    double total = 0.0;
    for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
        const double amplitude = std::sqrt(spectrum.density()(i));
        const double omega = spectrum.omega()(i);
        const Complex psi = amplitude * (1.0 + a * std::polar(1.0, omega * t)) *
                            (1.0 + a * std::polar(1.0, (wp - omega) * t)) / 4.0;
        total += w(i) * std::norm(psi);
    }
    const double path_norm = 1.0 + a * a;
    return total * 4.0 / (path_norm * path_norm);
}

}  // namespace biphoton
