#include "biphoton/analysis.hpp"

#include "biphoton/error.hpp"
#include "biphoton/units.hpp"

#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/NonLinearOptimization>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

namespace biphoton {

namespace {

constexpr double kFourLn2 = 2.772588722239781;

std::vector<std::complex<double>> dft(const Eigen::ArrayXd& x) {
    std::vector<double> in(x.data(), x.data() + x.size());
    std::vector<std::complex<double>> out;
    Eigen::FFT<double> fft;
    fft.fwd(out, in);
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double upper = *mid;
    return 0.5 * (upper + *std::max_element(v.begin(), mid));
}

// Moving average whose kernel is the overlap of each sample cell with a box `width` samples
// long, so non-integer widths average exactly one period. Edges renormalize.
Eigen::ArrayXd boxcar(const Eigen::ArrayXd& x, double width) {
    if (width <= 1.0) return x;
    const double half = width / 2.0;
    const auto reach = static_cast<Eigen::Index>(std::ceil(half - 0.5));
    std::vector<double> kernel(static_cast<std::size_t>(2 * reach + 1));
    for (Eigen::Index j = -reach; j <= reach; ++j) {
        const double lo = std::max(static_cast<double>(j) - 0.5, -half);
        const double hi = std::min(static_cast<double>(j) + 0.5, half);
        kernel[static_cast<std::size_t>(j + reach)] = std::max(0.0, hi - lo);
    }
    const Eigen::Index n = x.size();
    Eigen::ArrayXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double sum = 0.0, weight = 0.0;
        for (Eigen::Index j = -reach; j <= reach; ++j) {
            const Eigen::Index k = i + j;
            if (k < 0 || k >= n) continue;
            const double w = kernel[static_cast<std::size_t>(j + reach)];
            sum += w * x(k);
            weight += w;
        }
        out(i) = sum / weight;
    }
    return out;
}

double dominant_frequency_hz(const Interferogram& ig) {
    const FrequencySpectrumEstimate est = interferogram_to_spectrum(ig, Window::hann, true);
    Eigen::Index best = 0;
    est.magnitude.tail(est.magnitude.size() - 1).maxCoeff(&best);
    return est.frequencies_hz(best + 1);
}

// Highest-frequency local maximum above 10% of the largest non-DC bin: the persistent fringe.
double persistent_fringe_hz(const Interferogram& ig) {
    const FrequencySpectrumEstimate est = interferogram_to_spectrum(ig, Window::hann, true);
    const Eigen::ArrayXd& m = est.magnitude;
    const double top = m.tail(m.size() - 1).maxCoeff();
    for (Eigen::Index i = m.size() - 2; i >= 1; --i) {
        if (m(i) >= 0.1 * top && m(i) >= m(i - 1) && m(i) >= m(i + 1)) return est.frequencies_hz(i);
    }
    return dominant_frequency_hz(ig);
}

struct GaussianSumFunctor {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    Eigen::ArrayXd x;
    Eigen::ArrayXd y;
    int n_params = 0;

    int inputs() const { return n_params; }
    int values() const { return static_cast<int>(x.size()); }

    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& f) const {
        Eigen::ArrayXd model = Eigen::ArrayXd::Zero(x.size());
        for (int j = 0; j < n_params / 3; ++j) {
            const double w = p(3 * j + 2);
            model += p(3 * j) * (-kFourLn2 * (x - p(3 * j + 1)).square() / (w * w)).exp();
        }
        f = (model - y).matrix();
        return 0;
    }

    int df(const Eigen::VectorXd& p, Eigen::MatrixXd& jac) const {
        jac.resize(x.size(), n_params);
        for (int j = 0; j < n_params / 3; ++j) {
            const double a = p(3 * j), c = p(3 * j + 1), w = p(3 * j + 2);
            const Eigen::ArrayXd d = x - c;
            const Eigen::ArrayXd e = (-kFourLn2 * d.square() / (w * w)).exp();
            jac.col(3 * j) = e.matrix();
            jac.col(3 * j + 1) = (a * e * 2.0 * kFourLn2 * d / (w * w)).matrix();
            jac.col(3 * j + 2) = (a * e * 2.0 * kFourLn2 * d.square() / (w * w * w)).matrix();
        }
        return 0;
    }
};

}  // namespace

std::string to_string(Window window) { return window == Window::hann ? "hann" : "none"; }

Window window_from_string(const std::string& text) {
    if (text == "hann") return Window::hann;
    if (text == "none") return Window::none;
    throw InvalidInput("unknown window '" + text + "' (expected none or hann)");
}

Eigen::Index FrequencySpectrumEstimate::bin_of(double hz) const {
    const double bw = bin_width_hz();
    if (bw <= 0.0) return 0;
    const auto k = static_cast<Eigen::Index>(std::llround((hz - frequencies_hz(0)) / bw));
    return std::clamp<Eigen::Index>(k, 0, frequencies_hz.size() - 1);
}

FrequencySpectrumEstimate interferogram_to_spectrum(const Interferogram& ig, Window window, bool detrend) {
    const Eigen::Index n = ig.values.size();
    require(n >= 128, "spectral estimate needs at least 128 delay points");
    require(grid_nonuniformity(ig.scan.delays()) < 1e-6, "spectral estimate needs a uniform delay grid");

    Eigen::ArrayXd x = ig.values;
    if (detrend) x -= x.mean();
    Eigen::ArrayXd w = Eigen::ArrayXd::Ones(n);
    if (window == Window::hann) {
        for (Eigen::Index i = 0; i < n; ++i) {
            w(i) = 0.5 * (1.0 - std::cos(two_pi * static_cast<double>(i) / static_cast<double>(n - 1)));
        }
    }
    const auto spectrum = dft(x * w);
    const Eigen::Index half = n / 2;
    const double dt_s = ig.scan.step() * femto;
    const double wsum = w.sum();

    FrequencySpectrumEstimate est;
    est.source_channel = ig.channel;
    est.frequencies_hz.resize(half + 1);
    est.magnitude.resize(half + 1);
    for (Eigen::Index k = 0; k <= half; ++k) {
        est.frequencies_hz(k) = static_cast<double>(k) / (static_cast<double>(n) * dt_s);
        const double scale = (k == 0 || 2 * k == n) ? 1.0 : 2.0;
        est.magnitude(k) = scale * std::abs(spectrum[static_cast<std::size_t>(k)]) / wsum;
    }
    return est;
}

Eigen::ArrayXd evaluate_peaks(const std::vector<GaussianPeak>& peaks, const Eigen::ArrayXd& hz) {
    Eigen::ArrayXd out = Eigen::ArrayXd::Zero(hz.size());
    for (const auto& p : peaks) {
        out += p.amplitude * (-kFourLn2 * (hz - p.center_hz).square() / (p.fwhm_hz * p.fwhm_hz)).exp();
    }
    return out;
}

GaussianFit fit_gaussians(const FrequencySpectrumEstimate& spec, int n_peaks, const FitOptions& options,
                          const std::optional<std::vector<GaussianPeak>>& init) {
    require(n_peaks >= 1 && n_peaks <= 6, "number of peaks must be between 1 and 6");
    require(options.max_iterations > 0, "iteration limit must be positive");
    const Eigen::Index m = spec.frequencies_hz.size();
    Eigen::Index lo = 1, hi = m - 1;
    if (options.min_hz) lo = std::max<Eigen::Index>(lo, spec.bin_of(*options.min_hz));
    if (options.max_hz) hi = std::min<Eigen::Index>(hi, spec.bin_of(*options.max_hz));
    const Eigen::Index count = hi - lo + 1;
    require(count >= 3 * n_peaks, "fit band has fewer bins than fit parameters");

    // Work in THz with unit peak height for conditioning.
    GaussianSumFunctor f;
    f.x = spec.frequencies_hz.segment(lo, count) * 1e-12;
    const Eigen::ArrayXd y_raw = spec.magnitude.segment(lo, count);
    const double y_scale = y_raw.maxCoeff() > 0.0 ? y_raw.maxCoeff() : 1.0;
    f.y = y_raw / y_scale;
    f.n_params = 3 * n_peaks;
    const double dx = f.x(1) - f.x(0);

    GaussianFit fit;
    Eigen::VectorXd p(f.n_params);
    if (init) {
        require(static_cast<int>(init->size()) == n_peaks, "initial guess must list one entry per peak");
        for (int j = 0; j < n_peaks; ++j) {
            p(3 * j) = (*init)[static_cast<std::size_t>(j)].amplitude / y_scale;
            p(3 * j + 1) = (*init)[static_cast<std::size_t>(j)].center_hz * 1e-12;
            p(3 * j + 2) = (*init)[static_cast<std::size_t>(j)].fwhm_hz * 1e-12;
        }
    } else {
        std::vector<Eigen::Index> maxima;
        for (Eigen::Index i = 1; i + 1 < count; ++i) {
            if (f.y(i) > f.y(i - 1) && f.y(i) >= f.y(i + 1)) maxima.push_back(i);
        }
        std::stable_sort(maxima.begin(), maxima.end(), [&](Eigen::Index a, Eigen::Index b) { return f.y(a) > f.y(b); });
        if (static_cast<int>(maxima.size()) >= n_peaks) {
            maxima.resize(static_cast<std::size_t>(n_peaks));
            std::sort(maxima.begin(), maxima.end());
            for (int j = 0; j < n_peaks; ++j) {
                const Eigen::Index c = maxima[static_cast<std::size_t>(j)];
                Eigen::Index l = c, r = c;
                while (l > 0 && f.y(l) > 0.5 * f.y(c)) --l;
                while (r + 1 < count && f.y(r) > 0.5 * f.y(c)) ++r;
                p(3 * j) = f.y(c);
                p(3 * j + 1) = f.x(c);
                p(3 * j + 2) = std::max(2.0 * dx, static_cast<double>(r - l) * dx);
            }
        } else {
            fit.quantile_initialization = true;
            Eigen::ArrayXd cumulative(count);
            std::partial_sum(f.y.data(), f.y.data() + count, cumulative.data());
            const double total = cumulative(count - 1) > 0.0 ? cumulative(count - 1) : 1.0;
            for (int j = 0; j < n_peaks; ++j) {
                const double q = (static_cast<double>(j) + 0.5) / n_peaks * total;
                Eigen::Index c = 0;
                while (c + 1 < count && cumulative(c) < q) ++c;
                p(3 * j) = std::max(f.y(c), 1e-3);
                p(3 * j + 1) = f.x(c);
                p(3 * j + 2) = std::max(2.0 * dx, (f.x(count - 1) - f.x(0)) / (2.0 * n_peaks));
            }
        }
    }

    Eigen::LevenbergMarquardt<GaussianSumFunctor, double> lm(f);
    lm.parameters.maxfev = 2 * options.max_iterations;
    lm.parameters.xtol = options.step_tolerance;
    const auto status = lm.minimize(p);
    fit.iterations = static_cast<int>(lm.iter);
    fit.converged = status == Eigen::LevenbergMarquardtSpace::RelativeReductionTooSmall ||
                    status == Eigen::LevenbergMarquardtSpace::RelativeErrorTooSmall ||
                    status == Eigen::LevenbergMarquardtSpace::RelativeErrorAndReductionTooSmall ||
                    status == Eigen::LevenbergMarquardtSpace::CosinusTooSmall ||
                    status == Eigen::LevenbergMarquardtSpace::XtolTooSmall ||
                    status == Eigen::LevenbergMarquardtSpace::FtolTooSmall;

    for (int j = 0; j < n_peaks; ++j) {
        fit.peaks.push_back({p(3 * j + 1) * 1e12, std::abs(p(3 * j + 2)) * 1e12, std::abs(p(3 * j)) * y_scale});
    }
    std::sort(fit.peaks.begin(), fit.peaks.end(),
              [](const GaussianPeak& a, const GaussianPeak& b) { return a.center_hz < b.center_hz; });

    const Eigen::ArrayXd model = evaluate_peaks(fit.peaks, spec.frequencies_hz.segment(lo, count));
    const double norm = std::sqrt(y_raw.square().sum());
    fit.relative_residual = norm > 0.0 ? std::sqrt((y_raw - model).square().sum()) / norm : 1.0;
    fit.residual_flag = !fit.converged || fit.relative_residual > options.residual_threshold;
    return fit;
}

Spectrum spectrum_from_peaks(const std::vector<GaussianPeak>& peaks, int grid_points) {
    require(!peaks.empty(), "need at least one peak");
    require(grid_points >= 64, "spectrum grid needs at least 64 points");
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& p : peaks) {
        require(p.fwhm_hz > 0.0 && p.amplitude >= 0.0 && p.center_hz > 0.0, "peaks need positive center and width");
        lo = std::min(lo, p.center_hz - 4.0 * p.fwhm_hz);
        hi = std::max(hi, p.center_hz + 4.0 * p.fwhm_hz);
    }
    lo = std::max(lo, 1e-3 * hi);
    const Eigen::ArrayXd hz = Eigen::ArrayXd::LinSpaced(grid_points, lo, hi);
    return Spectrum::normalized(hz * two_pi, evaluate_peaks(peaks, hz), "fitted");
}

double noise_floor(const Interferogram& ig) {
    const Eigen::Index n = ig.values.size();
    if (n < 20) return 0.0;
    const Eigen::ArrayXd x = ig.values - ig.values.mean();
    const auto spectrum = dft(x);
    const Eigen::Index half = n / 2;
    const auto start = static_cast<Eigen::Index>(std::floor(0.9 * static_cast<double>(half)));
    double power = 0.0;
    for (Eigen::Index k = start; k <= half; ++k) power += std::norm(spectrum[static_cast<std::size_t>(k)]);
    return std::sqrt(power / static_cast<double>(half - start + 1) / static_cast<double>(n));
}

VisibilityResult visibility(const Interferogram& ig, const VisibilityOptions& options) {
    require(options.region_envelope_widths > 0.0, "visibility region must be positive");
    require(options.smoothing_fraction >= 0.0 && options.smoothing_fraction < 1.0,
            "smoothing must be a fraction of a fringe period");
    const Eigen::ArrayXd& tau = ig.scan.delays();
    const Eigen::Index n = ig.values.size();
    const double dt = ig.scan.step();

    VisibilityResult out;
    out.noise_floor = noise_floor(ig);
    // White noise alone spans about 2 sqrt(2 ln n) standard deviations.
    const double range = ig.values.maxCoeff() - ig.values.minCoeff();
    const double noise_range = 2.0 * std::sqrt(2.0 * std::log(std::max<double>(2.0, static_cast<double>(n))));
    if (range <= (noise_range + options.flat_noise_factor) * out.noise_floor ||
        range <= 1e-12 * std::abs(ig.values.maxCoeff())) {
        out.max = ig.values.maxCoeff();
        out.min = ig.values.minCoeff();
        return out;
    }

    out.fringe_period_fs = n >= 128 ? 1.0 / (dominant_frequency_hz(ig) * femto) : 0.0;
    const double period_pts = out.fringe_period_fs / dt;

    // Envelope: fringe-averaged deviation from the far-delay level.
    const auto tail = std::max<Eigen::Index>(1, n / 5);
    const double far = (ig.values.head(tail).sum() + ig.values.tail(tail).sum()) / static_cast<double>(2 * tail);
    const Eigen::ArrayXd envelope = boxcar((ig.values - far).abs(), period_pts);
    out.envelope_width_fs = std::max(full_width_half_max(tau, envelope), 2.0 * out.fringe_period_fs);
    if (out.envelope_width_fs <= 0.0) out.envelope_width_fs = tau(n - 1) - tau(0);

    const Eigen::ArrayXd trace =
        options.smoothing_fraction > 0.0 ? boxcar(ig.values, options.smoothing_fraction * period_pts) : ig.values;
    Eigen::Index peak = 0;
    trace.maxCoeff(&peak);
    const double reach = options.region_envelope_widths * out.envelope_width_fs;
    out.max = -std::numeric_limits<double>::infinity();
    out.min = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(tau(i) - tau(peak)) > reach) continue;
        out.max = std::max(out.max, trace(i));
        out.min = std::min(out.min, trace(i));
    }
    if (out.max + out.min <= 0.0) return out;
    out.value = std::clamp((out.max - out.min) / (out.max + out.min), 0.0, 1.0);
    return out;
}

CorrelationTimeResult correlation_time(const Interferogram& ig, const std::optional<PumpSpec>& pump,
                                       const CorrelationTimeOptions& options) {
    require(options.tail_fraction > 0.0 && options.tail_fraction < 0.5, "tail fraction must be in (0, 0.5)");
    const Eigen::ArrayXd& tau = ig.scan.delays();
    const Eigen::Index n = ig.values.size();
    const double dt = ig.scan.step();

    CorrelationTimeResult out;
    out.noise_floor = noise_floor(ig);
    if (pump) {
        pump->validate();
        out.pump_frequency_hz = speed_of_light / (pump->center_wavelength_nm * nano);
    } else {
        require(n >= 128, "estimating the pump frequency needs at least 128 delay points");
        out.pump_frequency_hz = persistent_fringe_hz(ig);
    }
    const double wp = two_pi * out.pump_frequency_hz * femto; // rad/fs

    // Far-delay level plus persistent pump fringe, fitted on both tails.
    const auto tail = std::max<Eigen::Index>(3, static_cast<Eigen::Index>(std::floor(options.tail_fraction * n)));
    require(2 * tail < n, "trace too short for the requested tails");
    Eigen::MatrixXd design(2 * tail, 3);
    Eigen::VectorXd rhs(2 * tail);
    for (Eigen::Index r = 0; r < 2 * tail; ++r) {
        const Eigen::Index i = r < tail ? r : n - 2 * tail + r;
        design(r, 0) = 1.0;
        design(r, 1) = std::cos(wp * tau(i));
        design(r, 2) = std::sin(wp * tau(i));
        rhs(r) = ig.values(i);
    }
    const Eigen::Vector3d coef = design.colPivHouseholderQr().solve(rhs);
    const Eigen::ArrayXd persistent = coef(0) + coef(1) * (wp * tau).cos() + coef(2) * (wp * tau).sin();

    // Two passes of a one-fringe box (a triangle) leave no first-order fringe leakage.
    const double box_pts = (2.0 * two_pi / wp) / dt;
    const Eigen::ArrayXd envelope = boxcar(boxcar(ig.values - persistent, box_pts), box_pts);
    out.envelope_peak = envelope.maxCoeff();
    const double threshold = std::max(options.noise_factor * out.noise_floor / std::sqrt(std::max(box_pts, 1.0)),
                                      1e-9 * std::abs(coef(0)));
    if (!(out.envelope_peak > threshold)) return out;

    out.measured_fwhm_fs = full_width_half_max(tau, envelope);
    if (out.measured_fwhm_fs <= 0.0) return out;
    const double box_var = 2.0 * (box_pts * box_pts + 1.0) / 12.0 * dt * dt;
    const double corrected = out.measured_fwhm_fs * out.measured_fwhm_fs - 8.0 * std::log(2.0) * box_var;
    if (corrected > 0.0) out.fwhm_fs = std::sqrt(corrected);
    return out;
}

OverlapResult spectral_overlap(const Spectrum& a, const Spectrum& b) {
    const double lo = std::max(a.omega()(0), b.omega()(0));
    const double hi = std::min(a.omega()(a.size() - 1), b.omega()(b.size() - 1));
    if (hi <= lo) return {0.0, true};
    const double ia = a.integral(), ib = b.integral();
    if (ia <= 0.0 || ib <= 0.0) return {0.0, false};
    const Eigen::Index n = std::max(a.size(), b.size());
    const Eigen::ArrayXd grid = Eigen::ArrayXd::LinSpaced(n, lo, hi);
    const Eigen::ArrayXd product = (a.density_at(grid) / ia * b.density_at(grid) / ib).sqrt();
    return {std::clamp(trapezoid(product, grid(1) - grid(0)), 0.0, 1.0), false};
}

std::string to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::one_photon_scatter: return "one_photon_scatter";
        case Verdict::two_photon_fluorescence: return "two_photon_fluorescence";
        case Verdict::indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

ClassificationReport classify_90deg(const Interferogram& ig_90, const std::optional<Spectrum>& spec_90,
                                    const Spectrum& input_spec, const std::optional<Spectrum>& fluor_spec,
                                    const PumpSpec& pump, const ClassificationThresholds& thresholds) {
    require(thresholds.pump_ratio > 0.0 && thresholds.one_photon_ratio > 0.0, "ratio thresholds must be positive");
    require(thresholds.pump_band_bins >= 0 && thresholds.background_inner_bins > thresholds.pump_band_bins &&
                thresholds.background_outer_bins > thresholds.background_inner_bins,
            "background bins must lie outside the pump band");
    pump.validate();

    ClassificationReport report;
    report.thresholds_used = thresholds;
    const FrequencySpectrumEstimate est = interferogram_to_spectrum(ig_90, Window::hann, true);
    const Eigen::ArrayXd& m = est.magnitude;
    const Eigen::Index bins = m.size();
    const double nu_p = speed_of_light / (pump.center_wavelength_nm * nano);
    require(nu_p + thresholds.background_outer_bins * est.bin_width_hz() <= est.frequencies_hz(bins - 1),
            "delay step too coarse to resolve the pump frequency");

    auto ratio = [](double peak, double background) {
        if (background > 0.0) return peak / background;
        return peak > 0.0 ? std::numeric_limits<double>::max() : 0.0;
    };

    const Eigen::Index kp = est.bin_of(nu_p);
    double band = 0.0;
    std::vector<double> background;
    for (Eigen::Index k = 1; k < bins; ++k) {
        const Eigen::Index d = std::abs(k - kp);
        if (d <= thresholds.pump_band_bins) band = std::max(band, m(k));
        if (d >= thresholds.background_inner_bins && d <= thresholds.background_outer_bins) background.push_back(m(k));
    }
    report.pump_ratio = ratio(band, median(background));
    report.pump_fringe_present = report.pump_ratio > thresholds.pump_ratio;
    report.pump_score = report.pump_ratio / (report.pump_ratio + thresholds.pump_ratio);

    const double nu_lo = input_spec.omega()(0) / two_pi;
    const double nu_hi = input_spec.omega()(input_spec.size() - 1) / two_pi;
    double in_band = 0.0;
    std::vector<double> all;
    for (Eigen::Index k = 1; k < bins; ++k) {
        all.push_back(m(k));
        if (est.frequencies_hz(k) >= nu_lo && est.frequencies_hz(k) <= nu_hi) in_band = std::max(in_band, m(k));
    }
    report.one_photon_ratio = ratio(in_band, median(all));
    report.one_photon_fringe_present = report.one_photon_ratio > thresholds.one_photon_ratio;
    report.one_photon_score = report.one_photon_ratio / (report.one_photon_ratio + thresholds.one_photon_ratio);

    if (spec_90) {
        report.spectral_overlap_input = spectral_overlap(*spec_90, input_spec).value;
        if (fluor_spec) report.spectral_overlap_fluorescence = spectral_overlap(*spec_90, *fluor_spec).value;
    }

    if (report.pump_fringe_present && report.spectral_overlap_fluorescence > report.spectral_overlap_input) {
        report.verdict = Verdict::two_photon_fluorescence;
    } else if (!report.pump_fringe_present && report.one_photon_fringe_present &&
               report.spectral_overlap_input > report.spectral_overlap_fluorescence) {
        report.verdict = Verdict::one_photon_scatter;
    }
    return report;
}

}  // namespace biphoton
