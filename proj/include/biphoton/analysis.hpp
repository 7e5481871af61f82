#pragma once

#include "biphoton/interferometer.hpp"
#include "biphoton/source.hpp"
#include "biphoton/spectrum.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace biphoton {

enum class Window { none, hann };

std::string to_string(Window window);
Window window_from_string(const std::string& text);

/// One-sided DFT magnitude of a delay trace on a physical frequency axis.
struct FrequencySpectrumEstimate {
    Eigen::ArrayXd frequencies_hz;
    Eigen::ArrayXd magnitude;
    Channel source_channel = Channel::coincidence;

    double bin_width_hz() const { return frequencies_hz.size() > 1 ? frequencies_hz(1) - frequencies_hz(0) : 0.0; }
    /// Index of the bin nearest `hz`, clamped to the axis.
    Eigen::Index bin_of(double hz) const;
};

/// Magnitude of the DFT of the (optionally mean-removed, windowed) trace. Bin k sits at
/// k / (N dt). Scaled so a cosine of amplitude A gives a peak near A.
FrequencySpectrumEstimate interferogram_to_spectrum(const Interferogram& ig, Window window = Window::hann,
                                                    bool detrend = true);

struct GaussianPeak {
    double center_hz = 0.0;
    double fwhm_hz = 0.0;
    double amplitude = 0.0;
};

struct FitOptions {
    int max_iterations = 200;
    double step_tolerance = 1e-8;
    /// Relative RMS residual above which the fit is flagged as poor.
    double residual_threshold = 0.2;
    /// Restrict the fit to this band (Hz); unset means the full axis minus the DC bin.
    std::optional<double> min_hz;
    std::optional<double> max_hz;
};

struct GaussianFit {
    std::vector<GaussianPeak> peaks; // sorted by center
    double relative_residual = 0.0;  // ||data - model|| / ||data|| over the fit band
    bool converged = false;
    bool residual_flag = false;
    bool quantile_initialization = false;
    int iterations = 0;
};

/// Least-squares sum of n Gaussians (Levenberg-Marquardt). Starts from the n largest local maxima
/// unless `init` is given; falls back to quantile-spaced centers when there are too few maxima.
GaussianFit fit_gaussians(const FrequencySpectrumEstimate& spec, int n_peaks, const FitOptions& options = {},
                          const std::optional<std::vector<GaussianPeak>>& init = std::nullopt);

/// Sum of the Gaussian peaks evaluated at `hz`.
Eigen::ArrayXd evaluate_peaks(const std::vector<GaussianPeak>& peaks, const Eigen::ArrayXd& hz);

/// Normalized spectrum built from fitted peaks on a grid spanning every peak by +/- 4 FWHM.
Spectrum spectrum_from_peaks(const std::vector<GaussianPeak>& peaks, int grid_points = 2048);

struct VisibilityOptions {
    /// Half-width of the evaluation region around the global maximum, in envelope widths.
    double region_envelope_widths = 2.0;
    /// Boxcar smoothing over this fraction of the dominant fringe period; 0 disables it.
    double smoothing_fraction = 0.0;
    /// The trace counts as flat when max - min exceeds the range expected from white noise by less
    /// than this many noise-floor units.
    double flat_noise_factor = 5.0;
};

struct VisibilityResult {
    std::optional<double> value; // unset when the trace is flat
    double max = 0.0;
    double min = 0.0;
    double noise_floor = 0.0;
    double envelope_width_fs = 0.0;
    double fringe_period_fs = 0.0;
};

/// (max - min) / (max + min) over the central fringe region.
VisibilityResult visibility(const Interferogram& ig, const VisibilityOptions& options = {});

/// White-noise standard deviation estimated from the top 10% of DFT bins.
double noise_floor(const Interferogram& ig);

struct CorrelationTimeOptions {
    /// Fraction of points at each end that defines the far-delay baseline and persistent fringe.
    double tail_fraction = 0.2;
    /// The envelope counts as unresolved below this many noise-floor units.
    double noise_factor = 5.0;
};

struct CorrelationTimeResult {
    std::optional<double> fwhm_fs; // unset when the envelope is not resolved
    /// Width before removing the boxcar contribution.
    double measured_fwhm_fs = 0.0;
    double envelope_peak = 0.0;
    double noise_floor = 0.0;
    double pump_frequency_hz = 0.0;
};

/// FWHM of the fringe-averaged non-persistent component of a coincidence trace. The far-delay
/// baseline and a least-squares cos/sin fit at the pump frequency (from the tails) are removed,
/// the rest is averaged twice over 4 pi / omega_p and the kernel width is taken out in
/// quadrature. Without a pump the persistent-fringe frequency is read from the DFT.
CorrelationTimeResult correlation_time(const Interferogram& ig, const std::optional<PumpSpec>& pump = std::nullopt,
                                       const CorrelationTimeOptions& options = {});

struct OverlapResult {
    double value = 0.0;
    /// The two grids share no frequency range.
    bool disjoint = false;
};

/// Bhattacharyya coefficient Int sqrt(S_a S_b) dW over the shared range, resampled to a common
/// grid with as many points as the finer input.
OverlapResult spectral_overlap(const Spectrum& a, const Spectrum& b);

enum class Verdict { one_photon_scatter, two_photon_fluorescence, indeterminate };

std::string to_string(Verdict verdict);

struct ClassificationThresholds {
    double pump_ratio = 5.0;
    int pump_band_bins = 3;
    int background_inner_bins = 10;
    int background_outer_bins = 40;
    /// Peak-to-median ratio in the input band that counts as one-photon interference.
    double one_photon_ratio = 5.0;
};

struct ClassificationReport {
    Verdict verdict = Verdict::indeterminate;
    bool pump_fringe_present = false;
    double pump_ratio = 0.0;
    double pump_score = 0.0; // ratio / (ratio + threshold)
    bool one_photon_fringe_present = false;
    double one_photon_ratio = 0.0;
    double one_photon_score = 0.0;
    double spectral_overlap_input = 0.0;
    double spectral_overlap_fluorescence = 0.0;
    ClassificationThresholds thresholds_used;
};

/// Scatter when the 90-degree trace lacks the pump-frequency DFT peak, carries one-photon fringes
/// and its spectrum sits closer to the input; fluorescence when the pump peak is present and the
/// spectrum sits closer to the fluorescence band; otherwise indeterminate.
ClassificationReport classify_90deg(const Interferogram& ig_90, const std::optional<Spectrum>& spec_90,
                                    const Spectrum& input_spec, const std::optional<Spectrum>& fluor_spec,
                                    const PumpSpec& pump, const ClassificationThresholds& thresholds = {});

}  // namespace biphoton
