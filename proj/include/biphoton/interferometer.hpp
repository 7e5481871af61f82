#pragma once

#include "biphoton/source.hpp"
#include "biphoton/spectrum.hpp"

#include <Eigen/Dense>

#include <limits>
#include <string>

namespace biphoton {

/// Uniform, strictly increasing arm-delay grid in fs.
class DelayScan {
 public:
    explicit DelayScan(Eigen::ArrayXd delays_fs);
    /// Points start, start + step, ... up to and including stop (within half a step).
    static DelayScan uniform(double start_fs, double stop_fs, double step_fs);
    static DelayScan centered(double half_span_fs, double step_fs);

    const Eigen::ArrayXd& delays() const { return delays_; }
    double step() const { return step_; }
    Eigen::Index size() const { return delays_.size(); }
    double front() const { return delays_(0); }
    double back() const { return delays_(size() - 1); }

 private:
    Eigen::ArrayXd delays_;
    double step_ = 0.0;
};

enum class Channel { coincidence, singles, emiccd_90deg };
enum class Normalization { raw, baseline_unit };

std::string to_string(Channel channel);
std::string to_string(Normalization normalization);
Channel channel_from_string(const std::string& text);
Normalization normalization_from_string(const std::string& text);

struct Interferogram {
    DelayScan scan;
    Eigen::ArrayXd values;
    Channel channel = Channel::coincidence;
    Normalization normalization = Normalization::raw;

    Interferogram(DelayScan scan_, Eigen::ArrayXd values_, Channel channel_, Normalization normalization_);
};

struct InterferometerSpec {
    double splitter_reflectance = 0.5;
    /// Cosine weight kappa of each one-photon path term; 0 models the quarter-wave plate
    /// rotated to destroy interference.
    double interference_suppression = 1.0;
    double pump_fringe_damping_fs = std::numeric_limits<double>::infinity();
    double delay_offset_fs = 0.0;

    void validate() const;
    /// kappa scaled by the beamsplitter balance factor 4 R (1 - R).
    double effective_suppression() const;

    /// Spec whose central coincidence fringes have visibility V: kappa = (1 - sqrt(1 - V^2)) / V.
    static InterferometerSpec with_fringe_visibility(double visibility);
};

/// Inverse of V(kappa) = 2 kappa / (1 + kappa^2), the near-zero-delay fringe contrast of the
/// coincidence model.
double suppression_for_visibility(double visibility);
double fringe_visibility_for_suppression(double kappa);

/// Gaussian damping time T for exp(-(tau/T)^2) obtained by averaging cos(omega_p tau) over the
/// pump lineshape. Infinite for zero linewidth.
double pump_coherence_damping_fs(const PumpSpec& pump);

struct InterferogramOptions {
    double envelope_broadening_fs = 0.0;
    Normalization normalization = Normalization::baseline_unit;
};

/// Minimum half-span (fs) a scan must cover on each side of zero delay: 3 / FWHM(Hz).
double required_half_span_fs(const Spectrum& spectrum);

/// Two-photon Michelson coincidence rate
///   R_c(tau) = 1/4 Int S(W) [1 + k cos(W tau)] [1 + k cos((w_p - W) tau)] dW
/// with the persistent cos(w_p tau) cross term damped by exp(-(tau/T)^2) and the remaining
/// envelopes optionally blurred.
Interferogram coincidence_interferogram(const Spectrum& spectrum, const PumpSpec& pump, const InterferometerSpec& ifo,
                                        const DelayScan& scan, const InterferogramOptions& options = {});

/// One-photon interferogram R_1(tau) = 1/2 [1 + k Re Int S(W) e^{i W tau} dW].
Interferogram singles_interferogram(const Spectrum& spectrum, const InterferometerSpec& ifo, const DelayScan& scan,
                                    const InterferogramOptions& options = {});

/// Independent oracle for one delay: builds the per-frequency output amplitude
/// psi(W) = sqrt(S(W)) (1 + a e^{i W tau}) (1 + a e^{i (w_p - W) tau}) / 4 and sums |psi|^2 with
/// trapezoid weights. `a` is the path amplitude giving fringe weight k = 2a / (1 + a^2); the
/// sum is rescaled by 4 / (1 + a^2)^2 so it is comparable to the raw closed form.
/// Ignores damping and envelope blur. Grid limited to 2048 points.
double brute_force_coincidence(const Spectrum& spectrum, const PumpSpec& pump, const InterferometerSpec& ifo,
                               double delay_fs);

}  // namespace biphoton
