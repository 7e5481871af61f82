#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace biphoton {

enum class XsecMethod { scatter_inversion, transmission_fit };

std::string to_string(XsecMethod method);

struct CrossSectionEstimate {
    double value_cm2 = 0.0;
    double std_error_cm2 = 0.0;
    XsecMethod method = XsecMethod::scatter_inversion;
    /// Set when the coefficient was consistent with zero and value_cm2 is a 2-sigma upper bound.
    bool upper_bound = false;
    /// Every input used, with units in the names.
    std::vector<std::pair<std::string, double>> inputs;
};

/// Relative (fractional) 1-sigma uncertainties of the scatter-inversion inputs.
struct ScatterUncertainties {
    double signal = 0.0;
    double collection_efficiency = 0.0;
    double pair_rate = 0.0;
    double concentration = 0.0;
    double pathlength = 0.0;
};

/// Magnitude guards that catch unit slips (mol/L for mM, m or mm for cm).
inline constexpr double kMinConcentration_mM = 1e-2;
inline constexpr double kMaxConcentration_mM = 2e3;
inline constexpr double kMinPathlength_cm = 1e-3;
inline constexpr double kMaxPathlength_cm = 100.0;

/// sigma = S / (gamma N c 1e-6 l N_A); relative errors add in quadrature.
CrossSectionEstimate sigma_from_scatter(double signal_cps, double collection_efficiency, double pair_rate,
                                        double concentration_mM, double pathlength_cm,
                                        const ScatterUncertainties& uncertainties = {});

/// Input and transmitted photon rates with the 1-sigma uncertainty of each output rate.
struct PowerScan {
    Eigen::ArrayXd input_rate;
    Eigen::ArrayXd output_rate;
    Eigen::ArrayXd output_sigma;

    void validate() const;
};

struct PowerLawFit {
    double alpha = 0.0; // linear loss coefficient (fraction of photons)
    double beta = 0.0;  // quadratic loss coefficient (per photon/s)
    /// Covariance of (alpha, beta) from the weights alone; a clipped coefficient keeps the
    /// variance of the unconstrained solution.
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
    bool alpha_clipped = false;
    bool beta_clipped = false;
    double midpoint_rate = 0.0; // geometric midpoint of the input rates
    double effective_exponent = 0.0;
    double exponent_std_error = 0.0;
    double exponent_ci_low = 0.0;  // 95%
    double exponent_ci_high = 0.0; // 95%
    double chi2 = 0.0;
    int dof = 0;
    /// Some loss is negative by more than 3 sigma.
    bool negative_loss_flag = false;
};

/// Weighted least squares of loss = input - output against alpha N + beta N^2 with alpha, beta >= 0
/// (clip and refit). The effective exponent d log(loss) / d log(N) is taken at the midpoint.
PowerLawFit power_law_fit(const PowerScan& scan);

/// Effective exponent (alpha N + 2 beta N^2) / (alpha N + beta N^2).
double effective_exponent(double alpha, double beta, double rate);

struct TransmissionUncertainties {
    double concentration = 0.0;
    double pathlength = 0.0;
};

/// sigma = -ln(1 - alpha) / (n l) from the linear loss coefficient, which equals alpha / (n l) to
/// first order and is exact for Beer-Lambert attenuation. Returns a 2-sigma upper bound (flagged)
/// when alpha is below twice its standard error.
CrossSectionEstimate sigma_from_transmission(const PowerScan& scan, double concentration_mM, double pathlength_cm,
                                             const TransmissionUncertainties& uncertainties = {});

/// Smallest cross section whose expected counts reach max(1, 5 sqrt(dark_rate T)) in the
/// integration window. Expected counts are gamma * flux_density * area * sigma * n_l * T, where
/// the flux density is pairs/(s cm^2) over the illuminated area.
double detectability_floor(double collection_efficiency, double dark_rate_cps, double integration_s,
                           double flux_density_per_s_cm2, double column_density_per_cm2,
                           double illuminated_area_cm2);

}  // namespace biphoton
