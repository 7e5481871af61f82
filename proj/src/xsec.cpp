#include "biphoton/xsec.hpp"

#include "biphoton/error.hpp"
#include "biphoton/units.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace biphoton {

namespace {

void check_concentration(double c_mM) {
    require(std::isfinite(c_mM) && c_mM >= kMinConcentration_mM && c_mM <= kMaxConcentration_mM,
            "concentration " + std::to_string(c_mM) + " mM is outside [1e-2, 2e3] mM; check units (mM expected)");
}

void check_pathlength(double l_cm) {
    require(std::isfinite(l_cm) && l_cm >= kMinPathlength_cm && l_cm <= kMaxPathlength_cm,
            "path length " + std::to_string(l_cm) + " cm is outside [1e-3, 100] cm; check units (cm expected)");
}

struct LinearFit {
    Eigen::VectorXd coef;
    Eigen::MatrixXd covariance;
    double chi2 = 0.0;
};

// Weighted least squares on columns scaled to unit maximum, then unscaled.
LinearFit weighted_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Eigen::VectorXd& sigma) {
    const Eigen::VectorXd scale = design.cwiseAbs().colwise().maxCoeff().transpose();
    Eigen::MatrixXd a = design;
    for (Eigen::Index j = 0; j < a.cols(); ++j) a.col(j) /= scale(j);
    const Eigen::VectorXd w = sigma.cwiseInverse();
    const Eigen::MatrixXd aw = w.asDiagonal() * a;
    const Eigen::VectorXd yw = w.cwiseProduct(y);
    const Eigen::MatrixXd normal = aw.transpose() * aw;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
    require(lu.isInvertible() && lu.rcond() > 1e-14, "power-law fit design is singular");

    LinearFit fit;
    const Eigen::VectorXd scaled = aw.colPivHouseholderQr().solve(yw);
    const Eigen::MatrixXd inv = lu.inverse();
    fit.coef = scaled.cwiseQuotient(scale);
    fit.covariance = scale.cwiseInverse().asDiagonal() * inv * scale.cwiseInverse().asDiagonal();
    fit.chi2 = (aw * scaled - yw).squaredNorm();
    return fit;
}

}  // namespace

std::string to_string(XsecMethod method) {
    return method == XsecMethod::scatter_inversion ? "scatter_inversion" : "transmission_fit";
}

CrossSectionEstimate sigma_from_scatter(double signal_cps, double collection_efficiency, double pair_rate,
                                        double concentration_mM, double pathlength_cm,
                                        const ScatterUncertainties& u) {
    require(std::isfinite(signal_cps) && signal_cps >= 0.0, "scatter signal must be non-negative");
    require(collection_efficiency > 0.0 && collection_efficiency <= 1.0, "collection efficiency must be in (0, 1]");
    require(std::isfinite(pair_rate) && pair_rate > 0.0, "pair rate must be positive");
    check_concentration(concentration_mM);
    check_pathlength(pathlength_cm);
    require(u.signal >= 0.0 && u.collection_efficiency >= 0.0 && u.pair_rate >= 0.0 && u.concentration >= 0.0 &&
                u.pathlength >= 0.0,
            "relative uncertainties must be non-negative");

    CrossSectionEstimate est;
    est.method = XsecMethod::scatter_inversion;
    est.value_cm2 =
        signal_cps / (collection_efficiency * pair_rate * concentration_mM * 1e-6 * pathlength_cm * avogadro);
    const double rel = std::sqrt(u.signal * u.signal + u.collection_efficiency * u.collection_efficiency +
                                 u.pair_rate * u.pair_rate + u.concentration * u.concentration +
                                 u.pathlength * u.pathlength);
    est.std_error_cm2 = est.value_cm2 * rel;
    est.inputs = {{"signal_cps", signal_cps},
                  {"collection_efficiency", collection_efficiency},
                  {"pair_rate_per_s", pair_rate},
                  {"concentration_mM", concentration_mM},
                  {"pathlength_cm", pathlength_cm},
                  {"signal_rel_uncertainty", u.signal},
                  {"collection_efficiency_rel_uncertainty", u.collection_efficiency},
                  {"pair_rate_rel_uncertainty", u.pair_rate},
                  {"concentration_rel_uncertainty", u.concentration},
                  {"pathlength_rel_uncertainty", u.pathlength}};
    return est;
}

void PowerScan::validate() const {
    require(input_rate.size() == output_rate.size() && input_rate.size() == output_sigma.size(),
            "power scan columns must have equal lengths");
    require(input_rate.size() > 0, "power scan is empty");
    require((input_rate > 0.0).all() && input_rate.allFinite(), "input rates must be positive");
    require((output_rate > 0.0).all() && output_rate.allFinite(), "output rates must be positive");
    require((output_sigma > 0.0).all() && output_sigma.allFinite(), "output uncertainties must be positive");
}

double effective_exponent(double alpha, double beta, double rate) {
    const double linear = alpha * rate, quadratic = beta * rate * rate;
    const double total = linear + quadratic;
    return total > 0.0 ? (linear + 2.0 * quadratic) / total : 0.0;
}

PowerLawFit power_law_fit(const PowerScan& scan) {
    scan.validate();
    const Eigen::Index n = scan.input_rate.size();
    require(n >= 5, "power-law fit needs at least 5 points");
    const double n_min = scan.input_rate.minCoeff(), n_max = scan.input_rate.maxCoeff();
    require(n_max / n_min >= 100.0, "power-law fit needs input rates spanning at least 2 decades");

    const Eigen::VectorXd rate = scan.input_rate.matrix();
    const Eigen::VectorXd loss = (scan.input_rate - scan.output_rate).matrix();
    const Eigen::VectorXd sigma = scan.output_sigma.matrix();

    Eigen::MatrixXd design(n, 2);
    design.col(0) = rate;
    design.col(1) = rate.cwiseProduct(rate);
    const LinearFit full = weighted_fit(design, loss, sigma);

    PowerLawFit out;
    out.covariance = full.covariance;
    out.alpha = full.coef(0);
    out.beta = full.coef(1);
    out.chi2 = full.chi2;
    out.dof = static_cast<int>(n) - 2;

    if (out.alpha < 0.0 || out.beta < 0.0) {
        // Refit with one coefficient pinned at zero and keep the feasible option with lower chi^2.
        const LinearFit only_alpha = weighted_fit(design.col(0), loss, sigma);
        const LinearFit only_beta = weighted_fit(design.col(1), loss, sigma);
        const bool alpha_ok = only_alpha.coef(0) >= 0.0;
        const bool beta_ok = only_beta.coef(0) >= 0.0;
        const bool use_alpha = alpha_ok && (!beta_ok || only_alpha.chi2 <= only_beta.chi2);
        if (use_alpha) {
            out.alpha = only_alpha.coef(0);
            out.beta = 0.0;
            out.beta_clipped = true;
            out.covariance(0, 0) = only_alpha.covariance(0, 0);
            out.chi2 = only_alpha.chi2;
        } else if (beta_ok) {
            out.alpha = 0.0;
            out.beta = only_beta.coef(0);
            out.alpha_clipped = true;
            out.covariance(1, 1) = only_beta.covariance(0, 0);
            out.chi2 = only_beta.chi2;
        } else {
            out.alpha = out.beta = 0.0;
            out.alpha_clipped = out.beta_clipped = true;
            out.chi2 = loss.cwiseQuotient(sigma).squaredNorm();
        }
        out.covariance(0, 1) = out.covariance(1, 0) = 0.0;
        out.dof = static_cast<int>(n) - 1;
    }

    out.negative_loss_flag = ((loss.array() + 3.0 * sigma.array()) < 0.0).any();
    out.midpoint_rate = std::sqrt(n_min * n_max);
    out.effective_exponent = effective_exponent(out.alpha, out.beta, out.midpoint_rate);

    const double m = out.midpoint_rate;
    const double u = out.alpha * m, v = out.beta * m * m;
    const double total = u + v;
    if (total > 0.0) {
        const Eigen::Vector2d grad(-v * m / (total * total), u * m * m / (total * total));
        out.exponent_std_error = std::sqrt(std::max(0.0, grad.dot(out.covariance * grad)));
    }
    out.exponent_ci_low = out.effective_exponent - 1.959963984540054 * out.exponent_std_error;
    out.exponent_ci_high = out.effective_exponent + 1.959963984540054 * out.exponent_std_error;
    return out;
}

CrossSectionEstimate sigma_from_transmission(const PowerScan& scan, double concentration_mM, double pathlength_cm,
                                             const TransmissionUncertainties& u) {
    check_concentration(concentration_mM);
    check_pathlength(pathlength_cm);
    require(u.concentration >= 0.0 && u.pathlength >= 0.0, "relative uncertainties must be non-negative");
    const PowerLawFit fit = power_law_fit(scan);

    const double column = concentration_mM * 1e-6 * avogadro * pathlength_cm;
    const double alpha_se = std::sqrt(std::max(0.0, fit.covariance(0, 0)));
    auto sigma_of = [&](double alpha) {
        require(alpha < 1.0, "linear loss coefficient reaches 1; sample is opaque");
        return -std::log1p(-alpha) / column;
    };

    CrossSectionEstimate est;
    est.method = XsecMethod::transmission_fit;
    est.upper_bound = fit.alpha < 2.0 * alpha_se;
    const double alpha_used = est.upper_bound ? std::max(fit.alpha, 0.0) + 2.0 * alpha_se : fit.alpha;
    est.value_cm2 = sigma_of(alpha_used);
    const double slope = 1.0 / ((1.0 - alpha_used) * column);
    const double rel_inputs = std::sqrt(u.concentration * u.concentration + u.pathlength * u.pathlength);
    est.std_error_cm2 = std::hypot(slope * alpha_se, est.value_cm2 * rel_inputs);
    est.inputs = {{"concentration_mM", concentration_mM},
                  {"pathlength_cm", pathlength_cm},
                  {"alpha", fit.alpha},
                  {"alpha_std_error", alpha_se},
                  {"beta_per_photon_per_s", fit.beta},
                  {"effective_exponent", fit.effective_exponent},
                  {"scan_points", static_cast<double>(scan.input_rate.size())},
                  {"input_rate_min_per_s", scan.input_rate.minCoeff()},
                  {"input_rate_max_per_s", scan.input_rate.maxCoeff()},
                  {"concentration_rel_uncertainty", u.concentration},
                  {"pathlength_rel_uncertainty", u.pathlength}};
    return est;
}

double detectability_floor(double collection_efficiency, double dark_rate_cps, double integration_s,
                           double flux_density_per_s_cm2, double column_density_per_cm2,
                           double illuminated_area_cm2) {
    require(collection_efficiency > 0.0 && integration_s > 0.0 && flux_density_per_s_cm2 > 0.0 &&
                column_density_per_cm2 > 0.0 && illuminated_area_cm2 > 0.0 && dark_rate_cps >= 0.0,
            "detectability floor inputs must be positive");
    const double threshold = std::max(1.0, 5.0 * std::sqrt(dark_rate_cps * integration_s));
    return threshold / (collection_efficiency * flux_density_per_s_cm2 * illuminated_area_cm2 *
                        column_density_per_cm2 * integration_s);
}

}  // namespace biphoton
