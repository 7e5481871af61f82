#include "biphoton/spectrum.hpp"

#include "biphoton/error.hpp"
#include "biphoton/units.hpp"

#include <algorithm>
#include <cmath>

namespace biphoton {

Eigen::ArrayXd centered_grid(double center, double step, Eigen::Index n) {
    Eigen::ArrayXd grid(n);
    const double mid = 0.5 * static_cast<double>(n - 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        grid(i) = center + (static_cast<double>(i) - mid) * step;
    }
    return grid;
}

double grid_nonuniformity(const Eigen::ArrayXd& grid) {
    const Eigen::Index n = grid.size();
    if (n < 3) return 0.0;
    const double mean_step = (grid(n - 1) - grid(0)) / static_cast<double>(n - 1);
    double worst = 0.0;
    for (Eigen::Index i = 1; i < n; ++i) {
        worst = std::max(worst, std::abs((grid(i) - grid(i - 1)) - mean_step) / std::abs(mean_step));
    }
    return worst;
}

double full_width_half_max(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y) {
    const Eigen::Index n = y.size();
    if (n < 3) return 0.0;
    Eigen::Index imax = 0;
    const double peak = y.maxCoeff(&imax);
    if (!(peak > 0.0)) return 0.0;
    const double half = 0.5 * peak;

    Eigen::Index first = -1;
    Eigen::Index last = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y(i) >= half) {
            if (first < 0) first = i;
            last = i;
        }
    }
    if (first <= 0 || last >= n - 1) return 0.0;

    auto crossing = [&](Eigen::Index below, Eigen::Index above) {
        const double t = (half - y(below)) / (y(above) - y(below));
        return x(below) + t * (x(above) - x(below));
    };
    return crossing(last + 1, last) - crossing(first - 1, first);
}

Spectrum::Spectrum(Eigen::ArrayXd omega, Eigen::ArrayXd density, std::string label)
    : omega_(std::move(omega)), density_(std::move(density)), label_(std::move(label)) {
    require(omega_.size() >= 2, "spectrum needs at least two grid points");
    require(omega_.size() == density_.size(), "spectrum grid and density lengths differ");
    require(omega_.allFinite() && density_.allFinite(), "spectrum contains non-finite values");
    require(omega_(0) > 0.0, "spectrum grid must be positive angular frequency");
    for (Eigen::Index i = 1; i < omega_.size(); ++i) {
        require(omega_(i) > omega_(i - 1), "spectrum grid must be strictly increasing");
    }
    require(grid_nonuniformity(omega_) <= 1e-9, "spectrum grid must be uniform to 1 part in 1e9");
    require((density_ >= 0.0).all(), "spectral density must be non-negative");
    step_ = (omega_(omega_.size() - 1) - omega_(0)) / static_cast<double>(omega_.size() - 1);
}

Spectrum Spectrum::normalized(Eigen::ArrayXd omega, Eigen::ArrayXd density, std::string label) {
    Spectrum s(std::move(omega), std::move(density), std::move(label));
    const double area = s.integral();
    require(area > 0.0 && std::isfinite(area), "spectrum has zero or non-finite integral");
    s.density_ /= area;
    return s;
}

double Spectrum::integral() const { return trapezoid(density_, step_); }

bool Spectrum::is_normalized(double tolerance) const { return std::abs(integral() - 1.0) <= tolerance; }

double Spectrum::mean_omega() const {
    const Eigen::ArrayXd w = weights() * density_;
    return (w * omega_).sum() / w.sum();
}

double Spectrum::peak_omega() const {
    Eigen::Index imax = 0;
    density_.maxCoeff(&imax);
    return omega_(imax);
}

double Spectrum::fwhm_omega() const { return full_width_half_max(omega_, density_); }

double Spectrum::fwhm_hz() const { return fwhm_omega() / two_pi; }

double Spectrum::density_at(double omega) const {
    if (omega < omega_(0) || omega > omega_(size() - 1)) return 0.0;
    const double pos = (omega - omega_(0)) / step_;
    const auto i = std::min<Eigen::Index>(static_cast<Eigen::Index>(pos), size() - 2);
    const double t = pos - static_cast<double>(i);
    return (1.0 - t) * density_(i) + t * density_(i + 1);
}

Eigen::ArrayXd Spectrum::density_at(const Eigen::ArrayXd& omega) const {
    Eigen::ArrayXd out(omega.size());
    for (Eigen::Index i = 0; i < omega.size(); ++i) out(i) = density_at(omega(i));
    return out;
}

Eigen::ArrayXd Spectrum::wavelength_nm() const {
    return (two_pi * speed_of_light / nano) / omega_;
}

Eigen::ArrayXd Spectrum::density_per_nm() const {
    // S_lambda = S_omega * |d omega / d lambda| = S_omega * 2 pi c / lambda^2
    const Eigen::ArrayXd lambda_m = two_pi * speed_of_light / omega_;
    return density_ * (two_pi * speed_of_light) / lambda_m.square() * nano;
}

Spectrum Spectrum::relabeled(std::string label) const {
    Spectrum copy = *this;
    copy.label_ = std::move(label);
    return copy;
}

}  // namespace biphoton
