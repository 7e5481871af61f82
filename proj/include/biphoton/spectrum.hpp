#pragma once

#include <Eigen/Dense>

#include <string>

namespace biphoton {

/// Trapezoid-rule integral of uniformly sampled values.
template <typename Derived>
typename Derived::Scalar trapezoid(const Eigen::ArrayBase<Derived>& y, typename Derived::Scalar step) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = y.size();
    if (n < 2) return Scalar(0);
    return step * (y.sum() - Scalar(0.5) * (y(0) + y(n - 1)));
}

/// Trapezoid quadrature weights for a uniform grid of n points.
template <typename Scalar = double>
Eigen::Array<Scalar, Eigen::Dynamic, 1> trapezoid_weights(Eigen::Index n, Scalar step) {
    Eigen::Array<Scalar, Eigen::Dynamic, 1> w = Eigen::Array<Scalar, Eigen::Dynamic, 1>::Constant(n, step);
    if (n > 0) {
        w(0) *= Scalar(0.5);
        w(n - 1) *= Scalar(0.5);
    }
    return w;
}

/// Unit-height Gaussian exp(-(x - mu)^2 / (2 sigma^2)), evaluated coefficient-wise.
template <typename Derived>
auto gaussian(const Eigen::ArrayBase<Derived>& x, typename Derived::Scalar mu, typename Derived::Scalar sigma) {
    using Scalar = typename Derived::Scalar;
    return (-(x - mu).square() / (Scalar(2) * sigma * sigma)).exp();
}

/// Uniform grid of n points centered on `center` with spacing `step`.
/// Built as center + (i - (n-1)/2) * step so mirror points are exact.
Eigen::ArrayXd centered_grid(double center, double step, Eigen::Index n);

/// Maximum relative deviation of consecutive spacings from the mean spacing.
double grid_nonuniformity(const Eigen::ArrayXd& grid);

/// Half-maximum crossings (linear interpolation) of the outermost samples above half max.
/// Returns the full width; zero when the profile never drops below half max on a side.
double full_width_half_max(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y);

/// One-photon spectral density on a uniform angular-frequency grid (rad/s).
///
/// The density is per unit angular frequency. A Spectrum is immutable; operations that
/// change it return new instances.
class Spectrum {
 public:
    /// Validates the grid (strictly increasing, uniform to 1e-9) and density (finite, >= 0).
    Spectrum(Eigen::ArrayXd omega, Eigen::ArrayXd density, std::string label);

    /// Same as the constructor, then rescales so the trapezoid integral is exactly 1.
    static Spectrum normalized(Eigen::ArrayXd omega, Eigen::ArrayXd density, std::string label);

    const Eigen::ArrayXd& omega() const { return omega_; }
    const Eigen::ArrayXd& density() const { return density_; }
    const std::string& label() const { return label_; }

    Eigen::Index size() const { return omega_.size(); }
    double step() const { return step_; }
    double integral() const;
    bool is_normalized(double tolerance = 1e-9) const;

    Eigen::ArrayXd weights() const { return trapezoid_weights(size(), step_); }
    double mean_omega() const;
    double peak_omega() const;
    /// Outermost half-maximum width in rad/s.
    double fwhm_omega() const;
    double fwhm_hz() const;

    /// Linear interpolation; zero outside the grid.
    double density_at(double omega) const;
    Eigen::ArrayXd density_at(const Eigen::ArrayXd& omega) const;

    /// Vacuum wavelength of each grid point, in nm (decreasing).
    Eigen::ArrayXd wavelength_nm() const;
    /// Intensity per unit wavelength (1/nm) at each grid point, via the lambda^2 Jacobian.
    Eigen::ArrayXd density_per_nm() const;

    Spectrum relabeled(std::string label) const;

 private:
    Eigen::ArrayXd omega_;
    Eigen::ArrayXd density_;
    std::string label_;
    double step_ = 0.0;
};

}  // namespace biphoton
