#include "biphoton/error.hpp"
#include "biphoton/source.hpp"
#include "biphoton/spectrum.hpp"
#include "biphoton/units.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace biphoton;

namespace {

constexpr double c = 299792458.0;

double lobe_span_nm(const Spectrum& s) {
    // Outer half-maximum edges of the whole profile, in wavelength.
    const Eigen::ArrayXd& w = s.omega();
    const Eigen::ArrayXd& d = s.density();
    const double half = 0.5 * d.maxCoeff();
    Eigen::Index lo = 0, hi = d.size() - 1;
    while (d(lo) < half) ++lo;
    while (d(hi) < half) --hi;
    return 2.0 * M_PI * c / w(lo) * 1e9 - 2.0 * M_PI * c / w(hi) * 1e9;
}

}  // namespace

TEST(Spectrum, DegenerateCenterAndNormalization) {
    const Spectrum s = make_degenerate_spectrum(812.0, 100.0, 4096);
    const double expected = 2.0 * M_PI * c / 812e-9;
    EXPECT_NEAR(s.peak_omega() / expected, 1.0, 1e-3);
    EXPECT_NEAR(expected, 2.320e15, 0.001e15);
    EXPECT_NEAR(s.integral(), 1.0, 1e-9);
    EXPECT_NEAR(s.mean_omega() / expected, 1.0, 1e-9);
}

TEST(Spectrum, FwhmScalesWithBandwidth) {
    const Spectrum narrow = make_degenerate_spectrum(812.0, 1.0, 4096);
    const Spectrum wide = make_degenerate_spectrum(812.0, 100.0, 4096);
    EXPECT_NEAR(wide.fwhm_omega() / narrow.fwhm_omega(), 100.0, 1.0);
    // c dlambda / lambda^2
    EXPECT_NEAR(wide.fwhm_hz() / (c * 100e-9 / (812e-9 * 812e-9)), 1.0, 1e-3);
}

TEST(Spectrum, TooCoarseGridRejected) {
    EXPECT_THROW(make_degenerate_spectrum(812.0, 100.0, 16), InvalidInput);
}

TEST(Spectrum, ConstructorValidates) {
    Eigen::ArrayXd w = Eigen::ArrayXd::LinSpaced(10, 1.0, 10.0);
    Eigen::ArrayXd d = Eigen::ArrayXd::Ones(10);
    d(3) = -1.0;
    EXPECT_THROW(Spectrum(w, d, "neg"), InvalidInput);
    Eigen::ArrayXd uneven = w;
    uneven(5) += 0.1;
    EXPECT_THROW(Spectrum(uneven, Eigen::ArrayXd::Ones(10), "uneven"), InvalidInput);
    EXPECT_THROW(Spectrum::normalized(w, Eigen::ArrayXd::Zero(10), "zero"), InvalidInput);
}

TEST(Spectrum, SplitWithZeroSeparationIsDegenerate) {
    const Spectrum a = make_split_spectrum(812.0, 0.0, 40.0, 4096);
    const Spectrum b = make_degenerate_spectrum(812.0, 40.0, 4096);
    ASSERT_EQ(a.size(), b.size());
    EXPECT_LT((a.omega() - b.omega()).abs().maxCoeff() / b.omega().maxCoeff(), 1e-12);
    EXPECT_LT((a.density() - b.density()).abs().maxCoeff() / b.density().maxCoeff(), 1e-12);
}

TEST(Spectrum, SplitLobesSymmetricAboutDegeneracy) {
    const Spectrum s = make_split_spectrum(812.0, 150.0, 30.0, 4096);
    const double w0 = 2.0 * M_PI * c / 812e-9;
    const Eigen::ArrayXd& d = s.density();
    // Mirror symmetry about w0 on the grid.
    const double max = d.maxCoeff();
    for (Eigen::Index i = 0; i < s.size(); i += 7) {
        const double mirror = s.density_at(2.0 * w0 - s.omega()(i));
        EXPECT_LT(std::abs(d(i) - mirror), 1e-6 * max);
    }
    // Two maxima on either side of w0.
    Eigen::Index lo_peak, hi_peak;
    const auto half = s.size() / 2;
    d.head(half).maxCoeff(&lo_peak);
    d.tail(s.size() - half).maxCoeff(&hi_peak);
    hi_peak += half;
    EXPECT_NEAR(0.5 * (s.omega()(lo_peak) + s.omega()(hi_peak)) / w0, 1.0, s.step() / w0);
    EXPECT_NEAR(2.0 * M_PI * c / s.omega()(lo_peak) * 1e9 - 2.0 * M_PI * c / s.omega()(hi_peak) * 1e9, 150.0, 1.0);
}

TEST(Spectrum, SplitSpanNearTwoHundredNm) {
    const Spectrum s = make_split_spectrum(812.0, 150.0, 30.0, 4096);
    // Outer FWHM edges: ~ separation + lobe FWHM, stretched on the red side.
    EXPECT_NEAR(lobe_span_nm(s), 185.0, 15.0);
}

TEST(Spectrum, SplitLobesOutsideGridRejected) {
    // Red lobe near 0.15 omega0 with a 300 nm width reaches below zero frequency.
    EXPECT_NO_THROW(make_split_spectrum(812.0, 5000.0, 30.0, 4096));
    EXPECT_THROW(make_split_spectrum(812.0, 5000.0, 300.0, 4096), InvalidInput);
}

TEST(Spectrum, LoadRoundTripsGaussianCenter) {
    std::vector<std::pair<double, double>> table;
    for (double wl = 700.0; wl <= 940.0; wl += 0.5) {
        const double x = (wl - 820.0) / 20.0;
        table.emplace_back(wl, std::exp(-0.5 * x * x));
    }
    const Spectrum s = load_spectrum(table, 4096);
    EXPECT_NEAR(s.integral(), 1.0, 1e-9);
    // Peak of the per-nm density sits at the table's peak.
    Eigen::Index k;
    s.density_per_nm().maxCoeff(&k);
    EXPECT_NEAR(s.wavelength_nm()(k), 820.0, 0.1);
}

TEST(Spectrum, LoadAppliesJacobian) {
    std::vector<std::pair<double, double>> flat;
    for (double wl = 700.0; wl <= 900.0; wl += 0.5) flat.emplace_back(wl, 1.0);
    const Spectrum s = load_spectrum(flat, 2048);
    const Eigen::ArrayXd wl = s.wavelength_nm();
    // density per unit angular frequency ~ lambda^2 for flat per-nm intensity.
    const Eigen::Index a = s.size() / 10, b = 9 * s.size() / 10;
    EXPECT_NEAR(s.density()(a) / s.density()(b), (wl(a) * wl(a)) / (wl(b) * wl(b)), 1e-3);
    EXPECT_GT(s.density()(a), s.density()(b));  // low omega is the 900 nm end
}

TEST(Spectrum, LoadRejectsBadTables) {
    EXPECT_THROW(load_spectrum({{800.0, 1.0}}), InvalidInput);
    EXPECT_THROW(load_spectrum({{800.0, 1.0}, {800.0, 2.0}, {810.0, 1.0}}), InvalidInput);
    EXPECT_THROW(load_spectrum({{800.0, -1.0}, {810.0, 1.0}}), InvalidInput);
}

TEST(Source, PairRateAt812) {
    const Spectrum s = make_degenerate_spectrum(812.0, 100.0, 4096);
    // h c / lambda = 2.446e-19 J per photon, two photons per pair.
    const double photon_energy = 6.62607015e-34 * c / 812e-9;
    EXPECT_NEAR(photon_energy, 2.446e-19, 0.001e-19);
    EXPECT_NEAR(pair_rate(20e-9, s) / (20e-9 / (2.0 * photon_energy)), 1.0, 1e-6);
    EXPECT_NEAR(pair_rate(20e-9, s), 4.09e10, 0.01 * 4.09e10);
    EXPECT_EQ(pair_rate(0.0, s), 0.0);
    EXPECT_DOUBLE_EQ(pair_rate(40e-9, s), 2.0 * pair_rate(20e-9, s));
}

TEST(Source, PairsPerModeHandValue) {
    SourceSpec src;
    src.spectrum_mode = SpectrumMode::degenerate;
    src.spectrum_params.fwhm_nm = 200.0;
    const Spectrum s = make_spectrum(src);
    const double bandwidth = c * 200e-9 / (812e-9 * 812e-9);
    EXPECT_NEAR(bandwidth, 9.10e13, 0.01e13);
    EXPECT_NEAR(pairs_per_mode(src, s).value / 4.5e-4, 1.0, 0.05);
    const PairsPerMode unity = pairs_per_mode(s.fwhm_hz(), s);
    EXPECT_DOUBLE_EQ(unity.value, 1.0);
    EXPECT_TRUE(unity.exceeds_single_pair_limit);
    EXPECT_FALSE(pairs_per_mode(src, s).exceeds_single_pair_limit);
    src.spdc_power_w = 0.0;
    EXPECT_EQ(pairs_per_mode(src, s).value, 0.0);
}

TEST(Source, RatesLinearInPower) {
    SourceSpec src;
    const Spectrum s = make_spectrum(src);
    src.spdc_power_w = 1e-12;
    const double r0 = pair_rate(src);
    const double m0 = pairs_per_mode(src, s).value;
    for (const double p : {1e-11, 1e-10, 1e-9, 1e-8}) {
        src.spdc_power_w = p;
        EXPECT_NEAR(pair_rate(src) / r0, p / 1e-12, 1e-9 * p / 1e-12);
        EXPECT_NEAR(pairs_per_mode(src, s).value / m0, p / 1e-12, 1e-9 * p / 1e-12);
    }
}

TEST(Source, ValidatesSpecs) {
    SourceSpec src;
    src.spdc_power_w = 3.0;  // above the 2 W pump
    EXPECT_THROW(src.validate(), InvalidInput);
    PumpSpec pump;
    pump.linewidth_fwhm_nm = -1.0;
    EXPECT_THROW(pump.validate(), InvalidInput);
    EXPECT_THROW(spectrum_mode_from_string("chirped"), InvalidInput);
    EXPECT_EQ(spectrum_mode_from_string(to_string(SpectrumMode::tabulated)), SpectrumMode::tabulated);
}

TEST(Spectrum, FullWidthHalfMaxOfGaussian) {
    const Eigen::ArrayXd x = Eigen::ArrayXd::LinSpaced(2001, -10.0, 10.0);
    const Eigen::ArrayXd y = (-(x.square()) / 2.0).exp();
    EXPECT_NEAR(full_width_half_max(x, y), 2.0 * std::sqrt(2.0 * std::log(2.0)), 1e-4);
}
