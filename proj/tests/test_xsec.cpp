#include "biphoton/error.hpp"
#include "biphoton/xsec.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace biphoton;

namespace {

constexpr double NA = 6.02214076e23;

Eigen::ArrayXd log_rates(double lo, double decades, int n) {
    return Eigen::ArrayXd::LinSpaced(n, std::log10(lo), std::log10(lo) + decades).unaryExpr([](double e) {
        return std::pow(10.0, e);
    });
}

// Beer-Lambert transmission with shot-noise error bars and no noise added.
PowerScan beer_lambert(double sigma_cm2, double c_mM, double l_cm) {
    PowerScan s;
    s.input_rate = log_rates(1e4, 4.0, 20);
    s.output_rate = s.input_rate * std::exp(-sigma_cm2 * c_mM * 1e-6 * NA * l_cm);
    s.output_sigma = s.output_rate.sqrt();
    return s;
}

PowerScan loss_scan(double alpha, double beta, std::mt19937_64* rng) {
    PowerScan s;
    s.input_rate = log_rates(1e4, 4.0, 20);
    const Eigen::ArrayXd mean = s.input_rate - alpha * s.input_rate - beta * s.input_rate.square();
    s.output_sigma = mean.sqrt();
    s.output_rate = mean;
    if (rng) {
        std::normal_distribution<double> n(0.0, 1.0);
        for (Eigen::Index i = 0; i < mean.size(); ++i) s.output_rate(i) += s.output_sigma(i) * n(*rng);
    }
    return s;
}

}  // namespace

TEST(Scatter, HandValue) {
    // 1e-4 * 1e12 * (5 mM -> 3.011e18 cm^-3) * 1 cm * 2e-21 = 6.022e5 cps.
    const double signal = 1e-4 * 1e12 * 5e-6 * NA * 2e-21;
    const CrossSectionEstimate e = sigma_from_scatter(signal, 1e-4, 1e12, 5.0, 1.0);
    EXPECT_NEAR(e.value_cm2 / 2e-21, 1.0, 1e-12);
    EXPECT_EQ(e.method, XsecMethod::scatter_inversion);
    EXPECT_FALSE(e.upper_bound);
    EXPECT_EQ(sigma_from_scatter(0.0, 1e-4, 1e12, 5.0, 1.0).value_cm2, 0.0);
    EXPECT_GE(e.inputs.size(), 5u);
}

TEST(Scatter, ErrorPropagation) {
    ScatterUncertainties u;
    u.collection_efficiency = 0.5;
    const CrossSectionEstimate e = sigma_from_scatter(6e5, 1e-4, 1e12, 5.0, 1.0, u);
    EXPECT_NEAR(e.std_error_cm2 / e.value_cm2, 0.5, 1e-12);
    u.signal = 0.1;
    u.concentration = 0.02;
    const CrossSectionEstimate f = sigma_from_scatter(6e5, 1e-4, 1e12, 5.0, 1.0, u);
    EXPECT_NEAR(f.std_error_cm2 / f.value_cm2, std::sqrt(0.25 + 0.01 + 0.0004), 1e-12);
}

TEST(Scatter, LinearInSignalInverseInRest) {
    const double base = sigma_from_scatter(6e5, 1e-4, 1e12, 5.0, 1.0).value_cm2;
    for (const double f : {0.5, 2.0, 4.0}) {
        EXPECT_NEAR(sigma_from_scatter(6e5 * f, 1e-4, 1e12, 5.0, 1.0).value_cm2 / base, f, 1e-12);
        EXPECT_NEAR(sigma_from_scatter(6e5, 1e-4 * f, 1e12, 5.0, 1.0).value_cm2 / base, 1.0 / f, 1e-12);
        EXPECT_NEAR(sigma_from_scatter(6e5, 1e-4, 1e12 * f, 5.0, 1.0).value_cm2 / base, 1.0 / f, 1e-12);
        EXPECT_NEAR(sigma_from_scatter(6e5, 1e-4, 1e12, 5.0 * f, 1.0).value_cm2 / base, 1.0 / f, 1e-12);
        EXPECT_NEAR(sigma_from_scatter(6e5, 1e-4, 1e12, 5.0, f).value_cm2 / base, 1.0 / f, 1e-12);
    }
}

TEST(Scatter, UnitSlipsCaught) {
    // 5 mM entered as mol/L.
    EXPECT_THROW(sigma_from_scatter(6e5, 1e-4, 1e12, 0.005, 1.0), InvalidInput);
    // 1 cm entered in micrometres.
    EXPECT_THROW(sigma_from_scatter(6e5, 1e-4, 1e12, 5.0, 1e4), InvalidInput);
    EXPECT_THROW(sigma_from_scatter(-1.0, 1e-4, 1e12, 5.0, 1.0), InvalidInput);
    EXPECT_THROW(sigma_from_scatter(6e5, 0.0, 1e12, 5.0, 1.0), InvalidInput);
}

TEST(PowerLaw, NoiselessLinearRecovery) {
    const PowerScan s = beer_lambert(4e-21, 5.0, 1.0);
    const CrossSectionEstimate e = sigma_from_transmission(s, 5.0, 1.0);
    EXPECT_NEAR(e.value_cm2 / 4e-21, 1.0, 1e-8);
    EXPECT_FALSE(e.upper_bound);
    const PowerLawFit f = power_law_fit(s);
    EXPECT_NEAR(f.effective_exponent, 1.0, 1e-8);
    EXPECT_NEAR(f.alpha, 1.0 - std::exp(-4e-21 * 5e-6 * NA), 1e-12);
}

TEST(PowerLaw, PureQuadraticAndMixed) {
    const PowerLawFit q = power_law_fit(loss_scan(0.0, 1e-10, nullptr));
    EXPECT_NEAR(q.effective_exponent, 2.0, 1e-6);
    const PowerLawFit m = power_law_fit(loss_scan(0.01, 5e-9, nullptr));
    EXPECT_GT(m.effective_exponent, 1.0);
    EXPECT_LT(m.effective_exponent, 2.0);
    EXPECT_NEAR(m.effective_exponent, effective_exponent(0.01, 5e-9, m.midpoint_rate), 1e-6);
    EXPECT_NEAR(m.effective_exponent, 4.0 / 3.0, 1e-6);
    EXPECT_NEAR(m.midpoint_rate, 1e6, 1e-3);
}

TEST(PowerLaw, ConfidenceIntervalCoverage) {
    const double alpha = 0.01, beta = 1e-10;
    std::mt19937_64 rng(77);
    int covered = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        const PowerLawFit f = power_law_fit(loss_scan(alpha, beta, &rng));
        const double truth = effective_exponent(alpha, beta, f.midpoint_rate);
        if (truth >= f.exponent_ci_low && truth <= f.exponent_ci_high) ++covered;
    }
    const double coverage = static_cast<double>(covered) / trials;
    EXPECT_GE(coverage, 0.90);
    EXPECT_LE(coverage, 1.00);
}

TEST(PowerLaw, BlankGivesUpperBound) {
    std::mt19937_64 rng(5);
    const PowerScan s = loss_scan(0.0, 0.0, &rng);
    const CrossSectionEstimate e = sigma_from_transmission(s, 5.0, 1.0);
    EXPECT_TRUE(e.upper_bound);
    EXPECT_GT(e.value_cm2, 0.0);
    // Shot noise over 4 decades bounds the loss well below that of a 4e-21 cm^2 absorber.
    EXPECT_LT(e.value_cm2, 0.1 * 4e-21);
    EXPECT_FALSE(sigma_from_transmission(beer_lambert(4e-21, 5.0, 1.0), 5.0, 1.0).upper_bound);
}

TEST(PowerLaw, ConcentrationInvariance) {
    for (const double c : {1.0, 5.0, 50.0}) {
        EXPECT_NEAR(sigma_from_transmission(beer_lambert(4e-21, c, 1.0), c, 1.0).value_cm2 / 4e-21, 1.0, 1e-8) << c;
    }
}

TEST(PowerLaw, RejectsThinScans) {
    PowerScan s = beer_lambert(4e-21, 5.0, 1.0);
    PowerScan narrow;
    narrow.input_rate = s.input_rate.head(5);
    narrow.output_rate = s.output_rate.head(5);
    narrow.output_sigma = s.output_sigma.head(5);
    EXPECT_THROW(power_law_fit(narrow), InvalidInput);  // under two decades
    s.output_sigma(3) = 0.0;
    EXPECT_THROW(power_law_fit(s), InvalidInput);
}

TEST(Floor, ScalesAndSingleCountLimit) {
    const double f = detectability_floor(1e-4, 1.0, 1.0, 1e12, 3e18, 0.01);
    EXPECT_NEAR(detectability_floor(2e-4, 1.0, 1.0, 1e12, 3e18, 0.01) / f, 0.5, 1e-12);
    EXPECT_NEAR(detectability_floor(1e-4, 0.0, 1.0, 1e12, 3e18, 0.01), 1.0 / (1e-4 * 1e12 * 0.01 * 3e18), 1e-40);
    // Dark counts of 4 over 1 s: 5 sqrt(4) = 10 counts.
    EXPECT_NEAR(detectability_floor(1e-4, 4.0, 1.0, 1e12, 3e18, 0.01) / f, 2.0, 1e-12);
    EXPECT_THROW(detectability_floor(0.0, 1.0, 1.0, 1e12, 3e18, 0.01), InvalidInput);
}
