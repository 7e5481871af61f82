#include "biphoton/error.hpp"
#include "biphoton/interferometer.hpp"
#include "biphoton/source.hpp"
#include "biphoton/timetag.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace biphoton;

namespace {

DetectorSpec ideal() {
    DetectorSpec d;
    d.efficiency = 1.0;
    d.dark_rate_cps = 0.0;
    d.jitter_fwhm_ps = 0.0;
    return d;
}

TimeTagStream uniform_stream(double rate, double duration_s, std::uint64_t seed, std::uint32_t channel) {
    std::mt19937_64 rng(seed);
    std::poisson_distribution<long long> count(rate * duration_s);
    std::uniform_real_distribution<double> t(0.0, duration_s * 1e12);
    TimeTagStream s;
    s.channel = channel;
    const long long n = count(rng);
    for (long long i = 0; i < n; ++i) s.tags_ps.push_back(static_cast<std::uint64_t>(t(rng)));
    std::sort(s.tags_ps.begin(), s.tags_ps.end());
    return s;
}

}  // namespace

TEST(TimeTag, SplitRoutingGivesHalfCoincident) {
    const TimeTagRun run = generate_timetags(1e5, ideal(), ideal(), 5.0, 11);
    // Binomial routing: half of the 5e5 pairs split across the detectors.
    const double expected = 1e5 * 5.0 * 0.5;
    EXPECT_NEAR(static_cast<double>(run.true_coincidences), expected, 4.0 * std::sqrt(expected));
    EXPECT_TRUE(run.a.is_sorted());
    EXPECT_TRUE(run.b.is_sorted());
}

TEST(TimeTag, DarkOnlyStreams) {
    DetectorSpec d = ideal();
    d.dark_rate_cps = 100.0;
    const TimeTagRun run = generate_timetags(0.0, d, d, 5.0, 3);
    EXPECT_NEAR(static_cast<double>(run.a.tags_ps.size()), 500.0, 4.0 * std::sqrt(500.0));
    EXPECT_NEAR(static_cast<double>(run.b.tags_ps.size()), 500.0, 4.0 * std::sqrt(500.0));
    EXPECT_EQ(run.true_coincidences, 0u);
}

TEST(TimeTag, SameSeedSameStreams) {
    const DetectorSpec d;
    const TimeTagRun x = generate_timetags(2e4, d, d, 1.0, 99);
    const TimeTagRun y = generate_timetags(2e4, d, d, 1.0, 99);
    const TimeTagRun z = generate_timetags(2e4, d, d, 1.0, 100);
    EXPECT_EQ(x.a.tags_ps, y.a.tags_ps);
    EXPECT_EQ(x.b.tags_ps, y.b.tags_ps);
    EXPECT_NE(x.a.tags_ps, z.a.tags_ps);
}

TEST(TimeTag, DeriveSeedSeparatesStreams) {
    EXPECT_EQ(derive_seed(1, "coincidence", 3), derive_seed(1, "coincidence", 3));
    EXPECT_NE(derive_seed(1, "coincidence", 3), derive_seed(1, "coincidence", 4));
    EXPECT_NE(derive_seed(1, "coincidence", 3), derive_seed(2, "coincidence", 3));
    EXPECT_NE(derive_seed(1, "emiccd", 3), derive_seed(1, "coincidence", 3));
}

TEST(TimeTag, RejectsDeskScaleOverrun) {
    EXPECT_THROW(generate_timetags(1e9, DetectorSpec{}, DetectorSpec{}, 1.0, 1), InvalidInput);
    EXPECT_THROW(generate_timetags(1e3, DetectorSpec{}, DetectorSpec{}, 0.0, 1), InvalidInput);
}

TEST(TimeTag, DeadTimeDropsCloseTags) {
    DetectorSpec d = ideal();
    d.deadtime_ns = 1000.0;
    const TimeTagRun run = generate_timetags(5e5, d, d, 0.2, 5);
    for (std::size_t i = 1; i < run.a.tags_ps.size(); ++i) {
        ASSERT_GE(run.a.tags_ps[i] - run.a.tags_ps[i - 1], 1000000u);
    }
}

TEST(Histogram, IdenticalStreamsPeakAtZero) {
    const TimeTagStream s = uniform_stream(1e4, 1.0, 1, 0);
    const CoincidenceHistogram h = histogram_coincidences(s, s, 8.0, 0.1);
    // With 1e4 tags in 1 s only self-pairs fall within +/- 100 ps.
    EXPECT_EQ(h.counts(h.half_bins()), static_cast<double>(s.tags_ps.size()));
    EXPECT_EQ(h.counts.sum(), static_cast<double>(s.tags_ps.size()));
}

TEST(Histogram, AccidentalLevel) {
    const double r = 1e5, T = 5.0, bw = 8.0;
    const TimeTagStream a = uniform_stream(r, T, 21, 0);
    const TimeTagStream b = uniform_stream(r, T, 22, 1);
    const CoincidenceHistogram h = histogram_coincidences(a, b, bw, 20.0, T);
    const double ra = static_cast<double>(a.tags_ps.size()) / T;
    const double rb = static_cast<double>(b.tags_ps.size()) / T;
    const double expected = ra * rb * bw * 1e-12 * T;
    EXPECT_NEAR(expected, 0.4, 0.01);
    EXPECT_NEAR(h.counts.mean(), expected, 4.0 * std::sqrt(expected / static_cast<double>(h.counts.size())));
}

TEST(Histogram, AccidentalFloorAcrossSeeds) {
    const DetectorSpec d;
    for (int seed = 0; seed < 20; ++seed) {
        const TimeTagRun run = generate_timetags(1e5, d, d, 5.0, derive_seed(77, "floor", seed));
        const CoincidenceHistogram h = subtract_accidentals(histogram_coincidences(run.a, run.b, 8.0, 20.0, 5.0));
        const double r1 = static_cast<double>(run.a.tags_ps.size()) / 5.0;
        const double r2 = static_cast<double>(run.b.tags_ps.size()) / 5.0;
        const double expected = r1 * r2 * 8e-12 * 5.0;
        EXPECT_NEAR(h.accidental_level, expected, 4.0 * std::sqrt(expected / static_cast<double>(2 * h.tail_bins)));
    }
}

TEST(Histogram, JitterSetsPeakWidth) {
    DetectorSpec d = ideal();
    d.jitter_fwhm_ps = 350.0 / std::sqrt(2.0);  // combined 350 ps
    const TimeTagRun run = generate_timetags(1e5, d, d, 2.0, 8);
    const CoincidenceHistogram h = histogram_coincidences(run.a, run.b, 8.0, 20.0, 2.0);
    Eigen::ArrayXd x(h.counts.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = h.center_ps(i);
    // Smooth over 5 bins before reading the width.
    Eigen::ArrayXd smooth = h.counts;
    for (Eigen::Index i = 2; i + 2 < x.size(); ++i) smooth(i) = h.counts.segment(i - 2, 5).mean();
    EXPECT_NEAR(full_width_half_max(x, smooth), 350.0, 35.0);
}

TEST(Histogram, RejectsUnsortedStreams) {
    TimeTagStream a;
    a.tags_ps = {5, 3, 9};
    EXPECT_THROW(histogram_coincidences(a, a), InvalidInput);
}

TEST(Accidentals, FlatHistogramGoesToZero) {
    CoincidenceHistogram h;
    std::mt19937_64 rng(4);
    std::poisson_distribution<int> p(50.0);
    h.counts.resize(2501);
    for (Eigen::Index i = 0; i < h.counts.size(); ++i) h.counts(i) = p(rng);
    const CoincidenceHistogram s = subtract_accidentals(h, 0.2);
    const double n_tail = static_cast<double>(2 * s.tail_bins);
    EXPECT_LT(std::abs(s.counts.mean()), 2.0 * std::sqrt(50.0) / std::sqrt(n_tail));
    EXPECT_TRUE(s.accidentals_subtracted);
    EXPECT_THROW(subtract_accidentals(h, 0.5), InvalidInput);
    EXPECT_THROW(subtract_accidentals(s, 0.2), InvalidInput);
}

TEST(Accidentals, ZeroFloorUnchanged) {
    CoincidenceHistogram h;
    h.counts = Eigen::ArrayXd::Zero(501);
    h.counts(250) = 100.0;
    h.counts(251) = 40.0;
    const CoincidenceHistogram s = subtract_accidentals(h);
    EXPECT_LT((s.counts - h.counts).abs().maxCoeff(), 1e-12);
}

TEST(Windowed, SyntheticPeakOnFloor) {
    std::mt19937_64 rng(12);
    std::poisson_distribution<int> floor(3.0);
    CoincidenceHistogram h;
    h.counts.resize(5001);
    for (Eigen::Index i = 0; i < h.counts.size(); ++i) h.counts(i) = floor(rng);
    const double area = 5000.0;
    std::normal_distribution<double> jitter(0.0, 20.0);  // bins
    for (int k = 0; k < static_cast<int>(area); ++k) h.counts(2500 + std::lround(jitter(rng))) += 1.0;
    const WindowedCount w = windowed_coincidences(subtract_accidentals(h), 14.0);
    EXPECT_NEAR(w.counts, area, 3.0 * w.std_error);
    EXPECT_FALSE(w.raw_histogram);
    EXPECT_NEAR(h.center_ps(w.peak_bin), 0.0, 40.0);
}

TEST(Windowed, AllMassAtZeroAndEmpty) {
    CoincidenceHistogram h;
    h.counts = Eigen::ArrayXd::Zero(5001);
    h.counts(2500) = 123.0;
    EXPECT_EQ(windowed_coincidences(h, 1.0).counts, 123.0);
    EXPECT_TRUE(windowed_coincidences(h, 1.0).raw_histogram);
    h.counts(2500) = 0.0;
    EXPECT_EQ(windowed_coincidences(h, 14.0).counts, 0.0);
    EXPECT_THROW(windowed_coincidences(h, 50.0), InvalidInput);
}

TEST(Windowed, RecoversGeneratedCoincidences) {
    const TimeTagRun run = generate_timetags(1e5, ideal(), ideal(), 5.0, 31);
    const CoincidenceHistogram h = subtract_accidentals(histogram_coincidences(run.a, run.b, 8.0, 20.0, 5.0));
    const WindowedCount w = windowed_coincidences(h, 14.0);
    EXPECT_NEAR(w.counts, 2.5e5, 3.0 * std::sqrt(2.5e5));
}

TEST(Pipeline, MeanWindowedCountUnbiased) {
    const DetectorSpec d;
    double sum = 0.0, sum2 = 0.0;
    const int n = 50;
    const double rate = 2e4, T = 2.0;
    for (int seed = 0; seed < n; ++seed) {
        const TimeTagRun run = generate_timetags(rate, d, d, T, derive_seed(50, "unbiased", seed));
        const WindowedCount w =
            windowed_coincidences(subtract_accidentals(histogram_coincidences(run.a, run.b, 8.0, 20.0, T)), 14.0);
        sum += w.counts;
        sum2 += w.counts * w.counts;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / (n - 1));
    const double expected = rate * T * 0.5 * d.efficiency * d.efficiency;
    EXPECT_NEAR(mean, expected, 2.0 * se);
}

TEST(ScanCoincidences, ConvergesToModelAtHighCounts) {
    const Spectrum s = make_degenerate_spectrum(812.0, 100.0, 512);
    const PumpSpec pump;
    const DelayScan scan = DelayScan::centered(70.0, 35.0);
    CoincidenceScanOptions opt;
    opt.detected_pair_rate = 2e6;
    opt.duration_per_point_s = 4.0;
    opt.threads = 2;
    DetectorSpec d = ideal();
    d.jitter_fwhm_ps = 350.0;
    const Interferogram ig = scan_coincidences(s, pump, InterferometerSpec{}, scan, d, d, opt, 5);
    InterferogramOptions raw;
    raw.normalization = Normalization::raw;
    const Interferogram model = coincidence_interferogram(s, pump, InterferometerSpec{}, scan, raw);
    const Eigen::Index mid = scan.size() / 2;
    const double expected = opt.detected_pair_rate * model.values(mid) * 0.5;  // coincidences/s
    ASSERT_GT(expected * opt.duration_per_point_s, 1e6);
    EXPECT_NEAR(ig.values(mid) / expected, 1.0, 0.01);
}

TEST(ScanCoincidences, ThreadCountDoesNotChangeResult) {
    const Spectrum s = make_degenerate_spectrum(812.0, 100.0, 512);
    const DelayScan scan = DelayScan::centered(80.0, 4.0);
    CoincidenceScanOptions opt;
    opt.duration_per_point_s = 0.2;
    opt.threads = 1;
    const Interferogram one = scan_coincidences(s, PumpSpec{}, InterferometerSpec{}, scan, DetectorSpec{}, DetectorSpec{}, opt, 9);
    opt.threads = 4;
    const Interferogram four = scan_coincidences(s, PumpSpec{}, InterferometerSpec{}, scan, DetectorSpec{}, DetectorSpec{}, opt, 9);
    EXPECT_TRUE((one.values == four.values).all());
}

TEST(ScanCoincidences, FlatWithoutInterference) {
    const Spectrum s = make_degenerate_spectrum(812.0, 100.0, 512);
    const DelayScan scan = DelayScan::centered(80.0, 2.0);
    InterferometerSpec ifo;
    ifo.interference_suppression = 0.0;
    CoincidenceScanOptions opt;
    opt.duration_per_point_s = 0.5;
    opt.threads = 4;
    const Interferogram ig = scan_coincidences(s, PumpSpec{}, ifo, scan, DetectorSpec{}, DetectorSpec{}, opt, 13);
    // Ordinary least-squares slope and its standard error.
    const Eigen::ArrayXd x = scan.delays() - scan.delays().mean();
    const Eigen::ArrayXd y = ig.values - ig.values.mean();
    const double sxx = x.square().sum();
    const double slope = (x * y).sum() / sxx;
    const double resid = (y - slope * x).square().sum() / static_cast<double>(x.size() - 2);
    EXPECT_LT(std::abs(slope), 1.96 * std::sqrt(resid / sxx) * 1.5);
}

TEST(TimeTagFiles, BinaryRoundTripAndHeader) {
    const TimeTagRun run = generate_timetags(1e3, DetectorSpec{}, DetectorSpec{}, 1.0, 2);
    const auto path = std::filesystem::temp_directory_path() / "biphoton_tags_test.bin";
    write_timetags_binary(path, run.a);
    const TimeTagStream back = read_timetags_binary(path);
    EXPECT_EQ(back.tags_ps, run.a.tags_ps);
    EXPECT_EQ(back.channel, run.a.channel);
    std::ifstream in(path, std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    EXPECT_EQ(std::string(magic, 4), "BPTT");
    EXPECT_EQ(std::filesystem::file_size(path), 24 + 8 * run.a.tags_ps.size());
    std::ofstream(path, std::ios::binary) << "junk";
    EXPECT_THROW(read_timetags_binary(path), InvalidInput);
    std::filesystem::remove(path);
}

TEST(TimeTag, DarkFloorRate) {
    EXPECT_DOUBLE_EQ(dark_floor_rate(4.0, 1.0), 10.0);
    EXPECT_DOUBLE_EQ(dark_floor_rate(1.0, 4.0), 2.5);
}
