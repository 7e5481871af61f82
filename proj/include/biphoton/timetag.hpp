#pragma once

#include "biphoton/interferometer.hpp"
#include "biphoton/source.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace biphoton {

struct DetectorSpec {
    double efficiency = 0.6;
    double dark_rate_cps = 100.0;
    double jitter_fwhm_ps = 350.0;
    double deadtime_ns = 0.0;

    void validate() const;
};

/// Picosecond arrival times for one detector channel, sorted.
struct TimeTagStream {
    std::uint32_t channel = 0;
    std::vector<std::uint64_t> tags_ps;

    bool is_sorted() const;
};

/// Seed for a named sub-stream of a master seed: splitmix64 over (master, FNV-1a(name), index).
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0);

struct TimeTagRun {
    TimeTagStream a;
    TimeTagStream b;
    /// Pairs that split at the detection beamsplitter and were detected on both sides.
    std::uint64_t true_coincidences = 0;
};

/// Poisson pair arrivals through a 50:50 splitter onto two detectors with per-photon efficiency,
/// Gaussian jitter, Poisson dark counts and optional dead time. Fully determined by `seed`.
TimeTagRun generate_timetags(double pair_rate, const DetectorSpec& det_a, const DetectorSpec& det_b,
                             double duration_s, std::uint64_t seed);

/// Histogram of t_b - t_a over bins centered at k * bin_width for |k| <= K.
struct CoincidenceHistogram {
    double bin_width_ps = 8.0;
    Eigen::ArrayXd counts;
    double integration_time_s = 0.0;
    /// Set once the tail-averaged accidental level has been removed (counts may be negative).
    bool accidentals_subtracted = false;
    double accidental_level = 0.0;
    Eigen::Index tail_bins = 0;

    Eigen::Index half_bins() const { return (counts.size() - 1) / 2; }
    double center_ps(Eigen::Index bin) const { return static_cast<double>(bin - half_bins()) * bin_width_ps; }
    double range_ps() const { return static_cast<double>(half_bins()) * bin_width_ps; }
};

/// Two-pointer sweep over sorted streams, O(n + m + matches).
CoincidenceHistogram histogram_coincidences(const TimeTagStream& a, const TimeTagStream& b, double bin_width_ps = 8.0,
                                            double range_ns = 20.0, double integration_time_s = 0.0);

/// Subtracts the mean of the outermost `tail_fraction` of bins on each side from every bin.
CoincidenceHistogram subtract_accidentals(const CoincidenceHistogram& h, double tail_fraction = 0.2);

struct WindowedCount {
    double counts = 0.0;
    /// Poisson standard error, including the uncertainty of the subtracted accidental level.
    double std_error = 0.0;
    Eigen::Index peak_bin = 0;
    /// Summed on a histogram whose accidentals were not subtracted.
    bool raw_histogram = false;
};

/// Sum of bins within +/- window/2 of the peak bin (maximum of a 5-bin moving average).
WindowedCount windowed_coincidences(const CoincidenceHistogram& h, double window_ns = 14.0);

struct CoincidenceScanOptions {
    double duration_per_point_s = 5.0;
    /// Pairs/s reaching the detection beamsplitter per unit raw coincidence probability.
    double detected_pair_rate = 8e4;
    double bin_width_ps = 8.0;
    double range_ns = 20.0;
    double window_ns = 14.0;
    double tail_fraction = 0.2;
    double envelope_broadening_fs = 0.0;
    int threads = 1;
};

/// Per-delay time-tag pipeline: model rate -> tags -> histogram -> accidental subtraction ->
/// windowed sum. Values are coincidences per second (clamped at zero). Point i uses
/// derive_seed(seed, "coincidence", i), so results do not depend on the thread count.
Interferogram scan_coincidences(const Spectrum& spectrum, const PumpSpec& pump, const InterferometerSpec& ifo,
                                const DelayScan& scan, const DetectorSpec& det_a, const DetectorSpec& det_b,
                                const CoincidenceScanOptions& options, std::uint64_t seed);

/// Minimum detectable EMICCD signal rate: 5 sqrt(dark counts) over the exposure, per second.
double dark_floor_rate(double dark_rate_cps, double exposure_s);

// Binary stream format, little-endian: magic "BPTT", u32 version, u32 channel, u32 reserved,
// u64 tag count, then u64 picosecond tags.
inline constexpr std::uint32_t kTimeTagMagic = 0x54545042;  // "BPTT"
inline constexpr std::uint32_t kTimeTagVersion = 1;

void write_timetags_binary(const std::filesystem::path& path, const TimeTagStream& stream);
TimeTagStream read_timetags_binary(const std::filesystem::path& path);
void write_timetags_csv(const std::filesystem::path& path, const TimeTagStream& stream);
void write_histogram_csv(const std::filesystem::path& path, const CoincidenceHistogram& h);

}  // namespace biphoton
