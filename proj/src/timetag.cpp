#include "biphoton/timetag.hpp"

#include "biphoton/error.hpp"
#include "biphoton/units.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <thread>

namespace biphoton {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

constexpr double kMaxExpectedEvents = 1e8;

std::uint64_t to_tag(double t_ps) { return t_ps <= 0.0 ? 0 : static_cast<std::uint64_t>(std::llround(t_ps)); }

void append_darks(std::vector<double>& times, double rate, double duration_ps, std::mt19937_64& rng) {
    if (rate <= 0.0) return;
    std::poisson_distribution<long long> count(rate * duration_ps * pico);
    std::uniform_real_distribution<double> when(0.0, duration_ps);
    const long long n = count(rng);
    for (long long i = 0; i < n; ++i) times.push_back(when(rng));
}

TimeTagStream finalize(std::uint32_t channel, std::vector<double>& times, const DetectorSpec& det) {
    std::sort(times.begin(), times.end());
    TimeTagStream s{channel, {}};
    s.tags_ps.reserve(times.size());
    const double dead_ps = det.deadtime_ns * 1e3;
    double last = -std::numeric_limits<double>::infinity();
    for (const double t : times) {
        if (dead_ps > 0.0 && t - last < dead_ps) continue;
        s.tags_ps.push_back(to_tag(t));
        last = t;
    }
    std::sort(s.tags_ps.begin(), s.tags_ps.end());
    return s;
}

void put_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::ostream& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw InvalidInput("time-tag file truncated");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
    return v;
}

}  // namespace

void DetectorSpec::validate() const {
    require(efficiency > 0.0 && efficiency <= 1.0, "detector efficiency must be in (0, 1]");
    require(dark_rate_cps >= 0.0, "dark rate must be non-negative");
    require(jitter_fwhm_ps >= 0.0, "jitter must be non-negative");
    require(deadtime_ns >= 0.0, "dead time must be non-negative");
}

bool TimeTagStream::is_sorted() const { return std::is_sorted(tags_ps.begin(), tags_ps.end()); }

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index) {
    return splitmix64(splitmix64(master ^ fnv1a(stream)) + index);
}

TimeTagRun generate_timetags(double pair_rate, const DetectorSpec& det_a, const DetectorSpec& det_b,
                             double duration_s, std::uint64_t seed) {
    det_a.validate();
    det_b.validate();
    require(duration_s > 0.0, "duration must be positive");
    require(pair_rate >= 0.0, "pair rate must be non-negative");
    const double expected = (2.0 * pair_rate + det_a.dark_rate_cps + det_b.dark_rate_cps) * duration_s;
    require(expected < kMaxExpectedEvents, "expected event count exceeds 1e8 (desk-scale limit)");

    std::mt19937_64 rng(splitmix64(seed));
    const double duration_ps = duration_s / pico;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> jitter_a(0.0, det_a.jitter_fwhm_ps / fwhm_per_sigma);
    std::normal_distribution<double> jitter_b(0.0, det_b.jitter_fwhm_ps / fwhm_per_sigma);
    auto jittered = [&](double t, std::normal_distribution<double>& j, const DetectorSpec& d) {
        return d.jitter_fwhm_ps > 0.0 ? t + j(rng) : t;
    };

    std::poisson_distribution<long long> pair_count(pair_rate * duration_s);
    const long long n_pairs = pair_rate > 0.0 ? pair_count(rng) : 0;
    std::vector<double> arrivals(static_cast<std::size_t>(n_pairs));
    for (auto& t : arrivals) t = unit(rng) * duration_ps;
    std::sort(arrivals.begin(), arrivals.end());

    std::vector<double> ta, tb;
    ta.reserve(arrivals.size());
    tb.reserve(arrivals.size());
    TimeTagRun run;
    for (const double t : arrivals) {
        const double route = unit(rng);
        if (route < 0.5) {
            // Photons leave different ports.
            const bool hit_a = unit(rng) < det_a.efficiency;
            const bool hit_b = unit(rng) < det_b.efficiency;
            if (hit_a) ta.push_back(jittered(t, jitter_a, det_a));
            if (hit_b) tb.push_back(jittered(t, jitter_b, det_b));
            if (hit_a && hit_b) ++run.true_coincidences;
        } else {
            // Both photons on one detector: a single unresolved click.
            const bool to_a = route < 0.75;
            const DetectorSpec& d = to_a ? det_a : det_b;
            const double p_click = 1.0 - (1.0 - d.efficiency) * (1.0 - d.efficiency);
            if (unit(rng) < p_click) {
                if (to_a) ta.push_back(jittered(t, jitter_a, det_a));
                else tb.push_back(jittered(t, jitter_b, det_b));
            }
        }
    }
    append_darks(ta, det_a.dark_rate_cps, duration_ps, rng);
    append_darks(tb, det_b.dark_rate_cps, duration_ps, rng);

    run.a = finalize(0, ta, det_a);
    run.b = finalize(1, tb, det_b);
    return run;
}

CoincidenceHistogram histogram_coincidences(const TimeTagStream& a, const TimeTagStream& b, double bin_width_ps,
                                            double range_ns, double integration_time_s) {
    require(bin_width_ps > 0.0, "bin width must be positive");
    require(range_ns * 1e3 >= bin_width_ps, "histogram range must cover at least one bin");
    require(a.is_sorted() && b.is_sorted(), "time-tag streams must be sorted");

    const auto half = static_cast<Eigen::Index>(std::llround(range_ns * 1e3 / bin_width_ps));
    CoincidenceHistogram h;
    h.bin_width_ps = bin_width_ps;
    h.integration_time_s = integration_time_s;
    h.counts = Eigen::ArrayXd::Zero(2 * half + 1);
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(2 * half + 1), 0);

    const double edge = (static_cast<double>(half) + 0.5) * bin_width_ps;
    std::size_t lo = 0;
    const auto& tb = b.tags_ps;
    for (const std::uint64_t t : a.tags_ps) {
        const double ta = static_cast<double>(t);
        while (lo < tb.size() && static_cast<double>(tb[lo]) < ta - edge) ++lo;
        for (std::size_t j = lo; j < tb.size(); ++j) {
            const double delta = static_cast<double>(tb[j]) - ta;
            if (delta >= edge) break;
            const auto k = static_cast<Eigen::Index>(std::floor(delta / bin_width_ps + 0.5)) + half;
            if (k >= 0 && k <= 2 * half) ++counts[static_cast<std::size_t>(k)];
        }
    }
    for (std::size_t k = 0; k < counts.size(); ++k) h.counts(static_cast<Eigen::Index>(k)) = static_cast<double>(counts[k]);
    return h;
}

CoincidenceHistogram subtract_accidentals(const CoincidenceHistogram& h, double tail_fraction) {
    require(tail_fraction > 0.0 && tail_fraction < 0.5, "tail fraction must be in (0, 0.5)");
    require(!h.accidentals_subtracted, "accidentals were already subtracted");
    const Eigen::Index n = h.counts.size();
    const auto tail = static_cast<Eigen::Index>(std::floor(tail_fraction * static_cast<double>(n)));
    require(tail >= 1, "histogram too short for the requested tail fraction");

    CoincidenceHistogram out = h;
    out.accidental_level = (h.counts.head(tail).sum() + h.counts.tail(tail).sum()) / static_cast<double>(2 * tail);
    out.counts = h.counts - out.accidental_level;
    out.accidentals_subtracted = true;
    out.tail_bins = tail;
    return out;
}

WindowedCount windowed_coincidences(const CoincidenceHistogram& h, double window_ns) {
    require(window_ns > 0.0, "window must be positive");
    require(window_ns * 1e3 / 2.0 <= h.range_ps(), "window exceeds the histogram range");

    const Eigen::Index n = h.counts.size();
    Eigen::Index peak = h.half_bins();
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        double sum = 0.0;
        for (Eigen::Index k = std::max<Eigen::Index>(0, i - 2); k <= std::min<Eigen::Index>(n - 1, i + 2); ++k) {
            sum += h.counts(k);
        }
        if (sum > best) {
            best = sum;
            peak = i;
        }
    }

    WindowedCount out;
    out.peak_bin = peak;
    out.raw_histogram = !h.accidentals_subtracted;
    const double half_window = window_ns * 1e3 / 2.0;
    Eigen::Index in_window = 0;
    double raw_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(h.center_ps(i) - h.center_ps(peak)) <= half_window + 1e-9) {
            out.counts += h.counts(i);
            raw_sum += h.counts(i) + h.accidental_level;
            ++in_window;
        }
    }
    double variance = std::max(raw_sum, 0.0);
    if (h.accidentals_subtracted && h.tail_bins > 0) {
        const double level_var = h.accidental_level / static_cast<double>(2 * h.tail_bins);
        variance += static_cast<double>(in_window * in_window) * level_var;
    }
    out.std_error = std::sqrt(variance);
    return out;
}

Interferogram scan_coincidences(const Spectrum& spectrum, const PumpSpec& pump, const InterferometerSpec& ifo,
                                const DelayScan& scan, const DetectorSpec& det_a, const DetectorSpec& det_b,
                                const CoincidenceScanOptions& options, std::uint64_t seed) {
    require(options.duration_per_point_s > 0.0, "integration time per point must be positive");
    require(options.detected_pair_rate >= 0.0, "detected pair rate must be non-negative");
    InterferogramOptions model_options;
    model_options.envelope_broadening_fs = options.envelope_broadening_fs;
    model_options.normalization = Normalization::raw;
    const Interferogram model = coincidence_interferogram(spectrum, pump, ifo, scan, model_options);

    const Eigen::Index n = scan.size();
    Eigen::ArrayXd values(n);
    auto run_point = [&](Eigen::Index i) {
        const double rate = options.detected_pair_rate * model.values(i);
        const TimeTagRun tags = generate_timetags(rate, det_a, det_b, options.duration_per_point_s,
                                                  derive_seed(seed, "coincidence", static_cast<std::uint64_t>(i)));
        const CoincidenceHistogram h = subtract_accidentals(
            histogram_coincidences(tags.a, tags.b, options.bin_width_ps, options.range_ns, options.duration_per_point_s),
            options.tail_fraction);
        values(i) = std::max(0.0, windowed_coincidences(h, options.window_ns).counts / options.duration_per_point_s);
    };

    const int threads = std::max(1, options.threads);
    if (threads == 1) {
        for (Eigen::Index i = 0; i < n; ++i) run_point(i);
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (Eigen::Index i = t; i < n; i += threads) run_point(i);
            });
        }
    }
    return Interferogram(scan, std::move(values), Channel::coincidence, Normalization::raw);
}

double dark_floor_rate(double dark_rate_cps, double exposure_s) {
    require(dark_rate_cps >= 0.0 && exposure_s > 0.0, "dark floor needs non-negative dark rate and positive exposure");
    return 5.0 * std::sqrt(dark_rate_cps * exposure_s) / exposure_s;
}

void write_timetags_binary(const std::filesystem::path& path, const TimeTagStream& stream) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot open " + path.string() + " for writing");
    put_u32(out, kTimeTagMagic);
    put_u32(out, kTimeTagVersion);
    put_u32(out, stream.channel);
    put_u32(out, 0);
    put_u64(out, stream.tags_ps.size());
    for (const auto t : stream.tags_ps) put_u64(out, t);
}

TimeTagStream read_timetags_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path.string());
    if (get_le<std::uint32_t>(in) != kTimeTagMagic) throw InvalidInput(path.string() + ": not a time-tag file");
    if (get_le<std::uint32_t>(in) != kTimeTagVersion) throw InvalidInput(path.string() + ": unsupported version");
    TimeTagStream s;
    s.channel = get_le<std::uint32_t>(in);
    get_le<std::uint32_t>(in);
    const auto count = get_le<std::uint64_t>(in);
    s.tags_ps.resize(count);
    for (auto& t : s.tags_ps) t = get_le<std::uint64_t>(in);
    if (!s.is_sorted()) throw InvalidInput(path.string() + ": tags are not sorted");
    return s;
}

void write_timetags_csv(const std::filesystem::path& path, const TimeTagStream& stream) {
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot open " + path.string() + " for writing");
    out << "channel,tag_ps\n";
    for (const auto t : stream.tags_ps) out << stream.channel << ',' << t << '\n';
}

void write_histogram_csv(const std::filesystem::path& path, const CoincidenceHistogram& h) {
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot open " + path.string() + " for writing");
    out.precision(17);
    out << "delay_ps,counts\n";
    for (Eigen::Index i = 0; i < h.counts.size(); ++i) out << h.center_ps(i) << ',' << h.counts(i) << '\n';
}

}  // namespace biphoton
