#include "biphoton/commands.hpp"

#include "biphoton/error.hpp"
#include "biphoton/units.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

namespace biphoton {

namespace {

using json = nlohmann::json;

void parallel_for(Eigen::Index n, int threads, const std::function<void(Eigen::Index)>& body) {
    threads = std::max(1, threads);
    if (threads == 1 || n < 2) {
        for (Eigen::Index i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (Eigen::Index i = t; i < n; i += threads) body(i);
        });
    }
}

long long poisson(double mean, std::mt19937_64& rng) {
    if (!(mean > 0.0)) return 0;
    return std::poisson_distribution<long long>(mean)(rng);
}

double pump_frequency_hz(const PumpSpec& pump) { return speed_of_light / (pump.center_wavelength_nm * nano); }

// Fast coincidence trace: Poisson counts in the coincidence window with the accidental level
// estimated from histogram tails, matching the time-tag pipeline's expectation and variance.
Interferogram poisson_coincidences(const Interferogram& model, const DetectorConfig& det, double pair_scale,
                                   std::uint64_t seed, int threads) {
    const auto& c = det.coincidence;
    const double t = c.duration_per_point_s;
    const double bw_s = c.bin_width_ps * pico;
    const auto half_bins = static_cast<Eigen::Index>(std::llround(c.range_ns * 1e3 / c.bin_width_ps));
    const Eigen::Index n_bins = 2 * half_bins + 1;
    const auto tail = static_cast<Eigen::Index>(std::floor(c.tail_fraction * static_cast<double>(n_bins)));
    const auto window_bins = 2 * static_cast<Eigen::Index>(std::floor(c.window_ns * 1e3 / 2.0 / c.bin_width_ps)) + 1;
    auto single_fraction = [](double eta) { return 0.5 * eta + 0.25 * (1.0 - (1.0 - eta) * (1.0 - eta)); };

    Eigen::ArrayXd values(model.values.size());
    parallel_for(values.size(), threads, [&](Eigen::Index i) {
        std::mt19937_64 rng(derive_seed(seed, "coincidence", static_cast<std::uint64_t>(i)));
        const double rho = c.detected_pair_rate * pair_scale * model.values(i);
        const double true_mean = rho * t * 0.5 * det.a.efficiency * det.b.efficiency;
        const double r_a = rho * single_fraction(det.a.efficiency) + det.a.dark_rate_cps;
        const double r_b = rho * single_fraction(det.b.efficiency) + det.b.dark_rate_cps;
        const double level = r_a * r_b * bw_s * t; // accidentals per bin
        const double window_counts = static_cast<double>(poisson(true_mean + level * window_bins, rng));
        const double tail_counts = static_cast<double>(poisson(level * static_cast<double>(2 * tail), rng));
        const double estimate = tail_counts / static_cast<double>(2 * tail) * static_cast<double>(window_bins);
        values(i) = std::max(0.0, (window_counts - estimate) / t);
    });
    return Interferogram(model.scan, std::move(values), Channel::coincidence, Normalization::raw);
}

// Weighted sum of normalized spectra resampled onto the union of their grids.
std::optional<Spectrum> combine_spectra(const std::vector<std::pair<Spectrum, double>>& parts, const std::string& label) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    Eigen::Index n = 0;
    for (const auto& [s, w] : parts) {
        if (!(w > 0.0)) continue;
        lo = std::min(lo, s.omega()(0));
        hi = std::max(hi, s.omega()(s.size() - 1));
        n = std::max(n, s.size());
    }
    if (n == 0) return std::nullopt;
    const Eigen::ArrayXd grid = Eigen::ArrayXd::LinSpaced(2 * n, lo, hi);
    Eigen::ArrayXd density = Eigen::ArrayXd::Zero(grid.size());
    for (const auto& [s, w] : parts) {
        if (w > 0.0) density += w * s.density_at(grid) / s.integral();
    }
    return Spectrum::normalized(grid, density, label);
}

double tail_mean(const Eigen::ArrayXd& v, double fraction, double* sem) {
    const auto tail = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(fraction * v.size())));
    Eigen::ArrayXd both(2 * tail);
    both << v.head(tail), v.tail(tail);
    const double mean = both.mean();
    if (sem) {
        const double var = both.size() > 1 ? (both - mean).square().sum() / static_cast<double>(both.size() - 1) : 0.0;
        *sem = std::sqrt(var / static_cast<double>(both.size()));
    }
    return mean;
}

json number_or_null(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string file_name(const std::string& stem, Format format) { return stem + extension(format); }

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

InterferometerSpec sample_interferometer(const ScenarioConfig& config, const SampleSpec& sample) {
    InterferometerSpec ifo = config.resolved_interferometer();
    ifo.delay_offset_fs += sample.group_delay_shift_fs;
    return ifo;
}

}  // namespace

SimulationProducts simulate(const ScenarioConfig& config, int threads) {
    config.validate();
    const SourceSpec source = config.resolved_source();
    const PumpSpec& pump = source.pump;
    const InterferometerSpec ifo = config.resolved_interferometer();
    const DelayScan scan = config.scan.build();
    const SampleSpec sample = config.sample.build();
    SampleSpec blank = preset_sample(SamplePreset::ethanol_blank);
    blank.pathlength_cm = sample.pathlength_cm;

    const Spectrum spectrum = make_spectrum(source);
    const double pairs = pair_rate(source);
    const TransmissionResult transmission = transmit(spectrum, 2.0 * pairs, sample);
    const auto [pair_spectrum, pair_fraction] = transmit_pairs(spectrum, pump.angular_frequency(), sample);

    InterferogramOptions raw;
    raw.envelope_broadening_fs = source.envelope_broadening_fs;
    raw.normalization = Normalization::raw;

    auto coincidences = [&](const Spectrum& s, double scale, const InterferometerSpec& i, std::string_view stream) {
        const std::uint64_t seed = derive_seed(config.seed, stream);
        if (config.detectors.mode == CoincidenceMode::timetag) {
            CoincidenceScanOptions opts = config.detectors.coincidence;
            opts.detected_pair_rate *= scale;
            opts.envelope_broadening_fs = source.envelope_broadening_fs;
            opts.threads = threads;
            return scan_coincidences(s, pump, i, scan, config.detectors.a, config.detectors.b, opts, seed);
        }
        return poisson_coincidences(coincidence_interferogram(s, pump, i, scan, raw), config.detectors, scale, seed,
                                    threads);
    };

    const InterferometerSpec ifo_sample = sample_interferometer(config, sample);
    Interferogram reference = coincidences(spectrum, 1.0, ifo, "coincidence_reference");
    Interferogram through = coincidences(pair_spectrum, pair_fraction, ifo_sample, "coincidence_sample");

    // 90-degree channel: one-photon scatter follows the singles interferogram, ETPA fluorescence
    // follows the coincidence interferogram.
    InterferogramOptions unit;
    unit.envelope_broadening_fs = source.envelope_broadening_fs;
    const ScatterResult scatter = scatter_signal(spectrum, 2.0 * pairs, sample, config.geometry);
    Eigen::ArrayXd mean_90 = Eigen::ArrayXd::Zero(scan.size());
    if (scatter.has_signal) {
        mean_90 += scatter.rate_cps * singles_interferogram(scatter.spectrum, ifo_sample, scan, unit).values;
    }
    double etpa_rate = 0.0;
    std::optional<Spectrum> etpa_spectrum;
    if (sample.sigma_etpa_cm2 > 0.0) {
        const Interferogram shape = coincidence_interferogram(pair_spectrum, pump, ifo_sample, scan, unit);
        const EtpaResult etpa =
            etpa_fluorescence_signal(pairs * pair_fraction, config.geometry.beam_waist_um, sample, config.geometry, shape);
        mean_90 += etpa.delay_trace.values;
        etpa_rate = etpa.rate_cps;
        etpa_spectrum = etpa.spectrum;
    }
    const double dark = config.detectors.emiccd_dark_rate_cps;
    const double exposure = config.detectors.emiccd_exposure_s;
    const std::uint64_t emiccd_seed = derive_seed(config.seed, "emiccd");
    Eigen::ArrayXd counts_90(scan.size());
    parallel_for(scan.size(), threads, [&](Eigen::Index i) {
        std::mt19937_64 rng(derive_seed(emiccd_seed, "point", static_cast<std::uint64_t>(i)));
        const double k = static_cast<double>(poisson((mean_90(i) + dark) * exposure, rng));
        counts_90(i) = std::max(0.0, k / exposure - dark);
    });

    std::vector<std::pair<Spectrum, double>> parts;
    if (scatter.has_signal) parts.emplace_back(scatter.spectrum, scatter.rate_cps);
    if (etpa_spectrum && etpa_rate > 0.0) parts.emplace_back(*etpa_spectrum, etpa_rate);

    return SimulationProducts{spectrum,
                              transmission.spectrum,
                              combine_spectra(parts, "emission-90deg"),
                              std::move(reference),
                              std::move(through),
                              Interferogram(scan, std::move(counts_90), Channel::emiccd_90deg, Normalization::raw),
                              pairs,
                              2.0 * pairs,
                              pairs_per_mode(pairs, spectrum),
                              pair_fraction,
                              scatter.rate_cps,
                              scatter.mean_sigma_scatter_cm2,
                              etpa_rate,
                              dark_floor_rate(dark, exposure)};
}

double scaled_residual(const Eigen::ArrayXd& data, const Eigen::ArrayXd& model) {
    require(data.size() == model.size(), "residual needs equal lengths");
    const double mm = model.square().sum();
    const double scale = mm > 0.0 ? (data * model).sum() / mm : 0.0;
    const double norm = std::sqrt(data.square().sum());
    return norm > 0.0 ? std::sqrt((data - scale * model).square().sum()) / norm : 0.0;
}

AnalysisProducts analyze(const ScenarioConfig& config, const Interferogram& coincidence,
                         const std::optional<Interferogram>& emiccd_90, const std::optional<Spectrum>& spectrum_90) {
    config.validate();
    const SourceSpec source = config.resolved_source();
    const PumpSpec& pump = source.pump;
    const SampleSpec sample = config.sample.build();
    const double nu_p = pump_frequency_hz(pump);

    AnalysisProducts out;
    out.coincidence_dft = interferogram_to_spectrum(coincidence, config.analysis.window, true);
    FitOptions fit_options;
    fit_options.min_hz = config.analysis.fit_band_low * nu_p;
    fit_options.max_hz = config.analysis.fit_band_high * nu_p;
    out.fit = fit_gaussians(out.coincidence_dft, config.analysis.fit_peaks, fit_options);
    if (out.fit.residual_flag) out.notes.push_back("Gaussian fit flagged: poor residual or no convergence");

    out.visibility = visibility(coincidence, config.analysis.visibility);
    if (!out.visibility.value) out.notes.push_back("visibility undefined: trace is flat within the noise floor");
    out.correlation_time = correlation_time(coincidence, pump);
    if (!out.correlation_time.fwhm_fs) out.notes.push_back("correlation time undefined: envelope not resolved");

    const Spectrum input = make_spectrum(source);
    if (emiccd_90) {
        try {
            out.classification =
                classify_90deg(*emiccd_90, spectrum_90, input, sample.fluorescence, pump, config.analysis.thresholds);
        } catch (const InvalidInput& e) {
            out.notes.push_back(std::string("classification skipped: ") + e.what());
        }
        double sem = 0.0;
        const double signal = tail_mean(emiccd_90->values, 0.2, &sem);
        const bool in_range = sample.concentration_mM >= kMinConcentration_mM &&
                              sample.concentration_mM <= kMaxConcentration_mM;
        if (signal > 0.0 && in_range) {
            ScatterUncertainties u;
            u.signal = sem / signal;
            out.scatter_estimate = sigma_from_scatter(signal, config.geometry.collection_efficiency,
                                                      2.0 * pair_rate(source), sample.concentration_mM,
                                                      sample.pathlength_cm, u);
        } else {
            out.notes.push_back("scatter cross section skipped: no 90-degree signal or no solute");
        }
    }

    if (config.analysis.resimulate) {
        try {
            InterferogramOptions raw;
            raw.normalization = Normalization::raw;
            const Spectrum fitted = spectrum_from_peaks(out.fit.peaks, source.spectrum_params.grid_points);
            const Interferogram model = coincidence_interferogram(fitted, pump, sample_interferometer(config, sample),
                                                                  coincidence.scan, raw);
            out.resimulation_residual = scaled_residual(coincidence.values, model.values);
        } catch (const std::exception& e) {
            out.notes.push_back(std::string("resimulation skipped: ") + e.what());
        }
    }
    return out;
}

PowerScanProducts power_scan(const ScenarioConfig& config, std::optional<double> decades, std::optional<int> points) {
    config.validate();
    const PowerScanConfig& p = config.power_scan;
    const double span = decades.value_or(p.decades);
    const int n = points.value_or(p.points);
    require(span >= 2.0, "power scan needs at least 2 decades");
    require(n >= 5, "power scan needs at least 5 points");

    const SampleSpec sample = config.sample.build();
    const Spectrum spectrum = make_spectrum(config.resolved_source());
    PowerScanProducts out;
    if (p.sigma_cm2) {
        out.sigma_loss_cm2 = *p.sigma_cm2;
    } else {
        const Eigen::ArrayXd wl = spectrum.wavelength_nm();
        const Eigen::ArrayXd sigma = sample.sigma_one_photon_cm2.at(wl) + sample.sigma_scatter_cm2.at(wl);
        out.sigma_loss_cm2 = trapezoid(spectrum.density() * sigma, spectrum.step()) / spectrum.integral();
    }
    const double depth = out.sigma_loss_cm2 * number_density(sample) * sample.pathlength_cm;
    const double transmitted = std::exp(-depth);

    out.scan.input_rate.resize(n);
    out.scan.output_rate.resize(n);
    out.scan.output_sigma.resize(n);
    const std::uint64_t seed = derive_seed(config.seed, "power_scan");
    for (int i = 0; i < n; ++i) {
        const double rate = p.min_rate_per_s * std::pow(10.0, span * i / (n - 1));
        std::mt19937_64 rng(derive_seed(seed, "point", static_cast<std::uint64_t>(i)));
        const double counts = static_cast<double>(poisson(rate * p.integration_s * transmitted, rng));
        out.scan.input_rate(i) = rate;
        out.scan.output_rate(i) = std::max(counts, 1.0) / p.integration_s;
        out.scan.output_sigma(i) = std::sqrt(std::max(counts, 1.0)) / p.integration_s;
    }
    out.fit = power_law_fit(out.scan);
    out.reference_concentration =
        sample.concentration_mM < kMinConcentration_mM || sample.concentration_mM > kMaxConcentration_mM;
    out.concentration_mM = out.reference_concentration ? p.reference_concentration_mM : sample.concentration_mM;
    out.estimate = sigma_from_transmission(out.scan, out.concentration_mM, sample.pathlength_cm);
    return out;
}

json to_json(const GaussianFit& fit) {
    json peaks = json::array();
    for (const auto& p : fit.peaks) {
        peaks.push_back({{"center_THz", p.center_hz * 1e-12},
                         {"center_nm", speed_of_light / p.center_hz / nano},
                         {"fwhm_THz", p.fwhm_hz * 1e-12},
                         {"amplitude", p.amplitude}});
    }
    return {{"peaks", peaks},
            {"relative_residual", fit.relative_residual},
            {"converged", fit.converged},
            {"residual_flag", fit.residual_flag},
            {"quantile_initialization", fit.quantile_initialization},
            {"iterations", fit.iterations}};
}

json to_json(const VisibilityResult& v) {
    return {{"visibility", number_or_null(v.value)},
            {"defined", v.value.has_value()},
            {"max", v.max},
            {"min", v.min},
            {"noise_floor", v.noise_floor},
            {"envelope_width_fs", v.envelope_width_fs},
            {"fringe_period_fs", v.fringe_period_fs}};
}

json to_json(const CorrelationTimeResult& c) {
    return {{"fwhm_fs", number_or_null(c.fwhm_fs)},
            {"defined", c.fwhm_fs.has_value()},
            {"measured_fwhm_fs", c.measured_fwhm_fs},
            {"envelope_peak", c.envelope_peak},
            {"noise_floor", c.noise_floor},
            {"pump_frequency_THz", c.pump_frequency_hz * 1e-12}};
}

json to_json(const ClassificationReport& r) {
    const auto& t = r.thresholds_used;
    return {{"verdict", to_string(r.verdict)},
            {"evidence",
             {{"pump_fringe_present", r.pump_fringe_present},
              {"pump_ratio", r.pump_ratio},
              {"pump_score", r.pump_score},
              {"one_photon_fringe_present", r.one_photon_fringe_present},
              {"one_photon_ratio", r.one_photon_ratio},
              {"one_photon_score", r.one_photon_score},
              {"spectral_overlap_input", r.spectral_overlap_input},
              {"spectral_overlap_fluorescence", r.spectral_overlap_fluorescence}}},
            {"thresholds_used",
             {{"pump_ratio", t.pump_ratio},
              {"pump_band_bins", t.pump_band_bins},
              {"background_inner_bins", t.background_inner_bins},
              {"background_outer_bins", t.background_outer_bins},
              {"one_photon_ratio", t.one_photon_ratio}}}};
}

json to_json(const CrossSectionEstimate& e) {
    json inputs = json::object();
    for (const auto& [k, v] : e.inputs) inputs[k] = v;
    return {{"value_cm2", e.value_cm2},
            {"std_error_cm2", e.std_error_cm2},
            {"method", to_string(e.method)},
            {"upper_bound", e.upper_bound},
            {"inputs", inputs},
            {"flux_convention", "rate = gamma * pair_rate * sigma * n * l (beam area cancels)"}};
}

json to_json(const PowerLawFit& f) {
    return {{"alpha", f.alpha},
            {"beta_per_photon_per_s", f.beta},
            {"covariance", {{f.covariance(0, 0), f.covariance(0, 1)}, {f.covariance(1, 0), f.covariance(1, 1)}}},
            {"alpha_clipped", f.alpha_clipped},
            {"beta_clipped", f.beta_clipped},
            {"midpoint_rate_per_s", f.midpoint_rate},
            {"effective_exponent", f.effective_exponent},
            {"effective_exponent_std_error", f.exponent_std_error},
            {"effective_exponent_ci95", {f.exponent_ci_low, f.exponent_ci_high}},
            {"chi2", f.chi2},
            {"dof", f.dof},
            {"negative_loss_flag", f.negative_loss_flag}};
}

json to_json(const AnalysisProducts& a) {
    json out = {{"fit", to_json(a.fit)},
                {"visibility", to_json(a.visibility)},
                {"correlation_time", to_json(a.correlation_time)},
                {"classification", a.classification ? to_json(*a.classification) : json(nullptr)},
                {"resimulation_relative_rms", number_or_null(a.resimulation_residual)},
                {"scatter_cross_section", a.scatter_estimate ? to_json(*a.scatter_estimate) : json(nullptr)},
                {"notes", a.notes}};
    out["dft_bin_width_THz"] = a.coincidence_dft.bin_width_hz() * 1e-12;
    return out;
}

void cmd_simulate(const ScenarioConfig& config, const std::filesystem::path& out_dir, const RunOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const SimulationProducts sim = simulate(config, options.threads);
    const double simulate_s = seconds_since(start);

    std::filesystem::create_directories(out_dir);
    const std::string config_text = serialize_scenario(config);
    write_text(out_dir / "config.ini", config_text);

    const Format f = options.format;
    json files = json::object();
    auto put_table = [&](const std::string& key, const std::string& stem, const Table& table) {
        const std::string name = file_name(stem, f);
        write_table(out_dir / name, table, f);
        files[key] = name;
    };
    put_table("spectrum_input", "spectrum_input", spectrum_table(sim.input_spectrum));
    put_table("spectrum_transmitted", "spectrum_transmitted", spectrum_table(sim.transmitted_spectrum));
    if (sim.spectrum_90) put_table("spectrum_90deg", "spectrum_90deg", spectrum_table(*sim.spectrum_90));
    put_table("coincidence_reference", "coincidence_reference",
              interferogram_table(sim.coincidence_reference, config.stage_fs_per_um));
    put_table("coincidence_sample", "coincidence_sample",
              interferogram_table(sim.coincidence_sample, config.stage_fs_per_um));
    put_table("emiccd_90deg", "emiccd_90deg", interferogram_table(sim.emiccd_90, config.stage_fs_per_um));

    if (config.emit_timetags) {
        // One representative stage position: the delay of the coincidence maximum.
        InterferogramOptions raw;
        raw.normalization = Normalization::raw;
        raw.envelope_broadening_fs = config.source.envelope_broadening_fs;
        const Interferogram model = coincidence_interferogram(sim.input_spectrum, config.source.pump,
                                                              config.resolved_interferometer(), config.scan.build(), raw);
        Eigen::Index peak = 0;
        model.values.maxCoeff(&peak);
        const auto& c = config.detectors.coincidence;
        const TimeTagRun tags = generate_timetags(c.detected_pair_rate * model.values(peak), config.detectors.a,
                                                  config.detectors.b, c.duration_per_point_s,
                                                  derive_seed(config.seed, "timetags"));
        write_timetags_binary(out_dir / "timetags_a.bin", tags.a);
        write_timetags_binary(out_dir / "timetags_b.bin", tags.b);
        const CoincidenceHistogram h =
            histogram_coincidences(tags.a, tags.b, c.bin_width_ps, c.range_ns, c.duration_per_point_s);
        write_histogram_csv(out_dir / "timetag_histogram.csv", h);
        files["timetags_a"] = "timetags_a.bin";
        files["timetags_b"] = "timetags_b.bin";
        files["timetag_histogram"] = "timetag_histogram.csv";
    }

    json summary = {{"tool_version", kToolVersion},
                    {"config_sha256", sha256_hex(config_text)},
                    {"config", config_text},
                    {"seed", config.seed},
                    {"format", to_string(f)},
                    {"files", files},
                    {"pair_rate_per_s", sim.pair_rate_per_s},
                    {"photon_rate_per_s", sim.photon_rate_per_s},
                    {"pairs_per_mode", sim.pairs_per_mode.value},
                    {"pairs_per_mode_exceeds_limit", sim.pairs_per_mode.exceeds_single_pair_limit},
                    {"input_fwhm_THz", sim.input_spectrum.fwhm_hz() * 1e-12},
                    {"transmitted_pair_fraction", sim.transmitted_pair_fraction},
                    {"scatter_rate_cps", sim.scatter_rate_cps},
                    {"mean_sigma_scatter_cm2", sim.mean_sigma_scatter_cm2},
                    {"etpa_rate_cps", sim.etpa_rate_cps},
                    {"emiccd_dark_floor_cps", sim.emiccd_dark_floor_cps},
                    {"scatter_above_dark_floor", sim.scatter_rate_cps > sim.emiccd_dark_floor_cps},
                    {"scan_points", sim.coincidence_sample.scan.size()},
                    {"scan_step_fs", sim.coincidence_sample.scan.step()}};
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");
    write_text(out_dir / "timings.json",
               json({{"simulate_wall_s", simulate_s}, {"total_wall_s", seconds_since(start)}, {"threads", options.threads}})
                       .dump(2) +
                   "\n");
}

nlohmann::json cmd_analyze_run(const std::filesystem::path& run_dir) {
    const auto summary_path = run_dir / "summary.json";
    if (!std::filesystem::exists(summary_path)) {
        throw InvalidInput(run_dir.string() + " is not a run directory (summary.json missing)");
    }
    json summary;
    try {
        summary = json::parse(read_text(summary_path));
    } catch (const json::exception& e) {
        throw InvalidInput(summary_path.string() + ": " + e.what());
    }
    const ScenarioConfig config = load_scenario(run_dir / "config.ini");
    const auto& files = summary.at("files");
    const Interferogram coincidence = read_interferogram(run_dir / files.at("coincidence_sample").get<std::string>(),
                                                         Channel::coincidence, Normalization::raw);
    std::optional<Interferogram> emiccd;
    if (files.contains("emiccd_90deg")) {
        emiccd = read_interferogram(run_dir / files.at("emiccd_90deg").get<std::string>(), Channel::emiccd_90deg,
                                    Normalization::raw);
    }
    std::optional<Spectrum> spectrum_90;
    if (files.contains("spectrum_90deg")) {
        spectrum_90 = read_spectrum(run_dir / files.at("spectrum_90deg").get<std::string>(), "emission-90deg");
    }
    json report = to_json(analyze(config, coincidence, emiccd, spectrum_90));
    report["config_sha256"] = summary.at("config_sha256");
    report["tool_version"] = kToolVersion;
    write_text(run_dir / "analysis.json", report.dump(2) + "\n");
    return report;
}

nlohmann::json cmd_analyze_files(const ScenarioConfig& config, const std::filesystem::path& coincidence,
                                 const std::optional<std::filesystem::path>& emiccd_90,
                                 const std::optional<std::filesystem::path>& spectrum_90,
                                 const std::filesystem::path& out_dir) {
    const Interferogram ig = read_interferogram(coincidence, Channel::coincidence, Normalization::raw);
    std::optional<Interferogram> emiccd;
    if (emiccd_90) emiccd = read_interferogram(*emiccd_90, Channel::emiccd_90deg, Normalization::raw);
    std::optional<Spectrum> spec;
    if (spectrum_90) spec = read_spectrum(*spectrum_90, "emission-90deg");
    json report = to_json(analyze(config, ig, emiccd, spec));
    report["config_sha256"] = sha256_hex(serialize_scenario(config));
    report["tool_version"] = kToolVersion;
    write_text(out_dir / "analysis.json", report.dump(2) + "\n");
    return report;
}

nlohmann::json cmd_power_scan(const ScenarioConfig& config, const std::filesystem::path& out_dir,
                              std::optional<double> decades, std::optional<int> points, const RunOptions& options) {
    const PowerScanProducts ps = power_scan(config, decades, points);
    const std::string table_name = file_name("power_scan", options.format);
    write_table(out_dir / table_name, power_scan_table(ps.scan), options.format);

    // Both parameterizations: loss versus input, and transmitted versus input.
    const double mid = ps.fit.midpoint_rate;
    const double loss_mid = ps.fit.alpha * mid + ps.fit.beta * mid * mid;
    json report = {{"file", table_name},
                   {"power_law_fit", to_json(ps.fit)},
                   {"cross_section", to_json(ps.estimate)},
                   {"sigma_loss_cm2", ps.sigma_loss_cm2},
                   {"concentration_mM", ps.concentration_mM},
                   {"reference_concentration_used", ps.reference_concentration},
                   {"transmitted_fraction_at_midpoint", mid > 0.0 ? 1.0 - loss_mid / mid : 1.0},
                   {"config_sha256", sha256_hex(serialize_scenario(config))},
                   {"tool_version", kToolVersion}};
    write_text(out_dir / "xsec_transmission.json", report.dump(2) + "\n");
    return report;
}

std::vector<std::string> cmd_report(const std::filesystem::path& run_dir) {
    const auto analysis_path = run_dir / "analysis.json";
    if (!std::filesystem::exists(analysis_path)) {
        throw InvalidInput(run_dir.string() + " has not been analyzed; run `biphoton analyze " + run_dir.string() +
                           "` first");
    }
    const json analysis = json::parse(read_text(analysis_path));
    const json summary = json::parse(read_text(run_dir / "summary.json"));
    const ScenarioConfig config = load_scenario(run_dir / "config.ini");
    const auto& files = summary.at("files");
    auto load_ig = [&](const std::string& key, Channel ch) {
        return read_interferogram(run_dir / files.at(key).get<std::string>(), ch, Normalization::raw);
    };
    const Interferogram reference = load_ig("coincidence_reference", Channel::coincidence);
    const Interferogram through = load_ig("coincidence_sample", Channel::coincidence);
    const Interferogram emiccd = load_ig("emiccd_90deg", Channel::emiccd_90deg);

    const auto dir = run_dir / "report";
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;
    auto put = [&](const std::string& name, const Table& t) {
        write_table(dir / name, t, Format::csv);
        written.push_back(name);
    };

    put("delay_traces.csv", Table{{"delay_fs", "coincidence_reference_cps", "coincidence_sample_cps", "emiccd_90deg_cps"},
                                 {reference.scan.delays(), reference.values, through.values, emiccd.values}});

    const FrequencySpectrumEstimate dft_ref = interferogram_to_spectrum(reference, config.analysis.window, true);
    const FrequencySpectrumEstimate dft_s = interferogram_to_spectrum(through, config.analysis.window, true);
    const FrequencySpectrumEstimate dft_90 = interferogram_to_spectrum(emiccd, config.analysis.window, true);
    put("delay_traces_dft.csv", Table{{"frequency_THz", "coincidence_reference", "coincidence_sample", "emiccd_90deg"},
                              {dft_ref.frequencies_hz * 1e-12, dft_ref.magnitude, dft_s.magnitude, dft_90.magnitude}});

    // Spectra per unit wavelength on a shared grid, each scaled to unit peak.
    const Eigen::ArrayXd wl = Eigen::ArrayXd::LinSpaced(701, 400.0, 1100.0);
    const Eigen::ArrayXd omega = two_pi * speed_of_light / (wl * nano);
    auto per_nm = [&](const std::optional<Spectrum>& s) {
        Eigen::ArrayXd d = Eigen::ArrayXd::Zero(wl.size());
        if (s) d = s->density_at(omega) * omega.square();
        const double peak = d.maxCoeff();
        return peak > 0.0 ? Eigen::ArrayXd(d / peak) : d;
    };
    std::optional<Spectrum> spec_90;
    if (files.contains("spectrum_90deg")) {
        spec_90 = read_spectrum(run_dir / files.at("spectrum_90deg").get<std::string>(), "emission-90deg");
    }
    const Spectrum input = read_spectrum(run_dir / files.at("spectrum_input").get<std::string>(), "input");
    put("spectra_overlay.csv", Table{{"wavelength_nm", "input", "emission_90deg", "fluorescence_reference"},
                                  {wl, per_nm(input), per_nm(spec_90), per_nm(config.sample.build().fluorescence)}});

    for (const auto& candidate : {"power_scan.csv", "power_scan.json"}) {
        if (std::filesystem::exists(run_dir / candidate)) {
            const PowerScan scan = read_power_scan(run_dir / candidate);
            put("power_scan_loglog.csv",
                Table{{"input_rate_per_s", "transmitted_rate_per_s", "transmitted_sigma_per_s", "loss_rate_per_s"},
                      {scan.input_rate, scan.output_rate, scan.output_sigma, scan.input_rate - scan.output_rate}});
            break;
        }
    }

    std::ostringstream text;
    auto value_or_undefined = [](const json& v) { return v.is_null() ? std::string("undefined") : v.dump(); };
    text << "scenario: " << config.name << "\n";
    text << "config sha256: " << summary.at("config_sha256").get<std::string>() << "\n";
    text << "pair rate (1/s): " << summary.at("pair_rate_per_s").dump() << "\n";
    text << "pairs per mode: " << summary.at("pairs_per_mode").dump() << "\n";
    text << "visibility: " << value_or_undefined(analysis.at("visibility").at("visibility")) << "\n";
    text << "correlation time FWHM (fs): " << value_or_undefined(analysis.at("correlation_time").at("fwhm_fs")) << "\n";
    for (const auto& p : analysis.at("fit").at("peaks")) {
        text << "fitted peak: " << p.at("center_nm").dump() << " nm, FWHM " << p.at("fwhm_THz").dump() << " THz\n";
    }
    const auto& cls = analysis.at("classification");
    text << "90-degree verdict: " << (cls.is_null() ? std::string("not classified") : cls.at("verdict").get<std::string>())
         << "\n";
    if (!cls.is_null()) {
        text << "pump-frequency peak in 90-degree trace: "
             << (cls.at("evidence").at("pump_fringe_present").get<bool>() ? "present" : "absent") << "\n";
    }
    const auto& xs = analysis.at("scatter_cross_section");
    if (!xs.is_null()) {
        text << "scatter cross section (cm^2): " << xs.at("value_cm2").dump() << " +/- " << xs.at("std_error_cm2").dump()
             << "\n";
    }
    for (const auto& note : analysis.at("notes")) text << "note: " << note.get<std::string>() << "\n";
    write_text(dir / "summary.txt", text.str());
    written.push_back("summary.txt");

    write_text(dir / "manifest.json", json({{"files", written}, {"config_sha256", summary.at("config_sha256")}}).dump(2) + "\n");
    written.push_back("manifest.json");
    return written;
}

nlohmann::json cmd_presets() {
    const Spectrum split = make_split_spectrum(812.0, 150.0, 30.0, 2048);
    const Eigen::ArrayXd wl = split.wavelength_nm();
    json out = json::array();
    for (const SamplePreset preset : all_sample_presets()) {
        const SampleSpec s = preset_sample(preset);
        const double mean_scatter =
            trapezoid(split.density() * s.sigma_scatter_cm2.at(wl), split.step()) / split.integral();
        out.push_back({{"name", to_string(preset)},
                       {"concentration_mM", s.concentration_mM},
                       {"pathlength_cm", s.pathlength_cm},
                       {"mean_sigma_scatter_split_cm2", mean_scatter},
                       {"sigma_etpa_cm2", s.sigma_etpa_cm2},
                       {"quantum_yield", s.quantum_yield},
                       {"group_delay_shift_fs", s.group_delay_shift_fs},
                       {"has_fluorescence", s.fluorescence.has_value()}});
    }
    return out;
}

}  // namespace biphoton
