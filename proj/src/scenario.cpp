#include "biphoton/scenario.hpp"

#include "biphoton/error.hpp"
#include "biphoton/io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace biphoton {

namespace {

namespace pt = boost::property_tree;

class Reader {
 public:
    Reader(const pt::ptree& root, std::filesystem::path base) : root_(root), base_(std::move(base)) {}

    std::optional<std::string> text(const std::string& section, const std::string& key) {
        used_[section].insert(key);
        const auto sec = root_.get_child_optional(pt::ptree::path_type(section, '\0'));
        if (!sec) return std::nullopt;
        const auto value = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
        if (!value) return std::nullopt;
        return *value;
    }

    void number(const std::string& section, const std::string& key, double& out) {
        if (const auto v = text(section, key)) out = parse_double(*v, where(section, key));
    }

    void number(const std::string& section, const std::string& key, std::optional<double>& out) {
        if (const auto v = text(section, key)) out = parse_double(*v, where(section, key));
    }

    void integer(const std::string& section, const std::string& key, int& out) {
        if (const auto v = text(section, key)) {
            const double d = parse_double(*v, where(section, key));
            require(d == std::floor(d) && std::abs(d) < 1e9, where(section, key) + ": expected an integer");
            out = static_cast<int>(d);
        }
    }

    void seed(const std::string& section, const std::string& key, std::uint64_t& out) {
        if (const auto v = text(section, key)) {
            std::size_t pos = 0;
            unsigned long long value = 0;
            try {
                value = std::stoull(*v, &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            require(pos == v->size() && !v->empty() && (*v)[0] != '-',
                    where(section, key) + ": expected a non-negative integer");
            out = value;
        }
    }

    void boolean(const std::string& section, const std::string& key, bool& out) {
        if (const auto v = text(section, key)) {
            if (*v == "true") out = true;
            else if (*v == "false") out = false;
            else throw InvalidInput(where(section, key) + ": expected true or false, got '" + *v + "'");
        }
    }

    void string(const std::string& section, const std::string& key, std::string& out) {
        if (const auto v = text(section, key)) out = *v;
    }

    void string(const std::string& section, const std::string& key, std::optional<std::string>& out) {
        if (const auto v = text(section, key)) out = *v;
    }

    void path(const std::string& section, const std::string& key, std::optional<std::string>& out) {
        if (const auto v = text(section, key)) {
            std::filesystem::path p(*v);
            if (p.is_relative() && !base_.empty()) p = base_ / p;
            out = p.lexically_normal().string();
        }
    }

    void reject_unknown() const {
        for (const auto& [section, body] : root_) {
            if (body.empty() && !body.data().empty()) {
                throw InvalidInput("config key '" + section + "' must be inside a [section]");
            }
            const auto known = used_.find(section);
            if (known == used_.end()) throw InvalidInput("unknown config section [" + section + "]");
            for (const auto& [key, value] : body) {
                if (!known->second.count(key)) throw InvalidInput("unknown config key '" + key + "' in [" + section + "]");
            }
        }
    }

    static std::string where(const std::string& section, const std::string& key) {
        return "config [" + section + "] " + key;
    }

 private:
    const pt::ptree& root_;
    std::filesystem::path base_;
    std::map<std::string, std::set<std::string>> used_;
};

class Writer {
 public:
    void section(const std::string& name) {
        if (!out_.str().empty()) out_ << '\n';
        out_ << '[' << name << "]\n";
    }
    void put(const std::string& key, const std::string& value) { out_ << key << " = " << value << '\n'; }
    void put(const std::string& key, double value) { put(key, format_double(value)); }
    void put(const std::string& key, int value) { put(key, std::to_string(value)); }
    void put(const std::string& key, bool value) { put(key, std::string(value ? "true" : "false")); }
    void put(const std::string& key, const std::optional<double>& value) {
        if (value) put(key, *value);
    }
    void put(const std::string& key, const std::optional<std::string>& value) {
        if (value) put(key, *value);
    }
    std::string str() const { return out_.str(); }

 private:
    std::ostringstream out_;
};

}  // namespace

DelayScan ScanParams::build() const {
    require(std::isfinite(start_fs) && std::isfinite(stop_fs) && stop_fs > start_fs, "scan stop must exceed start");
    require(step_fs > 0.0, "scan step must be positive");
    return DelayScan::uniform(start_fs, stop_fs, step_fs);
}

std::string to_string(CoincidenceMode mode) { return mode == CoincidenceMode::timetag ? "timetag" : "poisson"; }

CoincidenceMode coincidence_mode_from_string(const std::string& text) {
    if (text == "poisson") return CoincidenceMode::poisson;
    if (text == "timetag") return CoincidenceMode::timetag;
    throw InvalidInput("unknown coincidence mode '" + text + "' (expected poisson or timetag)");
}

SampleSpec SampleConfig::build() const {
    SampleSpec s;
    if (preset) {
        s = preset_sample(*preset);
    } else {
        s.name = "inline";
    }
    if (name) s.name = *name;
    if (concentration_mM) s.concentration_mM = *concentration_mM;
    if (pathlength_cm) s.pathlength_cm = *pathlength_cm;
    if (sigma_one_photon_cm2) s.sigma_one_photon_cm2 = WavelengthTable::constant(*sigma_one_photon_cm2);
    if (sigma_scatter_cm2) s.sigma_scatter_cm2 = WavelengthTable::constant(*sigma_scatter_cm2);
    if (sigma_one_photon_csv) s.sigma_one_photon_cm2 = WavelengthTable(read_wavelength_table(*sigma_one_photon_csv));
    if (sigma_scatter_csv) s.sigma_scatter_cm2 = WavelengthTable(read_wavelength_table(*sigma_scatter_csv));
    if (sigma_etpa_cm2) s.sigma_etpa_cm2 = *sigma_etpa_cm2;
    if (fluorescence_csv) s.fluorescence = load_spectrum(read_wavelength_table(*fluorescence_csv), 1024);
    if (quantum_yield) s.quantum_yield = *quantum_yield;
    if (group_delay_shift_fs) s.group_delay_shift_fs = *group_delay_shift_fs;
    return s;
}

SourceSpec ScenarioConfig::resolved_source() const {
    SourceSpec s = source;
    if (s.spectrum_mode == SpectrumMode::tabulated) {
        require(spectrum_table_csv.has_value(), "tabulated spectrum mode needs [source] spectrum_table_csv");
        s.spectrum_params.table = read_wavelength_table(*spectrum_table_csv);
    }
    return s;
}

InterferometerSpec ScenarioConfig::resolved_interferometer() const {
    InterferometerSpec ifo = interferometer;
    if (pump_linewidth_damping) ifo.pump_fringe_damping_fs = pump_coherence_damping_fs(source.pump);
    return ifo;
}

void ScenarioConfig::validate() const {
    require(!name.empty(), "scenario name must not be empty");
    require(!outputs.empty(), "outputs directory must not be empty");
    resolved_source().validate();
    resolved_interferometer().validate();
    require(stage_fs_per_um > 0.0, "stage conversion must be positive");
    scan.build();
    sample.build().validate();
    detectors.a.validate();
    detectors.b.validate();
    const auto& c = detectors.coincidence;
    require(c.duration_per_point_s > 0.0, "coincidence integration time must be positive");
    require(c.detected_pair_rate >= 0.0, "detected pair rate must be non-negative");
    require(c.bin_width_ps > 0.0 && c.range_ns * 1e3 >= c.bin_width_ps, "histogram bins must fit in the range");
    require(c.window_ns > 0.0 && c.window_ns / 2.0 <= c.range_ns, "coincidence window must fit in the range");
    require(c.tail_fraction > 0.0 && c.tail_fraction < 0.5, "tail fraction must be in (0, 0.5)");
    require(detectors.emiccd_dark_rate_cps >= 0.0, "EMICCD dark rate must be non-negative");
    require(detectors.emiccd_exposure_s > 0.0, "EMICCD exposure must be positive");
    geometry.validate();
    require(analysis.fit_peaks >= 1 && analysis.fit_peaks <= 6, "fit_peaks must be between 1 and 6");
    require(analysis.fit_band_low > 0.0 && analysis.fit_band_low < analysis.fit_band_high && analysis.fit_band_high < 1.0,
            "fit band fractions must satisfy 0 < low < high < 1");
    require(analysis.visibility.region_envelope_widths > 0.0, "visibility region must be positive");
    require(analysis.visibility.smoothing_fraction >= 0.0 && analysis.visibility.smoothing_fraction < 1.0,
            "visibility smoothing must be a fraction of a fringe period");
    require(analysis.thresholds.pump_ratio > 0.0 && analysis.thresholds.one_photon_ratio > 0.0,
            "classification thresholds must be positive");
    require(power_scan.decades >= 2.0, "power scan needs at least 2 decades");
    require(power_scan.points >= 5, "power scan needs at least 5 points");
    require(power_scan.min_rate_per_s > 0.0 && power_scan.integration_s > 0.0,
            "power scan rate and integration time must be positive");
    require(!power_scan.sigma_cm2 || *power_scan.sigma_cm2 >= 0.0, "power scan cross section must be non-negative");
    require(power_scan.reference_concentration_mM > 0.0, "reference concentration must be positive");
}

ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
    pt::ptree root;
    try {
        std::istringstream in(text);
        pt::ini_parser::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw InvalidInput("config line " + std::to_string(e.line()) + ": " + e.message());
    }

    ScenarioConfig c;
    Reader r(root, base_dir);

    r.string("run", "name", c.name);
    r.seed("run", "seed", c.seed);
    r.string("run", "outputs", c.outputs);
    r.boolean("run", "emit_timetags", c.emit_timetags);

    auto& s = c.source;
    r.number("source", "pump_center_nm", s.pump.center_wavelength_nm);
    r.number("source", "pump_linewidth_nm", s.pump.linewidth_fwhm_nm);
    r.number("source", "pump_power_w", s.pump.power_w);
    r.number("source", "spdc_power_w", s.spdc_power_w);
    r.number("source", "conversion_efficiency", s.conversion_efficiency);
    if (const auto mode = r.text("source", "spectrum_mode")) s.spectrum_mode = spectrum_mode_from_string(*mode);
    r.number("source", "center_wavelength_nm", s.spectrum_params.center_wavelength_nm);
    r.number("source", "fwhm_nm", s.spectrum_params.fwhm_nm);
    r.number("source", "lobe_separation_nm", s.spectrum_params.lobe_separation_nm);
    r.number("source", "lobe_fwhm_nm", s.spectrum_params.lobe_fwhm_nm);
    r.integer("source", "grid_points", s.spectrum_params.grid_points);
    r.path("source", "spectrum_table_csv", c.spectrum_table_csv);
    r.number("source", "envelope_broadening_fs", s.envelope_broadening_fs);

    auto& ifo = c.interferometer;
    r.number("interferometer", "splitter_reflectance", ifo.splitter_reflectance);
    r.number("interferometer", "interference_suppression", ifo.interference_suppression);
    r.boolean("interferometer", "pump_linewidth_damping", c.pump_linewidth_damping);
    r.number("interferometer", "delay_offset_fs", ifo.delay_offset_fs);
    r.number("interferometer", "stage_fs_per_um", c.stage_fs_per_um);

    r.number("scan", "start_fs", c.scan.start_fs);
    r.number("scan", "stop_fs", c.scan.stop_fs);
    r.number("scan", "step_fs", c.scan.step_fs);

    auto& sm = c.sample;
    if (const auto preset = r.text("sample", "preset")) {
        sm.preset = *preset == "none" ? std::nullopt : std::optional(sample_preset_from_string(*preset));
    }
    r.string("sample", "name", sm.name);
    r.number("sample", "concentration_mM", sm.concentration_mM);
    r.number("sample", "pathlength_cm", sm.pathlength_cm);
    r.number("sample", "sigma_one_photon_cm2", sm.sigma_one_photon_cm2);
    r.number("sample", "sigma_scatter_cm2", sm.sigma_scatter_cm2);
    r.path("sample", "sigma_one_photon_csv", sm.sigma_one_photon_csv);
    r.path("sample", "sigma_scatter_csv", sm.sigma_scatter_csv);
    r.number("sample", "sigma_etpa_cm2", sm.sigma_etpa_cm2);
    r.path("sample", "fluorescence_csv", sm.fluorescence_csv);
    r.number("sample", "quantum_yield", sm.quantum_yield);
    r.number("sample", "group_delay_shift_fs", sm.group_delay_shift_fs);
    require(!(sm.sigma_one_photon_cm2 && sm.sigma_one_photon_csv),
            "config [sample]: give sigma_one_photon_cm2 or sigma_one_photon_csv, not both");
    require(!(sm.sigma_scatter_cm2 && sm.sigma_scatter_csv),
            "config [sample]: give sigma_scatter_cm2 or sigma_scatter_csv, not both");

    auto& d = c.detectors;
    r.number("detectors", "efficiency_a", d.a.efficiency);
    r.number("detectors", "efficiency_b", d.b.efficiency);
    r.number("detectors", "dark_rate_a_cps", d.a.dark_rate_cps);
    r.number("detectors", "dark_rate_b_cps", d.b.dark_rate_cps);
    r.number("detectors", "jitter_fwhm_a_ps", d.a.jitter_fwhm_ps);
    r.number("detectors", "jitter_fwhm_b_ps", d.b.jitter_fwhm_ps);
    r.number("detectors", "deadtime_a_ns", d.a.deadtime_ns);
    r.number("detectors", "deadtime_b_ns", d.b.deadtime_ns);
    if (const auto mode = r.text("detectors", "coincidence_mode")) d.mode = coincidence_mode_from_string(*mode);
    r.number("detectors", "integration_per_point_s", d.coincidence.duration_per_point_s);
    r.number("detectors", "pair_rate_at_splitter_per_s", d.coincidence.detected_pair_rate);
    r.number("detectors", "bin_width_ps", d.coincidence.bin_width_ps);
    r.number("detectors", "histogram_range_ns", d.coincidence.range_ns);
    r.number("detectors", "window_ns", d.coincidence.window_ns);
    r.number("detectors", "tail_fraction", d.coincidence.tail_fraction);
    r.number("detectors", "emiccd_dark_rate_cps", d.emiccd_dark_rate_cps);
    r.number("detectors", "emiccd_exposure_s", d.emiccd_exposure_s);

    r.number("geometry", "collection_efficiency", c.geometry.collection_efficiency);
    r.number("geometry", "beam_waist_um", c.geometry.beam_waist_um);

    auto& a = c.analysis;
    if (const auto w = r.text("analysis", "window")) a.window = window_from_string(*w);
    r.integer("analysis", "fit_peaks", a.fit_peaks);
    r.number("analysis", "fit_band_low_of_pump", a.fit_band_low);
    r.number("analysis", "fit_band_high_of_pump", a.fit_band_high);
    r.number("analysis", "visibility_region_envelope_widths", a.visibility.region_envelope_widths);
    r.number("analysis", "visibility_smoothing_of_period", a.visibility.smoothing_fraction);
    r.number("analysis", "pump_ratio_threshold", a.thresholds.pump_ratio);
    r.integer("analysis", "pump_band_bins", a.thresholds.pump_band_bins);
    r.integer("analysis", "background_inner_bins", a.thresholds.background_inner_bins);
    r.integer("analysis", "background_outer_bins", a.thresholds.background_outer_bins);
    r.number("analysis", "one_photon_ratio_threshold", a.thresholds.one_photon_ratio);
    r.boolean("analysis", "resimulate", a.resimulate);

    auto& p = c.power_scan;
    r.number("power_scan", "decades", p.decades);
    r.integer("power_scan", "points", p.points);
    r.number("power_scan", "min_rate_per_s", p.min_rate_per_s);
    r.number("power_scan", "integration_s", p.integration_s);
    r.number("power_scan", "sigma_cm2", p.sigma_cm2);
    r.number("power_scan", "reference_concentration_mM", p.reference_concentration_mM);

    r.reject_unknown();
    return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw InvalidInput("config file not found: " + path.string());
    try {
        return parse_scenario(read_text(path), std::filesystem::absolute(path).parent_path());
    } catch (const InvalidInput& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

std::string serialize_scenario(const ScenarioConfig& c) {
    Writer w;
    w.section("run");
    w.put("name", c.name);
    w.put("seed", std::to_string(c.seed));
    w.put("outputs", c.outputs);
    w.put("emit_timetags", c.emit_timetags);

    const auto& s = c.source;
    w.section("source");
    w.put("pump_center_nm", s.pump.center_wavelength_nm);
    w.put("pump_linewidth_nm", s.pump.linewidth_fwhm_nm);
    w.put("pump_power_w", s.pump.power_w);
    w.put("spdc_power_w", s.spdc_power_w);
    w.put("conversion_efficiency", s.conversion_efficiency);
    w.put("spectrum_mode", to_string(s.spectrum_mode));
    w.put("center_wavelength_nm", s.spectrum_params.center_wavelength_nm);
    w.put("fwhm_nm", s.spectrum_params.fwhm_nm);
    w.put("lobe_separation_nm", s.spectrum_params.lobe_separation_nm);
    w.put("lobe_fwhm_nm", s.spectrum_params.lobe_fwhm_nm);
    w.put("grid_points", s.spectrum_params.grid_points);
    w.put("spectrum_table_csv", c.spectrum_table_csv);
    w.put("envelope_broadening_fs", s.envelope_broadening_fs);

    w.section("interferometer");
    w.put("splitter_reflectance", c.interferometer.splitter_reflectance);
    w.put("interference_suppression", c.interferometer.interference_suppression);
    w.put("pump_linewidth_damping", c.pump_linewidth_damping);
    w.put("delay_offset_fs", c.interferometer.delay_offset_fs);
    w.put("stage_fs_per_um", c.stage_fs_per_um);

    w.section("scan");
    w.put("start_fs", c.scan.start_fs);
    w.put("stop_fs", c.scan.stop_fs);
    w.put("step_fs", c.scan.step_fs);

    const auto& sm = c.sample;
    w.section("sample");
    w.put("preset", sm.preset ? to_string(*sm.preset) : std::string("none"));
    w.put("name", sm.name);
    w.put("concentration_mM", sm.concentration_mM);
    w.put("pathlength_cm", sm.pathlength_cm);
    w.put("sigma_one_photon_cm2", sm.sigma_one_photon_cm2);
    w.put("sigma_scatter_cm2", sm.sigma_scatter_cm2);
    w.put("sigma_one_photon_csv", sm.sigma_one_photon_csv);
    w.put("sigma_scatter_csv", sm.sigma_scatter_csv);
    w.put("sigma_etpa_cm2", sm.sigma_etpa_cm2);
    w.put("fluorescence_csv", sm.fluorescence_csv);
    w.put("quantum_yield", sm.quantum_yield);
    w.put("group_delay_shift_fs", sm.group_delay_shift_fs);

    const auto& d = c.detectors;
    w.section("detectors");
    w.put("efficiency_a", d.a.efficiency);
    w.put("efficiency_b", d.b.efficiency);
    w.put("dark_rate_a_cps", d.a.dark_rate_cps);
    w.put("dark_rate_b_cps", d.b.dark_rate_cps);
    w.put("jitter_fwhm_a_ps", d.a.jitter_fwhm_ps);
    w.put("jitter_fwhm_b_ps", d.b.jitter_fwhm_ps);
    w.put("deadtime_a_ns", d.a.deadtime_ns);
    w.put("deadtime_b_ns", d.b.deadtime_ns);
    w.put("coincidence_mode", to_string(d.mode));
    w.put("integration_per_point_s", d.coincidence.duration_per_point_s);
    w.put("pair_rate_at_splitter_per_s", d.coincidence.detected_pair_rate);
    w.put("bin_width_ps", d.coincidence.bin_width_ps);
    w.put("histogram_range_ns", d.coincidence.range_ns);
    w.put("window_ns", d.coincidence.window_ns);
    w.put("tail_fraction", d.coincidence.tail_fraction);
    w.put("emiccd_dark_rate_cps", d.emiccd_dark_rate_cps);
    w.put("emiccd_exposure_s", d.emiccd_exposure_s);

    w.section("geometry");
    w.put("collection_efficiency", c.geometry.collection_efficiency);
    w.put("beam_waist_um", c.geometry.beam_waist_um);

    const auto& a = c.analysis;
    w.section("analysis");
    w.put("window", to_string(a.window));
    w.put("fit_peaks", a.fit_peaks);
    w.put("fit_band_low_of_pump", a.fit_band_low);
    w.put("fit_band_high_of_pump", a.fit_band_high);
    w.put("visibility_region_envelope_widths", a.visibility.region_envelope_widths);
    w.put("visibility_smoothing_of_period", a.visibility.smoothing_fraction);
    w.put("pump_ratio_threshold", a.thresholds.pump_ratio);
    w.put("pump_band_bins", a.thresholds.pump_band_bins);
    w.put("background_inner_bins", a.thresholds.background_inner_bins);
    w.put("background_outer_bins", a.thresholds.background_outer_bins);
    w.put("one_photon_ratio_threshold", a.thresholds.one_photon_ratio);
    w.put("resimulate", a.resimulate);

    const auto& p = c.power_scan;
    w.section("power_scan");
    w.put("decades", p.decades);
    w.put("points", p.points);
    w.put("min_rate_per_s", p.min_rate_per_s);
    w.put("integration_s", p.integration_s);
    w.put("sigma_cm2", p.sigma_cm2);
    w.put("reference_concentration_mM", p.reference_concentration_mM);
    return w.str();
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw RuntimeFailure("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

}  // namespace biphoton
