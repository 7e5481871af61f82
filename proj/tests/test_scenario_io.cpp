#include "biphoton/error.hpp"
#include "biphoton/io.hpp"
#include "biphoton/scenario.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>

using namespace biphoton;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigDir = BIPHOTON_CONFIG_DIR;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("biphoton_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const InvalidInput& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(Scenario, ShippedConfigsRoundTrip) {
    for (const auto& entry : fs::directory_iterator(kConfigDir)) {
        if (entry.path().extension() != ".ini") continue;
        const ScenarioConfig a = load_scenario(entry.path());
        const std::string text = serialize_scenario(a);
        const ScenarioConfig b = parse_scenario(text, kConfigDir);
        EXPECT_EQ(serialize_scenario(b), text) << entry.path();
        EXPECT_NO_THROW(b.validate());
    }
}

TEST(Scenario, DefaultsRoundTrip) {
    const ScenarioConfig a;
    const std::string text = serialize_scenario(a);
    EXPECT_EQ(serialize_scenario(parse_scenario(text)), text);
}

TEST(Scenario, OverridesParse) {
    const ScenarioConfig c = parse_scenario("[run]\nname = x\nseed = 9\n[scan]\nstep_fs = 0.5\n[sample]\npreset = zntpp\n");
    EXPECT_EQ(c.name, "x");
    EXPECT_EQ(c.seed, 9u);
    EXPECT_DOUBLE_EQ(c.scan.step_fs, 0.5);
    EXPECT_EQ(c.sample.preset, SamplePreset::zntpp);
}

TEST(Scenario, UnknownKeysAndSectionsRejected) {
    EXPECT_NE(message_of([] { parse_scenario("[scan]\nstep = 0.5\n"); }).find("unknown config key 'step'"),
              std::string::npos);
    EXPECT_NE(message_of([] { parse_scenario("[scans]\nstep_fs = 0.5\n"); }).find("unknown config section"),
              std::string::npos);
    EXPECT_THROW(parse_scenario("[run]\nseed = -3\n"), InvalidInput);
    EXPECT_THROW(parse_scenario("[run]\nemit_timetags = maybe\n"), InvalidInput);
    EXPECT_THROW(parse_scenario("[scan]\nstep_fs = fast\n"), InvalidInput);
}

TEST(Scenario, ValidationCatchesBadValues) {
    ScenarioConfig c;
    c.scan.step_fs = 0.0;
    EXPECT_THROW(c.validate(), InvalidInput);
    c = ScenarioConfig{};
    c.analysis.fit_peaks = 0;
    EXPECT_THROW(c.validate(), InvalidInput);
    EXPECT_THROW(load_scenario(kConfigDir / "missing.ini"), InvalidInput);
}

TEST(Io, FormatDoubleRoundTrips) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> e(-300.0, 300.0);
    for (int i = 0; i < 1000; ++i) {
        const double v = std::pow(10.0, e(rng)) * (i % 2 ? -1.0 : 1.0);
        EXPECT_EQ(parse_double(format_double(v), "v"), v);
    }
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(parse_double(format_double(std::numeric_limits<double>::denorm_min()), "v"),
              std::numeric_limits<double>::denorm_min());
    EXPECT_THROW(parse_double("1.0x", "v"), InvalidInput);
    EXPECT_THROW(parse_double("", "v"), InvalidInput);
}

TEST(Io, TableRoundTripBothFormats) {
    const fs::path dir = scratch("table");
    Table t;
    t.columns = {"a", "b"};
    t.data = {Eigen::ArrayXd::LinSpaced(5, 0.0, 1.0), Eigen::ArrayXd::LinSpaced(5, -3.3, 7.1e-20)};
    for (const Format f : {Format::csv, Format::json}) {
        const fs::path p = dir / ("t" + extension(f));
        write_table(p, t, f);
        const Table r = read_table(p, {"b", "a"});
        EXPECT_EQ(r.rows(), 5);
        EXPECT_TRUE((r.column("a") == t.data[0]).all());
        EXPECT_TRUE((r.column("b") == t.data[1]).all());
    }
}

TEST(Io, TableDiagnosticsNameTheColumn) {
    const fs::path dir = scratch("diag");
    write_text(dir / "wrong.csv", "delay_fs,signal\n0,1\n");
    const std::string m = message_of([&] { read_table(dir / "wrong.csv", {"delay_fs", "value"}); });
    EXPECT_NE(m.find("signal"), std::string::npos) << m;
    EXPECT_NE(m.find("wrong.csv"), std::string::npos) << m;

    write_text(dir / "short.csv", "delay_fs,value\n0,1\n1\n");
    EXPECT_NE(message_of([&] { read_table(dir / "short.csv", {"delay_fs", "value"}); }).find("expected 2 values"),
              std::string::npos);
    write_text(dir / "text.csv", "delay_fs,value\n0,abc\n");
    EXPECT_THROW(read_table(dir / "text.csv", {"delay_fs", "value"}), InvalidInput);
    write_text(dir / "empty.csv", "");
    EXPECT_THROW(read_table(dir / "empty.csv", {"delay_fs", "value"}), InvalidInput);
    write_text(dir / "bad.json", "{\"columns\": [");
    EXPECT_THROW(read_table(dir / "bad.json", {"delay_fs", "value"}), InvalidInput);
    EXPECT_THROW(read_table(dir / "absent.csv", {"delay_fs", "value"}), InvalidInput);
}

TEST(Io, InterferogramAndSpectrumRoundTrip) {
    const fs::path dir = scratch("ig");
    const DelayScan scan = DelayScan::centered(10.0, 0.5);
    const Interferogram ig(scan, scan.delays().square(), Channel::coincidence, Normalization::raw);
    write_table(dir / "ig.csv", interferogram_table(ig, 6.671281903963041), Format::csv);
    const Interferogram back = read_interferogram(dir / "ig.csv", Channel::coincidence, Normalization::raw);
    EXPECT_TRUE((back.values == ig.values).all());
    EXPECT_TRUE((back.scan.delays() == scan.delays()).all());

    const Spectrum s = Spectrum::normalized(Eigen::ArrayXd::LinSpaced(64, 2.0e15, 2.6e15),
                                            Eigen::ArrayXd::LinSpaced(64, 1.0, 2.0), "ramp");
    write_table(dir / "s.json", spectrum_table(s), Format::json);
    const Spectrum t = read_spectrum(dir / "s.json", "ramp");
    EXPECT_LT((t.density() - s.density()).abs().maxCoeff(), 1e-12 * s.density().maxCoeff());
}

TEST(Io, Sha256KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
