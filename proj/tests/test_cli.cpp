#include "biphoton/io.hpp"
#include "biphoton/scenario.hpp"

#include "json.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>

using namespace biphoton;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kConfigDir = BIPHOTON_CONFIG_DIR;
const std::string kCli = BIPHOTON_CLI;

struct Result {
    int code = -1;
    std::string out;
};

Result run(const std::string& args) {
    Result r;
    FILE* p = popen((kCli + " " + args + " 2>/dev/null").c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("biphoton_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Shipped scenario on a shorter, coarser scan so each run takes well under a second.
fs::path quick_config(const std::string& shipped, const fs::path& dir) {
    ScenarioConfig c = load_scenario(kConfigDir / shipped);
    c.scan = ScanParams{-250.0, 250.0, 0.4};
    c.emit_timetags = false;
    const fs::path p = dir / shipped;
    write_text(p, serialize_scenario(c));
    return p;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

json load_json(const fs::path& p) { return json::parse(read_text(p)); }

}  // namespace

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run("presets").code, 0);
    EXPECT_EQ(run("--version").code, 0);
    EXPECT_EQ(run("simulate").code, 2);  // missing --config
    EXPECT_EQ(run("simulate --config /nonexistent.ini").code, 2);
    const fs::path dir = scratch("exit");
    write_text(dir / "bad.ini", "[scan]\nstep = 1\n");
    EXPECT_EQ(run("simulate --config " + q(dir / "bad.ini") + " --out " + q(dir / "o")).code, 2);
    EXPECT_EQ(run("simulate --config " + q(quick_config("default.ini", dir)) + " --threads 0").code, 2);
}

TEST(Cli, DeterministicAcrossThreadCounts) {
    const fs::path dir = scratch("det");
    const fs::path cfg = quick_config("default.ini", dir);
    ASSERT_EQ(run("simulate --config " + q(cfg) + " --out " + q(dir / "t1") + " --threads 1").code, 0);
    ASSERT_EQ(run("simulate --config " + q(cfg) + " --out " + q(dir / "t4") + " --threads 4").code, 0);
    for (const auto& e : fs::directory_iterator(dir / "t1")) {
        const std::string name = e.path().filename().string();
        if (name == "timings.json") continue;
        EXPECT_EQ(read_text(e.path()), read_text(dir / "t4" / name)) << name;
    }
    // A different seed changes the noisy traces.
    ASSERT_EQ(run("simulate --config " + q(cfg) + " --seed 99 --out " + q(dir / "s99")).code, 0);
    EXPECT_NE(read_text(dir / "t1" / "coincidence_sample.csv"), read_text(dir / "s99" / "coincidence_sample.csv"));
}

TEST(Cli, WrongColumnDiagnostic) {
    const fs::path dir = scratch("col");
    write_text(dir / "trace.csv", "delay_fs,counts\n0,1\n1,2\n");
    const fs::path cfg = quick_config("default.ini", dir);
    FILE* p = popen((kCli + " analyze --config " + q(cfg) + " --coincidence " + q(dir / "trace.csv") + " --out " +
                     q(dir / "o") + " 2>&1 1>/dev/null")
                        .c_str(),
                    "r");
    ASSERT_NE(p, nullptr);
    std::string err;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) err.append(buf, n);
    const int status = pclose(p);
    EXPECT_EQ(WEXITSTATUS(status), 2);
    EXPECT_NE(err.find("counts"), std::string::npos) << err;
    EXPECT_NE(err.find("value"), std::string::npos) << err;
}

TEST(Cli, FullRunReportAndIdempotency) {
    const fs::path dir = scratch("report");
    const fs::path cfg = quick_config("default.ini", dir);
    const fs::path run_dir = dir / "run";
    ASSERT_EQ(run("simulate --config " + q(cfg) + " --out " + q(run_dir)).code, 0);
    EXPECT_EQ(run("report " + q(run_dir)).code, 2);  // not analyzed yet
    const Result a = run("analyze " + q(run_dir));
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(json::parse(a.out), load_json(run_dir / "analysis.json"));
    ASSERT_EQ(run("report " + q(run_dir)).code, 0);

    const json manifest = load_json(run_dir / "report" / "manifest.json");
    for (const auto& f : manifest.at("files")) EXPECT_TRUE(fs::exists(run_dir / "report" / f.get<std::string>())) << f;
    EXPECT_EQ(manifest.at("config_sha256"), load_json(run_dir / "summary.json").at("config_sha256"));
    EXPECT_EQ(manifest.at("config_sha256").get<std::string>(), sha256_hex(read_text(run_dir / "config.ini")));

    const std::string first = read_text(run_dir / "report" / "summary.txt");
    ASSERT_EQ(run("report " + q(run_dir)).code, 0);
    EXPECT_EQ(read_text(run_dir / "report" / "summary.txt"), first);
    EXPECT_NE(first.find("90-degree verdict: one_photon_scatter"), std::string::npos) << first;
}

TEST(Cli, NinetyDegreeDftLacksPumpPeak) {
    const fs::path dir = scratch("pump");
    const fs::path cfg = quick_config("default.ini", dir);
    const fs::path run_dir = dir / "run";
    ASSERT_EQ(run("simulate --config " + q(cfg) + " --out " + q(run_dir)).code, 0);
    ASSERT_EQ(run("analyze " + q(run_dir)).code, 0);
    ASSERT_EQ(run("report " + q(run_dir)).code, 0);
    const Table t = read_table(run_dir / "report" / "delay_traces_dft.csv",
                               {"frequency_THz", "coincidence_reference", "coincidence_sample", "emiccd_90deg"});
    const Eigen::ArrayXd& f = t.column("frequency_THz");
    const double pump_thz = 299792458.0 / 406e-9 * 1e-12;
    // Peak within 3 bins of the pump against the median of the 10-40 bin shoulders.
    auto ratio = [&](const Eigen::ArrayXd& m) {
        Eigen::Index k;
        (f - pump_thz).abs().minCoeff(&k);
        const double peak = m.segment(k - 3, 7).maxCoeff();
        std::vector<double> side;
        for (Eigen::Index j = 10; j <= 40; ++j) {
            side.push_back(m(k - j));
            side.push_back(m(k + j));
        }
        std::nth_element(side.begin(), side.begin() + side.size() / 2, side.end());
        return peak / side[side.size() / 2];
    };
    EXPECT_GT(ratio(t.column("coincidence_sample")), 5.0);
    EXPECT_LT(ratio(t.column("emiccd_90deg")), 5.0);
    EXPECT_FALSE(load_json(run_dir / "analysis.json").at("classification").at("evidence").at("pump_fringe_present"));
}

TEST(Cli, EthanolBlankHasNoSampleChannels) {
    const fs::path dir = scratch("ethanol");
    const fs::path run_dir = dir / "run";
    ASSERT_EQ(run("simulate --config " + q(quick_config("ethanol.ini", dir)) + " --out " + q(run_dir)).code, 0);
    const json s = load_json(run_dir / "summary.json");
    EXPECT_EQ(s.at("scatter_rate_cps").get<double>(), 0.0);
    EXPECT_EQ(s.at("etpa_rate_cps").get<double>(), 0.0);
    EXPECT_NEAR(s.at("transmitted_pair_fraction").get<double>(), 1.0, 1e-12);
    EXPECT_FALSE(s.at("files").contains("spectrum_90deg"));
    ASSERT_EQ(run("analyze " + q(run_dir)).code, 0);
    const json a = load_json(run_dir / "analysis.json");
    EXPECT_EQ(a.at("classification").at("verdict"), "indeterminate");
}

TEST(Cli, FlatTraceAnalyzesWithUndefinedVisibility) {
    const fs::path dir = scratch("flat");
    std::mt19937_64 rng(4);
    std::poisson_distribution<int> counts(1000);
    std::string text = "delay_fs,value\n";
    for (int i = 0; i <= 1000; ++i) text += format_double(-200.0 + 0.4 * i) + "," + std::to_string(counts(rng)) + "\n";
    write_text(dir / "flat.csv", text);
    const Result r = run("analyze --config " + q(quick_config("default.ini", dir)) + " --coincidence " +
                         q(dir / "flat.csv") + " --out " + q(dir / "o"));
    ASSERT_EQ(r.code, 0);
    const json a = json::parse(r.out);
    EXPECT_TRUE(a.at("visibility").at("visibility").is_null());
    EXPECT_TRUE(a.at("correlation_time").at("fwhm_fs").is_null());
}
