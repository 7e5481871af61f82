// Command-line front end: simulate, analyze, power-scan, report, presets.
// Exit codes: 0 success, 2 validation error, 3 runtime error.

#include "biphoton/commands.hpp"
#include "biphoton/error.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

namespace {

using biphoton::InvalidInput;

constexpr int kValidationError = 2;
constexpr int kRuntimeError = 3;

void report_error(const std::string& kind, const std::string& message) {
    std::cerr << nlohmann::json({{"error", kind}, {"message", message}}).dump() << std::endl;
}

std::filesystem::path resolve_output(const std::optional<std::string>& flag, const std::string& configured) {
    std::filesystem::path out(flag ? *flag : configured);
    if (!flag && out.is_relative()) {
        if (const char* root = std::getenv("BIPHOTON_OUTPUT_ROOT"); root && *root) out = std::filesystem::path(root) / out;
    }
    return out;
}

biphoton::ScenarioConfig load(const std::optional<std::string>& path, const std::optional<std::uint64_t>& seed) {
    biphoton::ScenarioConfig config = path ? biphoton::load_scenario(*path) : biphoton::ScenarioConfig{};
    if (seed) config.seed = *seed;
    config.validate();
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entangled two-photon Michelson spectroscopy simulator and analysis toolkit"};
    app.set_version_flag("--version", std::string(biphoton::kToolVersion));
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    int threads = 1;
    std::string format = "csv";
    auto common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config_path, "scenario config (INI)");
        if (needs_config) opt->required();
        cmd->add_option("--seed", seed, "master seed (overrides the config)");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 256));
        cmd->add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "json"}));
    };

    auto* simulate = app.add_subcommand("simulate", "run the forward models and write a run directory");
    common(simulate, true);

    auto* analyze = app.add_subcommand("analyze", "analyze a run directory or external tables");
    common(analyze, false);
    std::optional<std::string> run_dir, coincidence, emiccd, spectrum_90;
    analyze->add_option("run_dir", run_dir, "run directory written by simulate");
    analyze->add_option("--coincidence", coincidence, "external coincidence table (delay_fs, value)");
    analyze->add_option("--emiccd", emiccd, "external 90-degree table (delay_fs, value)");
    analyze->add_option("--spectrum-90", spectrum_90, "external 90-degree spectrum table");

    auto* power = app.add_subcommand("power-scan", "simulate a transmission power scan and fit it");
    common(power, true);
    std::optional<double> decades;
    std::optional<int> points;
    power->add_option("--decades", decades, "decades of input rate (>= 2)");
    power->add_option("--points", points, "number of scan points (>= 5)");

    auto* report = app.add_subcommand("report", "write figure-ready tables for an analyzed run");
    std::string report_dir;
    report->add_option("run_dir", report_dir, "analyzed run directory")->required();

    auto* presets = app.add_subcommand("presets", "list sample presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        report_error("validation", e.what());
        return kValidationError;
    }

    try {
        biphoton::RunOptions options;
        options.threads = threads;
        options.format = biphoton::format_from_string(format);

        if (simulate->parsed()) {
            const auto config = load(config_path, seed);
            const auto dir = resolve_output(out, config.outputs);
            biphoton::cmd_simulate(config, dir, options);
            std::cout << dir.string() << std::endl;
        } else if (analyze->parsed()) {
            nlohmann::json result;
            if (run_dir) {
                if (coincidence) throw InvalidInput("give either a run directory or --coincidence, not both");
                result = biphoton::cmd_analyze_run(*run_dir);
            } else {
                if (!coincidence) throw InvalidInput("analyze needs a run directory or --coincidence");
                const auto config = load(config_path, seed);
                const auto dir = resolve_output(out, config.outputs);
                std::filesystem::create_directories(dir);
                result = biphoton::cmd_analyze_files(config, *coincidence, emiccd, spectrum_90, dir);
            }
            std::cout << result.dump(2) << std::endl;
        } else if (power->parsed()) {
            const auto config = load(config_path, seed);
            const auto dir = resolve_output(out, config.outputs);
            std::filesystem::create_directories(dir);
            std::cout << biphoton::cmd_power_scan(config, dir, decades, points, options).dump(2) << std::endl;
        } else if (report->parsed()) {
            for (const auto& name : biphoton::cmd_report(report_dir)) std::cout << name << '\n';
        } else if (presets->parsed()) {
            std::cout << biphoton::cmd_presets().dump(2) << std::endl;
        }
    } catch (const InvalidInput& e) {
        report_error("validation", e.what());
        return kValidationError;
    } catch (const std::exception& e) {
        report_error("runtime", e.what());
        return kRuntimeError;
    }
    return 0;
}
