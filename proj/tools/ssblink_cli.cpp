// Command-line runner: ssblink run --config <path> --out <dir> [--parallel N] [--plots]
//
// Exit status: 0 on success, 2 on a configuration error, 3 on a simulation
// error.

#include "ssblink/bench/plot.hpp"
#include "ssblink/bench/runner.hpp"
#include "ssblink/waveform_io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace ssblink;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSimulation = 3;

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw bench::ConfigError({"--config: cannot open " + p.string()});
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run(const fs::path& config_path, const fs::path& out_dir, std::size_t parallel, bool plots, bool dump_waveform) {
    bench::ScenarioConfig cfg;
    try {
        cfg = bench::parse_config_text(read_file(config_path));
        bench::apply_seed_override(cfg);
    } catch (const bench::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kExitConfig;
    }

    bench::ScenarioResult result;
    try {
        result = bench::run_scenario(cfg, {parallel});
    } catch (const bench::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "simulation error: " << e.what() << '\n';
        return kExitSimulation;
    }

    try {
        fs::create_directories(out_dir);
        {
            std::ofstream csv(out_dir / "results.csv", std::ios::binary);
            bench::write_csv(csv, result);
            if (!csv) throw Error("cannot write results.csv");
        }
        if (!result.pdfs.empty()) {
            std::ofstream pdf(out_dir / "pdf.csv", std::ios::binary);
            bench::write_pdf_csv(pdf, result);
        }
        if (plots) bench::write_ber_plot(out_dir / "ber.svg", result, cfg.scenario);
        if (dump_waveform) {
            const auto pts = bench::channel_points(cfg);
            const auto drive = bench::resolve_drive_indices(cfg);
            const auto plan = bench::make_plan(cfg, pts.front().baud_hz, pts.front().fiber_km, pts.front().osnr_db);
            const auto burst = bench::simulate_tx(plan, drive.at(plan.baud_hz), bench::mix_seed(cfg.seed, 0));
            io::write_waveform(out_dir / "tx_field.ssbw", burst.field);
        }
    } catch (const std::exception& e) {
        std::cerr << "output error: " << e.what() << '\n';
        return kExitSimulation;
    }

    std::size_t failed = 0;
    for (const auto& r : result.rows) failed += r.failed ? 1 : 0;
    std::cout << result.rows.size() << " rows written to " << (out_dir / "results.csv").string();
    if (failed > 0) std::cout << " (" << failed << " failed points recorded)";
    std::cout << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Direct-detection PAM-4 link simulator"};
    app.require_subcommand(1);

    auto* run_cmd = app.add_subcommand("run", "Run a scenario described by a JSON config");
    std::string config;
    std::string out_dir;
    std::size_t parallel = 1;
    bool plots = false;
    bool dump = false;
    run_cmd->add_option("--config", config, "Scenario JSON")->required();
    run_cmd->add_option("--out", out_dir, "Output directory")->required();
    run_cmd->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);
    run_cmd->add_flag("--plots", plots, "Also write ber.svg");
    run_cmd->add_flag("--dump-waveform", dump, "Write the first transmitted field as tx_field.ssbw");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }
    return run(config, out_dir, parallel, plots, dump);
}
