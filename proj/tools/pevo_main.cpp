// Command-line front end: one subcommand per experiment, a JSON config as
// the single source of truth, artifacts under a config-hashed directory.
//
// Exit codes: 0 verdict PASS, 1 verdict FAIL, 2 rejected configuration,
// 3 numeric/contract failure while running.

#include "pevo/errors.hpp"
#include "pevo/harness.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>

namespace fs = std::filesystem;
using namespace pevo;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw ConfigError("cannot read config file '" + path + "'");
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral laboratory for p-evolution operators"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_flag;
    int jobs = 1;

    const struct {
        const char* name;
        const char* desc;
    } subs[] = {
        {"threshold", "exact Gevrey-threshold classification of the operator"},
        {"simulate", "one packet run at a single frequency, trajectory recorded"},
        {"growth", "rate sweep: fit log Lambda(nu) against the operator threshold"},
        {"bounded", "normalised-rate sweep in the regime below 1/theta"},
        {"datum-decay", "initial-energy decay law with its quadrature lower bound"},
        {"oracle-check", "random separable quantisations against the dense matrix"},
    };
    for (const auto& sub : subs) {
        CLI::App* sc = app.add_subcommand(sub.name, sub.desc);
        sc->add_option("--config", config_path, "experiment configuration (JSON)")
            ->required();
        sc->add_option("--out", out_flag, "artifact root (over config, under PEVO_OUT)");
        sc->add_option("--jobs", jobs, "accepted for interface stability; runs are sequential")
            ->check(CLI::Range(1, 4096));
    }
    CLI11_PARSE(app, argc, argv);
    const std::string sub = app.get_subcommands().front()->get_name();

    try {
        const ExperimentConfig cfg = parse_config(read_file(config_path), sub);
        const std::string out_root =
            resolve_out_dir(std::getenv("PEVO_OUT"), out_flag, cfg.out_dir);
        const std::string hash = git_blob_sha1(canonical_config(cfg).dump());
        std::cout << "experiment: " << sub << "\nconfig: " << hash.substr(0, 12) << "\n";

        const auto t0 = std::chrono::steady_clock::now();
        const std::string partial =
            (fs::path(out_root) / (hash.substr(0, 12) + ".partial")).string();
        const RunRecord rec = run_experiment(cfg, partial, [](const std::string& line) {
            std::cout << "  " << line << std::endl;
        });
        const std::string dir = emit_outputs(rec, out_root);
        std::error_code ec;
        fs::remove_all(partial, ec); // superseded by the full artifact set
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        std::cout << "verdict: " << rec.verdict << "\nwrote: " << dir << "\nelapsed: " << secs
                  << " s\n";
        return rec.verdict == "PASS" ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
