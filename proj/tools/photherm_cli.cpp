#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "photherm/cli.hpp"

namespace {

struct Args {
    std::string config;
    std::string out = ".";
    std::string format;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App *sub, Args &args) {
    sub->add_option("--config", args.config, "scenario file (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "output directory")->capture_default_str();
    sub->add_option("--format", args.format, "csv or json (overrides output.format)")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed", args.seed, "RNG seed (overrides the config seed)");
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Photon thermalization kinetics in multimode organic microcavities"};
    app.set_version_flag("--version", photherm::cli::kToolVersion);
    app.require_subcommand(1);

    Args args;
    const char *names[][2] = {{"rates", "assemble the rate matrix"},
                              {"evolve", "integrate the rate equations"},
                              {"equilibrium", "Bose-Einstein occupations at fixed photon number"},
                              {"threshold-scan", "condensation threshold against illuminated area"},
                              {"oracle-check", "compare against the truncated Lindblad master equation"}};
    for (const auto &n : names) add_common(app.add_subcommand(n[0], n[1]), args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : photherm::cli::kExitConfig;
    }

    std::ifstream in(args.config, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();

    photherm::cli::RunRequest req;
    req.subcommand = app.get_subcommands().front()->get_name();
    req.config_text = buffer.str();
    req.out_dir = args.out;
    if (!args.format.empty()) req.format = args.format;
    req.seed = args.seed;

    const auto result = photherm::cli::run_subcommand(req);
    for (const auto &m : result.messages) std::cerr << m << "\n";
    if (result.exit_code == 0)
        for (const auto &f : result.files) std::cout << (req.out_dir / f).string() << "\n";
    return result.exit_code;
}
