#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>

#include "shellmatch/pipeline.hpp"

namespace {

int guarded(const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        // machine-readable trailer
        std::cerr << nlohmann::json{{"error", ex.what()}}.dump() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"shellmatch: implicit-surface matching by narrow-band shell energies"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "execute the jobs in a config file");
    run->add_option("config", config_path, "path to the run configuration")->required();

    auto* verify = app.add_subcommand("verify", "run the algebraic property suites");

    std::string gamma_config;
    auto* gamma = app.add_subcommand("gamma", "match, then evaluate the narrow-band vs surface energy gaps");
    gamma->add_option("config", gamma_config, "path to the run configuration")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed())
        return guarded([&] { return shellmatch::run_config(shellmatch::parse_config(config_path), std::cout); });
    if (verify->parsed()) return guarded([&] { return shellmatch::run_verify(std::cout); });
    if (gamma->parsed())
        return guarded([&] { return shellmatch::run_gamma(shellmatch::parse_config(gamma_config), std::cout); });
    return 1;
}
