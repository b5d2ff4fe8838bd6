#ifndef SHELLMATCH_CONFIG_HPP
#define SHELLMATCH_CONFIG_HPP

// Run configuration: flat key = value pairs grouped in [sections].
// Grammar: '#' starts a comment; blank lines ignored; keys are section-scoped;
// unknown sections or keys are parse errors. Booleans accept true/false/1/0,
// lists are comma-separated. config_echo() emits canonical text that reparses
// to an identical configuration (doubles at full precision).

#include <string>
#include <vector>

#include "shellmatch/energy.hpp"
#include "shellmatch/optimize.hpp"

namespace shellmatch {

struct RunConfig {
    std::string shape1;
    std::string shape2;
    int dimension = 2;

    EnergyParams params; // params.sigma is set per level by the optimizer

    DescentConfig descent;

    std::string output_dir = "out";

    bool job_match = true;
    bool job_match_swapped = false;
    bool job_symmetry = false;
    bool job_band_check = false;
    bool job_gamma_study = false;

    std::vector<double> gamma_sigmas = {0.08, 0.04, 0.02, 0.01};
    double gamma_q = 1.0;
};

RunConfig parse_config_text(const std::string& text, const std::string& origin);
RunConfig parse_config(const std::string& path);
std::string config_echo(const RunConfig& cfg);

} // namespace shellmatch

#endif
