#include "shellmatch/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace shellmatch {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ParseError(where + ": not a number: '" + v + "'");
    }
}

int parse_int(const std::string& v, const std::string& where) {
    try {
        std::size_t pos = 0;
        const int x = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ParseError(where + ": not an integer: '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ParseError(where + ": not a boolean: '" + v + "'");
}

std::vector<double> parse_list(const std::string& v, const std::string& where) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        out.push_back(parse_double(tok, where));
    }
    if (out.empty()) throw ParseError(where + ": empty list");
    return out;
}

} // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(where + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "shapes" && section != "params" && section != "descent" && section != "outputs" &&
                section != "jobs" && section != "gamma")
                throw ParseError(where + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) throw ParseError(where + ": empty key or value");

        if (section == "shapes") {
            if (key == "shape1") cfg.shape1 = val;
            else if (key == "shape2") cfg.shape2 = val;
            else if (key == "dimension") cfg.dimension = parse_int(val, where);
            else throw ParseError(where + ": unknown key '" + key + "' in [shapes]");
        } else if (section == "params") {
            if (key == "c_match") cfg.params.c_match = parse_double(val, where);
            else if (key == "c_mem") cfg.params.c_mem = parse_double(val, where);
            else if (key == "c_bend") cfg.params.c_bend = parse_double(val, where);
            else if (key == "c_vol") cfg.params.c_vol = parse_double(val, where);
            else if (key == "q") cfg.params.q = parse_double(val, where);
            else if (key == "theta") cfg.params.theta = parse_int(val, where);
            else if (key == "tau") cfg.params.tau = parse_double(val, where);
            else if (key == "mode") {
                if (val == "symmetric") cfg.params.mode = EnergyMode::symmetric;
                else if (val == "direct") cfg.params.mode = EnergyMode::direct;
                else if (val == "comparison") cfg.params.mode = EnergyMode::comparison;
                else throw ParseError(where + ": unknown mode '" + val + "'");
            } else if (key == "eta") {
                if (val != "quartic") throw ParseError(where + ": unknown eta '" + val + "'");
                cfg.params.eta = BumpKind::quartic_c1;
            } else throw ParseError(where + ": unknown key '" + key + "' in [params]");
        } else if (section == "descent") {
            if (key == "level_min") cfg.descent.level_min = parse_int(val, where);
            else if (key == "level_max") cfg.descent.level_max = parse_int(val, where);
            else if (key == "max_iters_per_level") cfg.descent.max_iters_per_level = parse_int(val, where);
            else if (key == "armijo_slope") cfg.descent.armijo_slope = parse_double(val, where);
            else if (key == "backtrack") cfg.descent.backtrack = parse_double(val, where);
            else if (key == "h1_weight") cfg.descent.h1_weight = parse_double(val, where);
            else if (key == "grad_tol") cfg.descent.grad_tol = parse_double(val, where);
            else if (key == "grad_tol_abs") cfg.descent.grad_tol_abs = parse_double(val, where);
            else if (key == "cg_restart") cfg.descent.cg_restart = parse_int(val, where);
            else if (key == "max_backtracks") cfg.descent.max_backtracks = parse_int(val, where);
            else throw ParseError(where + ": unknown key '" + key + "' in [descent]");
        } else if (section == "outputs") {
            if (key == "directory") cfg.output_dir = val;
            else throw ParseError(where + ": unknown key '" + key + "' in [outputs]");
        } else if (section == "jobs") {
            if (key == "match") cfg.job_match = parse_bool(val, where);
            else if (key == "match_swapped") cfg.job_match_swapped = parse_bool(val, where);
            else if (key == "symmetry") cfg.job_symmetry = parse_bool(val, where);
            else if (key == "band_check") cfg.job_band_check = parse_bool(val, where);
            else if (key == "gamma_study") cfg.job_gamma_study = parse_bool(val, where);
            else throw ParseError(where + ": unknown key '" + key + "' in [jobs]");
        } else if (section == "gamma") {
            if (key == "sigmas") cfg.gamma_sigmas = parse_list(val, where);
            else if (key == "q") cfg.gamma_q = parse_double(val, where);
            else throw ParseError(where + ": unknown key '" + key + "' in [gamma]");
        } else {
            throw ParseError(where + ": key outside of any section");
        }
    }

    if (cfg.shape1.empty() || cfg.shape2.empty()) throw ParseError(origin + ": shape1 and shape2 are required");
    if (cfg.dimension != 2 && cfg.dimension != 3) throw ParseError(origin + ": dimension must be 2 or 3");
    if (cfg.params.theta != 0 && cfg.params.theta != 1) throw ParseError(origin + ": theta must be 0 or 1");
    if (cfg.job_symmetry && !(cfg.job_match && cfg.job_match_swapped))
        throw ParseError(origin + ": symmetry needs both match and match_swapped");
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string config_echo(const RunConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "[shapes]\n";
    out << "shape1 = " << cfg.shape1 << "\n";
    out << "shape2 = " << cfg.shape2 << "\n";
    out << "dimension = " << cfg.dimension << "\n\n";
    out << "[params]\n";
    out << "c_match = " << cfg.params.c_match << "\n";
    out << "c_mem = " << cfg.params.c_mem << "\n";
    out << "c_bend = " << cfg.params.c_bend << "\n";
    out << "c_vol = " << cfg.params.c_vol << "\n";
    out << "q = " << cfg.params.q << "\n";
    out << "theta = " << cfg.params.theta << "\n";
    out << "tau = " << cfg.params.tau << "\n";
    out << "mode = "
        << (cfg.params.mode == EnergyMode::symmetric
                ? "symmetric"
                : cfg.params.mode == EnergyMode::direct ? "direct" : "comparison")
        << "\n";
    out << "eta = quartic\n\n";
    out << "[descent]\n";
    out << "level_min = " << cfg.descent.level_min << "\n";
    out << "level_max = " << cfg.descent.level_max << "\n";
    out << "max_iters_per_level = " << cfg.descent.max_iters_per_level << "\n";
    out << "armijo_slope = " << cfg.descent.armijo_slope << "\n";
    out << "backtrack = " << cfg.descent.backtrack << "\n";
    out << "h1_weight = " << cfg.descent.h1_weight << "\n";
    out << "grad_tol = " << cfg.descent.grad_tol << "\n";
    out << "grad_tol_abs = " << cfg.descent.grad_tol_abs << "\n";
    out << "cg_restart = " << cfg.descent.cg_restart << "\n";
    out << "max_backtracks = " << cfg.descent.max_backtracks << "\n\n";
    out << "[outputs]\n";
    out << "directory = " << cfg.output_dir << "\n\n";
    out << "[jobs]\n";
    out << "match = " << (cfg.job_match ? "true" : "false") << "\n";
    out << "match_swapped = " << (cfg.job_match_swapped ? "true" : "false") << "\n";
    out << "symmetry = " << (cfg.job_symmetry ? "true" : "false") << "\n";
    out << "band_check = " << (cfg.job_band_check ? "true" : "false") << "\n";
    out << "gamma_study = " << (cfg.job_gamma_study ? "true" : "false") << "\n\n";
    out << "[gamma]\n";
    out << "sigmas = ";
    for (std::size_t i = 0; i < cfg.gamma_sigmas.size(); ++i) out << (i ? "," : "") << cfg.gamma_sigmas[i];
    out << "\n";
    out << "q = " << cfg.gamma_q << "\n";
    return out.str();
}

} // namespace shellmatch
