#include "shellmatch/pipeline.hpp"

#include <filesystem>
#include <json.hpp>

#include "shellmatch/diagnostics.hpp"
#include "shellmatch/optimize.hpp"

namespace shellmatch {

namespace {

using nlohmann::json;

json breakdown_json(const EnergyBreakdown& e) {
    return json{{"match", e.match}, {"mem", e.mem},         {"bend", e.bend},
                {"vol", e.vol},     {"total", e.total},     {"min_det", e.min_det},
                {"feasible", e.feasible}};
}

template <int D>
json history_json(const DescentState<D>& state) {
    json recs = json::array();
    for (const auto& r : state.energy_history)
        recs.push_back(json{{"level", r.level},
                            {"iteration", r.iteration},
                            {"step", r.step},
                            {"grad_norm", r.grad_norm},
                            {"energy", breakdown_json(r.energy)}});
    return json{{"records", recs},
                {"accepted_per_level", state.accepted_per_level},
                {"iterations", state.iterations},
                {"final_level", state.level},
                {"last_step_size", state.last_step_size},
                {"line_search_failed", state.line_search_failed},
                {"warnings", state.warnings}};
}

json report_json(const SymmetryReport& r) {
    return json{{"l2_omega", r.l2_omega},   {"linf_omega", r.linf_omega}, {"avg_m1", r.avg_m1},
                {"linf_m1", r.linf_m1},     {"mode_label", r.mode_label}, {"clamped_points", r.clamped_points}};
}

void write_json_atomic(const std::string& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

template <int D>
int run_config_typed(const RunConfig& cfg, std::ostream& log) {
    namespace fs = std::filesystem;
    // ingest before touching the output directory: input errors leave no outputs
    const auto shape1 = ingest_shape<D>(cfg.shape1);
    const auto shape2 = ingest_shape<D>(cfg.shape2);
    fs::create_directories(cfg.output_dir);
    const auto out = [&](const std::string& name) { return (fs::path(cfg.output_dir) / name).string(); };
    log << "ingested " << cfg.shape1 << " (" << shape1.vertices.size() << " vertices), " << cfg.shape2 << " ("
        << shape2.vertices.size() << " vertices)\n";
    write_shape_vtk<D>(shape1, out("shape1.vtk"));
    write_shape_vtk<D>(shape2, out("shape2.vtk"));

    const double h_sdf = std::ldexp(1.0, -(cfg.descent.level_max + 1));
    const auto s1 = fast_march_sdf(shape1, h_sdf);
    const auto s2 = fast_march_sdf(shape2, h_sdf);
    const double r_i = injectivity_radius(s1, s2);
    const double sigma_final = 2.0 * std::ldexp(1.0, -cfg.descent.level_max);
    log << "h_sdf = " << h_sdf << ", injectivity radius = " << r_i << "\n";

    json manifest{{"tool", "shellmatch"},
                  {"version", version_string},
                  {"dimension", D},
                  {"h_sdf", h_sdf},
                  {"injectivity_radius", r_i},
                  {"config_echo", config_echo(cfg)},
                  {"jobs", json::object()}};

    int exit_code = 0;
    std::unique_ptr<DescentState<D>> match, swapped;

    if (cfg.job_match) {
        log << "match: " << cfg.shape1 << " -> " << cfg.shape2 << "\n";
        match = std::make_unique<DescentState<D>>(run_multiscale(s1, s2, cfg.params, cfg.descent));
        for (const auto& w : match->warnings) log << "  warning: " << w << "\n";
        log << "  final total = " << match->energy_history.back().energy.total << " after " << match->iterations
            << " accepted steps\n";
        if (match->line_search_failed) {
            log << "  line search failed at some level; results are partial\n";
            exit_code = 2;
        }
        manifest["jobs"]["match"] = history_json(*match);
        checkpoint_save(*match, out("phi.shlm"));
        write_json_atomic(out("phi_history.json"), json{{"config_echo", config_echo(cfg)}, {"history", history_json(*match)}});
        write_grid_vtk<D>(*match->phi.grid, out("grid_initial.vtk"));
        write_grid_vtk<D>(*match->phi.grid, out("grid_deformed.vtk"), &match->phi, true);
        export_deformed<D>(shape1, match->phi, out(D == 2 ? "deformed_shape1.csv" : "deformed_shape1.obj"));
    }

    if (cfg.job_match_swapped) {
        log << "match_swapped: " << cfg.shape2 << " -> " << cfg.shape1 << "\n";
        swapped = std::make_unique<DescentState<D>>(run_multiscale(s2, s1, cfg.params, cfg.descent));
        for (const auto& w : swapped->warnings) log << "  warning: " << w << "\n";
        log << "  final total = " << swapped->energy_history.back().energy.total << " after " << swapped->iterations
            << " accepted steps\n";
        if (swapped->line_search_failed) {
            log << "  line search failed at some level; results are partial\n";
            exit_code = 2;
        }
        manifest["jobs"]["match_swapped"] = history_json(*swapped);
        checkpoint_save(*swapped, out("psi.shlm"));
        write_json_atomic(out("psi_history.json"),
                          json{{"config_echo", config_echo(cfg)}, {"history", history_json(*swapped)}});
        write_grid_vtk<D>(*swapped->phi.grid, out("grid_swapped_deformed.vtk"), &swapped->phi, true);
        export_deformed<D>(shape2, swapped->phi, out(D == 2 ? "deformed_shape2.csv" : "deformed_shape2.obj"));
    }

    if (cfg.job_symmetry && match && swapped) {
        const std::string label = cfg.params.mode == EnergyMode::symmetric ? "sym" : "dir";
        const auto rep = symmetry_report(match->phi, swapped->phi, shape1, label);
        log << "symmetry (" << label << "): l2_omega = " << rep.l2_omega << ", linf_omega = " << rep.linf_omega
            << ", avg_m1 = " << rep.avg_m1 << ", linf_m1 = " << rep.linf_m1 << "\n";
        manifest["jobs"]["symmetry"] = report_json(rep);
        write_json_atomic(out("symmetry.json"), report_json(rep));
    }

    if (cfg.job_band_check && match) {
        const auto chk = band_inclusion_check(match->phi, s1, s2, sigma_final, 2.0 * sigma_final);
        log << "band check: max |d2(phi(x))| over the sigma-band = " << chk.max_violation << " ("
            << (chk.pass ? "pass" : "fail") << " at eps = " << 2.0 * sigma_final << ")\n";
        manifest["jobs"]["band_check"] =
            json{{"pass", chk.pass}, {"max_violation", chk.max_violation}, {"sigma", sigma_final},
                 {"eps", 2.0 * sigma_final}};
        write_json_atomic(out("band_check.json"), manifest["jobs"]["band_check"]);
    }

    if (cfg.job_gamma_study && match) {
        EnergyParams gp = cfg.params;
        gp.q = cfg.gamma_q;
        const auto study = gamma_study(match->phi, s1, s2, shape1, gp, cfg.gamma_sigmas);
        write_file_atomic(out("gamma.csv"), gamma_study_csv(study));
        json gj{{"sigmas", study.sigmas},
                {"narrowband_energies", study.narrowband_energies},
                {"surface_energy", study.surface_energy},
                {"gaps", study.gaps}};
        manifest["jobs"]["gamma_study"] = gj;
        write_json_atomic(out("gamma.json"), gj);
        log << "gamma study: surface oracle = " << study.surface_energy << "\n";
    }

    write_json_atomic(out("manifest.json"), manifest);
    log << "outputs written to " << cfg.output_dir << "\n";
    return exit_code;
}

template <int D>
int run_gamma_typed(const RunConfig& cfg, std::ostream& log) {
    RunConfig c = cfg;
    c.job_match = true;
    c.job_gamma_study = true;
    c.job_match_swapped = c.job_symmetry = c.job_band_check = false;
    return run_config_typed<D>(c, log);
}

} // namespace

int run_config(const RunConfig& cfg, std::ostream& log) {
    return cfg.dimension == 2 ? run_config_typed<2>(cfg, log) : run_config_typed<3>(cfg, log);
}

int run_gamma(const RunConfig& cfg, std::ostream& log) {
    return cfg.dimension == 2 ? run_gamma_typed<2>(cfg, log) : run_gamma_typed<3>(cfg, log);
}

int run_verify(std::ostream& log) {
    std::vector<PropertyCheck> checks;
    checks.push_back(check_determinant_identities(9001, 10000, 1e-10));
    for (auto& c : check_stored_energy_properties(9002, 100000, 10000, 1000)) checks.push_back(c);
    for (auto& c : check_classifier_equivalence(9003, 1000)) checks.push_back(c);

    bool all = true;
    for (const auto& c : checks) {
        log << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << " (worst " << c.worst << " vs tolerance " << c.tolerance
            << ", n = " << c.count << ")\n";
        all = all && c.pass;
    }
    return all ? 0 : 1;
}

} // namespace shellmatch
