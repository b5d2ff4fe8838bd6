#ifndef SHELLMATCH_PIPELINE_HPP
#define SHELLMATCH_PIPELINE_HPP

// Batch front end shared by the CLI: ingest -> SDF -> grid -> optimize ->
// diagnostics, with VTK/JSON/CSV artifact export.

#include <ostream>
#include <string>

#include "shellmatch/config.hpp"
#include "shellmatch/grid.hpp"
#include "shellmatch/shape.hpp"

namespace shellmatch {

inline constexpr const char* version_string = "1.0.0";

// Executes the configured jobs. Returns the process exit code:
// 0 success, 2 line-search failure with partial results written.
// Input errors are reported as exceptions (the CLI maps them to exit 1).
int run_config(const RunConfig& cfg, std::ostream& log);

// Runs the match job and evaluates the Gamma study on the computed
// deformation across [gamma] sigmas; writes CSV + JSON.
int run_gamma(const RunConfig& cfg, std::ostream& log);

// Algebraic property suites; prints one PASS/FAIL line per check.
int run_verify(std::ostream& log);

// Deformed shape export: vertices mapped through phi, connectivity unchanged;
// writes CSV (2D) / OBJ (3D) plus a legacy-VTK copy next to it.
template <int D>
DiscreteShape<D> deformed_shape(const DiscreteShape<D>& shape, const Deformation<D>& phi) {
    DiscreteShape<D> out = shape;
    for (auto& v : out.vertices) v = phi.evaluate(v);
    return out;
}

template <int D>
void export_deformed(const DiscreteShape<D>& shape, const Deformation<D>& phi, const std::string& path) {
    const DiscreteShape<D> moved = deformed_shape(shape, phi);
    write_shape<D>(moved, path);
    write_shape_vtk<D>(moved, path + ".vtk");
}

} // namespace shellmatch

#endif
