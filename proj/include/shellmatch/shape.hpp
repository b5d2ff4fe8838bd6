#ifndef SHELLMATCH_SHAPE_HPP
#define SHELLMATCH_SHAPE_HPP

#include <array>
#include <string>
#include <vector>

#include "shellmatch/errors.hpp"
#include "shellmatch/tensor.hpp"

namespace shellmatch {

// Closed oriented hypersurface: polygonal curve (D=2) or triangle mesh (D=3),
// all vertices strictly inside (0,1)^D.
template <int D>
struct DiscreteShape {
    std::vector<Vec<D>> vertices;
    std::vector<std::array<int, D>> elements; // segments / triangles

    Vec<D> centroid() const {
        Vec<D> c{};
        for (const auto& v : vertices) c += v;
        return c * (1.0 / double(vertices.size()));
    }
};

// Closedness + domain validation. Throws OpenManifold / OutOfDomain.
void validate_shape(const DiscreteShape<2>& s);
void validate_shape(const DiscreteShape<3>& s);

// Formats: CSV polyline "x,y per line, implicitly closed" (D=2),
// OBJ / OFF triangle meshes (D=3). Coordinates must lie in (0,1)^D.
template <int D>
DiscreteShape<D> ingest_shape(const std::string& path);

template <int D>
void write_shape(const DiscreteShape<D>& s, const std::string& path);

// Legacy-VTK ASCII copy of a shape (lines / triangles).
template <int D>
void write_shape_vtk(const DiscreteShape<D>& s, const std::string& path);

// Test/CLI helpers for synthetic inputs.
DiscreteShape<2> make_circle(const Vec<2>& center, double radius, int segments);
DiscreteShape<2> make_ellipse(const Vec<2>& center, double a, double b, double angle_rad, int segments);
DiscreteShape<3> make_icosphere(const Vec<3>& center, double radius, int subdivisions);

// Atomic text file write (temp + rename).
void write_file_atomic(const std::string& path, const std::string& contents);

} // namespace shellmatch

#endif
