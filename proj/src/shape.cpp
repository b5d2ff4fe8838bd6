#include "shellmatch/shape.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace shellmatch {

namespace {

void check_in_domain(const double* x, int d, const std::string& path) {
    for (int i = 0; i < d; ++i)
        if (!(x[i] > 0.0 && x[i] < 1.0))
            throw OutOfDomain("vertex outside (0,1)^d in " + path);
}

} // namespace

void write_file_atomic(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IOError("cannot open " + tmp);
        out << contents;
        if (!out) throw IOError("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IOError("rename failed: " + path + ": " + ec.message());
}

void validate_shape(const DiscreteShape<2>& s) {
    if (s.vertices.size() < 3 || s.elements.empty()) throw OpenManifold("degenerate polyline");
    // closed curve: every vertex has degree exactly 2
    std::vector<int> degree(s.vertices.size(), 0);
    for (const auto& e : s.elements) {
        for (int v : e) {
            if (v < 0 || v >= int(s.vertices.size())) throw ParseError("segment index out of range");
            degree[v]++;
        }
        if (e[0] == e[1]) throw OpenManifold("zero-length segment");
    }
    for (size_t i = 0; i < degree.size(); ++i)
        if (degree[i] != 2) throw OpenManifold("vertex " + std::to_string(i) + " has degree " + std::to_string(degree[i]));
}

void validate_shape(const DiscreteShape<3>& s) {
    if (s.vertices.size() < 4 || s.elements.empty()) throw OpenManifold("degenerate mesh");
    // every edge must appear exactly twice, once per orientation
    std::map<std::pair<int, int>, int> half_edges;
    for (const auto& t : s.elements) {
        for (int v : t)
            if (v < 0 || v >= int(s.vertices.size())) throw ParseError("triangle index out of range");
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            if (a == b) throw OpenManifold("degenerate triangle edge");
            half_edges[{a, b}]++;
        }
    }
    for (const auto& [edge, count] : half_edges) {
        if (count != 1) throw OpenManifold("non-manifold edge");
        auto rev = half_edges.find({edge.second, edge.first});
        if (rev == half_edges.end()) throw OpenManifold("open or inconsistently oriented edge");
    }
}

namespace {

DiscreteShape<2> parse_csv_polyline(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    DiscreteShape<2> s;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto h = line.find('#');
        if (h != std::string::npos) line = line.substr(0, h);
        if (line.find_first_not_of(" \t\r\n,") == std::string::npos) continue;
        double x, y;
        char comma;
        std::istringstream ss(line);
        if (!(ss >> x >> comma >> y) || comma != ',')
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 'x,y'");
        double arr[2] = {x, y};
        check_in_domain(arr, 2, path);
        s.vertices.push_back(Vec<2>{{x, y}});
    }
    const int n = int(s.vertices.size());
    if (n < 3) throw ParseError(path + ": polyline needs at least 3 vertices");
    for (int i = 0; i < n; ++i) s.elements.push_back({i, (i + 1) % n});
    validate_shape(s);
    return s;
}

DiscreteShape<3> parse_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    DiscreteShape<3> s;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ss >> x >> y >> z)) throw ParseError(path + ":" + std::to_string(lineno) + ": bad vertex");
            double arr[3] = {x, y, z};
            check_in_domain(arr, 3, path);
            s.vertices.push_back(Vec<3>{{x, y, z}});
        } else if (tag == "f") {
            std::array<int, 3> f;
            for (int k = 0; k < 3; ++k) {
                std::string tok;
                if (!(ss >> tok)) throw ParseError(path + ":" + std::to_string(lineno) + ": bad face");
                // accept v, v/vt, v/vt/vn
                f[k] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
            }
            std::string extra;
            if (ss >> extra) throw ParseError(path + ":" + std::to_string(lineno) + ": only triangles supported");
            s.elements.push_back(f);
        }
    }
    validate_shape(s);
    return s;
}

DiscreteShape<3> parse_off(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::string header;
    in >> header;
    if (header != "OFF") throw ParseError(path + ": missing OFF header");
    size_t nv = 0, nf = 0, ne = 0;
    if (!(in >> nv >> nf >> ne)) throw ParseError(path + ": bad OFF counts");
    DiscreteShape<3> s;
    s.vertices.resize(nv);
    for (size_t i = 0; i < nv; ++i) {
        double x, y, z;
        if (!(in >> x >> y >> z)) throw ParseError(path + ": bad OFF vertex");
        double arr[3] = {x, y, z};
        check_in_domain(arr, 3, path);
        s.vertices[i] = Vec<3>{{x, y, z}};
    }
    for (size_t i = 0; i < nf; ++i) {
        int cnt;
        if (!(in >> cnt) || cnt != 3) throw ParseError(path + ": only triangle OFF faces supported");
        std::array<int, 3> f;
        for (int k = 0; k < 3; ++k)
            if (!(in >> f[k])) throw ParseError(path + ": bad OFF face");
        s.elements.push_back(f);
    }
    validate_shape(s);
    return s;
}

std::string lower_ext(const std::string& path) {
    auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

} // namespace

template <>
DiscreteShape<2> ingest_shape<2>(const std::string& path) {
    if (!std::filesystem::exists(path)) throw ParseError("no such file: " + path);
    const std::string ext = lower_ext(path);
    if (ext == "csv") return parse_csv_polyline(path);
    throw ParseError("unsupported 2D shape format ." + ext + " (use CSV polyline)");
}

template <>
DiscreteShape<3> ingest_shape<3>(const std::string& path) {
    if (!std::filesystem::exists(path)) throw ParseError("no such file: " + path);
    const std::string ext = lower_ext(path);
    if (ext == "obj") return parse_obj(path);
    if (ext == "off") return parse_off(path);
    throw ParseError("unsupported 3D shape format ." + ext + " (use OBJ or OFF)");
}

template <>
void write_shape<2>(const DiscreteShape<2>& s, const std::string& path) {
    std::ostringstream out;
    out.precision(17);
    for (const auto& v : s.vertices) out << v[0] << "," << v[1] << "\n";
    write_file_atomic(path, out.str());
}

template <>
void write_shape<3>(const DiscreteShape<3>& s, const std::string& path) {
    std::ostringstream out;
    out.precision(17);
    for (const auto& v : s.vertices) out << "v " << v[0] << " " << v[1] << " " << v[2] << "\n";
    for (const auto& f : s.elements) out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
    write_file_atomic(path, out.str());
}

namespace {

template <int D>
void write_shape_vtk_impl(const DiscreteShape<D>& s, const std::string& path) {
    std::ostringstream out;
    out.precision(17);
    out << "# vtk DataFile Version 3.0\nshellmatch shape\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << s.vertices.size() << " double\n";
    for (const auto& v : s.vertices) out << v[0] << " " << v[1] << " " << (D == 3 ? v[D - 1] : 0.0) << "\n";
    out << "CELLS " << s.elements.size() << " " << s.elements.size() * (D + 1) << "\n";
    for (const auto& e : s.elements) {
        out << D;
        for (int v : e) out << " " << v;
        out << "\n";
    }
    out << "CELL_TYPES " << s.elements.size() << "\n";
    for (size_t i = 0; i < s.elements.size(); ++i) out << (D == 2 ? 3 : 5) << "\n"; // VTK_LINE / VTK_TRIANGLE
    write_file_atomic(path, out.str());
}

} // namespace

template <>
void write_shape_vtk<2>(const DiscreteShape<2>& s, const std::string& path) {
    write_shape_vtk_impl<2>(s, path);
}
template <>
void write_shape_vtk<3>(const DiscreteShape<3>& s, const std::string& path) {
    write_shape_vtk_impl<3>(s, path);
}

DiscreteShape<2> make_circle(const Vec<2>& center, double radius, int segments) {
    DiscreteShape<2> s;
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < segments; ++i) {
        const double t = 2.0 * pi * i / segments;
        s.vertices.push_back(Vec<2>{{center[0] + radius * std::cos(t), center[1] + radius * std::sin(t)}});
        s.elements.push_back({i, (i + 1) % segments});
    }
    return s;
}

DiscreteShape<2> make_ellipse(const Vec<2>& center, double a, double b, double angle_rad, int segments) {
    DiscreteShape<2> s;
    const double pi = 3.14159265358979323846;
    const double ca = std::cos(angle_rad), sa = std::sin(angle_rad);
    for (int i = 0; i < segments; ++i) {
        const double t = 2.0 * pi * i / segments;
        const double x = a * std::cos(t), y = b * std::sin(t);
        s.vertices.push_back(Vec<2>{{center[0] + ca * x - sa * y, center[1] + sa * x + ca * y}});
        s.elements.push_back({i, (i + 1) % segments});
    }
    return s;
}

DiscreteShape<3> make_icosphere(const Vec<3>& center, double radius, int subdivisions) {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec<3>> verts = {
        {{-1, phi, 0}}, {{1, phi, 0}}, {{-1, -phi, 0}}, {{1, -phi, 0}}, {{0, -1, phi}},  {{0, 1, phi}},
        {{0, -1, -phi}}, {{0, 1, -phi}}, {{phi, 0, -1}}, {{phi, 0, 1}},  {{-phi, 0, -1}}, {{-phi, 0, 1}},
    };
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},   {0, 1, 7},  {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
        {11, 10, 2}, {10, 7, 6},  {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
        {3, 8, 9},  {4, 9, 5},   {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1},
    };
    for (auto& v : verts) v *= 1.0 / norm(v);
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Vec<3> m = verts[a] + verts[b];
            m *= 1.0 / norm(m);
            verts.push_back(m);
            const int id = int(verts.size()) - 1;
            midpoint[key] = id;
            return id;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    DiscreteShape<3> s;
    for (const auto& v : verts) s.vertices.push_back(center + radius * v);
    s.elements = faces;
    return s;
}

} // namespace shellmatch
