#ifndef SHELLMATCH_GRID_HPP
#define SHELLMATCH_GRID_HPP

// Hierarchical quadtree/octree over (0,1)^D with Kuhn-Freudenthal simplicial
// subdivision (two triangles per square, six tetrahedra per cube, consistent
// main diagonal). Every child simplex is contained in exactly one parent
// simplex, so linear interpolation between levels preserves Jacobians.
// 2:1 balance across face- and edge-adjacent leaves; hanging vertices carry
// interpolation constraints flattened to unconstrained masters.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <sstream>
#include <vector>

#include "shellmatch/errors.hpp"
#include "shellmatch/sdf.hpp"
#include "shellmatch/shape.hpp"
#include "shellmatch/tensor.hpp"

namespace shellmatch {

namespace grid_detail {

constexpr int factorial(int n) { return n <= 1 ? 1 : n * factorial(n - 1); }

// lexicographically ordered permutations of {0..D-1}
template <int D>
std::array<std::array<int, D>, factorial(D)> permutations() {
    std::array<int, D> p;
    for (int i = 0; i < D; ++i) p[i] = i;
    std::array<std::array<int, D>, factorial(D)> out;
    int k = 0;
    do {
        out[k++] = p;
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
}

} // namespace grid_detail

template <int D>
class AdaptiveGrid {
  public:
    static constexpr int n_children = 1 << D;
    static constexpr int simplices_per_cell = grid_detail::factorial(D);

    struct Cell {
        int level = 0;
        std::array<int, D> coords{}; // cell indices at its own level
        int parent = -1;
        std::array<int, n_children> children; // -1 when leaf
        bool leaf() const { return children[0] < 0; }
    };

    struct Simplex {
        std::array<int, D + 1> verts; // walk order: cell origin -> main diagonal
        std::array<Vec<D>, D + 1> grad_bary;
        double volume = 0;
        int leaf_cell = -1;
    };

    int level_min = 0, level_max = 0;

    std::vector<Cell> cells;
    std::vector<int> leaves; // DFS order

    std::vector<Vec<D>> vertex_pos;
    std::vector<std::array<int64_t, D>> vertex_coord; // integer coords at level_max resolution
    std::vector<uint8_t> vertex_dirichlet;
    std::vector<uint8_t> vertex_hanging;
    // flattened constraints: unconstrained masters only; free vertices map to themselves
    std::vector<std::vector<std::pair<int, double>>> vertex_masters;
    std::vector<int> dof_of_vertex; // -1 for hanging and Dirichlet vertices
    std::vector<int> vertex_of_dof;

    std::vector<Simplex> simplices;
    std::vector<int> leaf_simplex_start; // per leaf index

    int num_vertices() const { return int(vertex_pos.size()); }
    int num_dofs() const { return int(vertex_of_dof.size()); }

    double cell_size(int cell_index) const { return std::ldexp(1.0, -cells[cell_index].level); }

    Vec<D> cell_origin(int cell_index) const {
        const Cell& c = cells[cell_index];
        const double h = cell_size(cell_index);
        Vec<D> o;
        for (int k = 0; k < D; ++k) o[k] = c.coords[k] * h;
        return o;
    }

    struct Location {
        int simplex = -1;
        std::array<double, D + 1> bary{};
    };

    Location locate(const Vec<D>& x) const;
    int locate_leaf(const Vec<D>& x) const;

    // exact containment: is `level` coords-cell refined in this grid?
    bool has_descendants(int level, const std::array<int, D>& coords) const;

    static AdaptiveGrid build(int level_min, int level_max, const SignedShape<D>& s1, const SignedShape<D>& s2,
                              double band, const AdaptiveGrid* refine_at_least = nullptr);

  private:
    std::vector<int> leaf_pos_of_cell_; // cell id -> position in `leaves`, -1 otherwise

    void balance();
    void build_vertices_and_simplices();
};

// Piecewise linear nodal vector field on the grid vertices, interpreted as the
// deformation phi(x) (positions, not displacements).
template <int D>
struct Deformation {
    std::shared_ptr<const AdaptiveGrid<D>> grid;
    std::vector<Vec<D>> values; // all vertices, constraints applied

    explicit Deformation(std::shared_ptr<const AdaptiveGrid<D>> g) : grid(std::move(g)) {
        values.resize(grid->num_vertices());
        set_identity();
    }

    void set_identity() {
        for (int v = 0; v < grid->num_vertices(); ++v) values[v] = grid->vertex_pos[v];
    }

    void apply_constraints() {
        for (int v = 0; v < grid->num_vertices(); ++v) {
            if (!grid->vertex_hanging[v]) continue;
            Vec<D> acc{};
            for (const auto& [m, w] : grid->vertex_masters[v]) acc += w * values[m];
            values[v] = acc;
        }
    }

    Vec<D> evaluate(const Vec<D>& x) const {
        const auto loc = grid->locate(x);
        const auto& s = grid->simplices[loc.simplex];
        Vec<D> r{};
        for (int i = 0; i <= D; ++i) r += loc.bary[i] * values[s.verts[i]];
        return r;
    }

    Mat<D> jacobian(int simplex_index) const {
        const auto& s = grid->simplices[simplex_index];
        Mat<D> j{};
        for (int i = 0; i <= D; ++i) j += outer(values[s.verts[i]], s.grad_bary[i]);
        return j;
    }

    std::vector<double> to_dofs() const {
        std::vector<double> u(std::size_t(grid->num_dofs()) * D);
        for (int d = 0; d < grid->num_dofs(); ++d) {
            const int v = grid->vertex_of_dof[d];
            for (int k = 0; k < D; ++k) u[std::size_t(d) * D + k] = values[v][k];
        }
        return u;
    }

    void from_dofs(const std::vector<double>& u) {
        for (int d = 0; d < grid->num_dofs(); ++d) {
            const int v = grid->vertex_of_dof[d];
            for (int k = 0; k < D; ++k) values[v][k] = u[std::size_t(d) * D + k];
        }
        apply_constraints();
    }
};

// Interpolation onto a refining grid; pointwise the same function, so
// per-simplex Jacobians and min-det are preserved.
template <int D>
Deformation<D> prolong(const Deformation<D>& phi, std::shared_ptr<const AdaptiveGrid<D>> fine) {
    for (int leaf : fine->leaves) {
        const auto& cell = fine->cells[leaf];
        const double h = std::ldexp(1.0, -cell.level);
        Vec<D> center;
        for (int k = 0; k < D; ++k) center[k] = (cell.coords[k] + 0.5) * h;
        const int coarse_leaf = phi.grid->locate_leaf(center);
        if (phi.grid->cells[coarse_leaf].level > cell.level)
            throw GridMismatch("prolong: target grid does not refine the source grid");
    }
    Deformation<D> out(fine);
    for (int v = 0; v < fine->num_vertices(); ++v) out.values[v] = phi.evaluate(fine->vertex_pos[v]);
    out.apply_constraints();
    return out;
}

// ---- implementation ----

template <int D>
int AdaptiveGrid<D>::locate_leaf(const Vec<D>& x) const {
    int node = 0;
    while (!cells[node].leaf()) {
        const Cell& c = cells[node];
        const double hc = std::ldexp(1.0, -(c.level + 1));
        int child = 0;
        for (int k = 0; k < D; ++k) {
            const double mid = (2 * c.coords[k] + 1) * hc;
            if (x[k] > mid) child |= (1 << k); // ties go to the lower cell
        }
        node = c.children[child];
    }
    return node;
}

template <int D>
typename AdaptiveGrid<D>::Location AdaptiveGrid<D>::locate(const Vec<D>& x) const {
    Vec<D> xc = x;
    for (int k = 0; k < D; ++k) xc[k] = std::clamp(x[k], 0.0, 1.0);
    const int leaf_cell = locate_leaf(xc);
    const Cell& c = cells[leaf_cell];
    const double h = std::ldexp(1.0, -c.level);
    std::array<double, D> t;
    for (int k = 0; k < D; ++k) t[k] = std::clamp((xc[k] - c.coords[k] * h) / h, 0.0, 1.0);

    // Kuhn simplex: stable descending sort of local coordinates; ties prefer
    // the lexicographically smaller axis, giving the smallest permutation
    std::array<int, D> perm;
    for (int k = 0; k < D; ++k) perm[k] = k;
    std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) { return t[a] > t[b]; });

    static const auto perms = grid_detail::permutations<D>();
    int rank = 0;
    for (int i = 0; i < int(perms.size()); ++i)
        if (perms[i] == perm) {
            rank = i;
            break;
        }

    const int leaf_pos = leaf_pos_of_cell_[leaf_cell];

    Location loc;
    loc.simplex = leaf_simplex_start[leaf_pos] + rank;
    loc.bary[0] = 1.0 - t[perm[0]];
    for (int k = 1; k < D; ++k) loc.bary[k] = t[perm[k - 1]] - t[perm[k]];
    loc.bary[D] = t[perm[D - 1]];
    return loc;
}

template <int D>
bool AdaptiveGrid<D>::has_descendants(int level, const std::array<int, D>& coords) const {
    int node = 0;
    for (int l = 0; l < level; ++l) {
        if (cells[node].leaf()) return false;
        int child = 0;
        for (int k = 0; k < D; ++k)
            if ((coords[k] >> (level - 1 - l)) & 1) child |= (1 << k);
        node = cells[node].children[child];
    }
    return !cells[node].leaf();
}

template <int D>
AdaptiveGrid<D> AdaptiveGrid<D>::build(int level_min, int level_max, const SignedShape<D>& s1,
                                       const SignedShape<D>& s2, double band, const AdaptiveGrid* refine_at_least) {
    if (level_min < 2 || level_min > level_max || level_max > 12)
        throw std::invalid_argument("build_grid: need 2 <= level_min <= level_max <= 12");
    AdaptiveGrid g;
    g.level_min = level_min;
    g.level_max = level_max;
    g.cells.push_back(Cell{});
    g.cells[0].children.fill(-1);

    const double sqrt_d = std::sqrt(double(D));
    // conservative band test at the cell center (d is 1-Lipschitz)
    auto needs_split = [&](const Cell& c) {
        if (c.level >= level_max) return false;
        if (c.level < level_min) return true;
        const double h = std::ldexp(1.0, -c.level);
        Vec<D> center;
        for (int k = 0; k < D; ++k) center[k] = (c.coords[k] + 0.5) * h;
        const double margin = band + 0.5 * h * sqrt_d;
        if (std::abs(s1.distance(center)) <= margin || std::abs(s2.distance(center)) <= margin) return true;
        if (refine_at_least && refine_at_least->has_descendants(c.level, c.coords)) return true;
        return false;
    };

    // breadth-first refinement
    std::vector<int> queue = {0};
    while (!queue.empty()) {
        const int ci = queue.back();
        queue.pop_back();
        if (!needs_split(g.cells[ci])) continue;
        const Cell base = g.cells[ci];
        for (int b = 0; b < n_children; ++b) {
            Cell child;
            child.level = base.level + 1;
            child.parent = ci;
            child.children.fill(-1);
            for (int k = 0; k < D; ++k) child.coords[k] = 2 * base.coords[k] + ((b >> k) & 1);
            g.cells.push_back(child);
            g.cells[ci].children[b] = int(g.cells.size()) - 1;
            queue.push_back(int(g.cells.size()) - 1);
        }
    }

    g.balance();
    g.build_vertices_and_simplices();
    return g;
}

template <int D>
void AdaptiveGrid<D>::balance() {
    // 2:1 across face-adjacent (all D) and edge-adjacent (D=3) leaves
    std::vector<std::array<int, D>> offsets;
    std::array<int, D> off{};
    auto rec = [&](auto&& self, int k) -> void {
        if (k == D) {
            int nz = 0;
            for (int v : off) nz += (v != 0);
            if (nz >= 1 && nz <= std::max(1, D - 1)) offsets.push_back(off);
            return;
        }
        for (int v : {-1, 0, 1}) {
            off[k] = v;
            self(self, k + 1);
        }
    };
    rec(rec, 0);

    auto find_covering = [&](int level, std::array<int, D> coords) -> int {
        int node = 0;
        for (int l = 0; l < level; ++l) {
            if (cells[node].leaf()) return node;
            int child = 0;
            for (int k = 0; k < D; ++k)
                if ((coords[k] >> (level - 1 - l)) & 1) child |= (1 << k);
            node = cells[node].children[child];
        }
        return node;
    };

    bool changed = true;
    while (changed) {
        changed = false;
        const int cell_count = int(cells.size());
        for (int ci = 0; ci < cell_count; ++ci) {
            if (!cells[ci].leaf()) continue;
            const int level = cells[ci].level;
            if (level <= 1) continue;
            for (const auto& o : offsets) {
                std::array<int, D> nb = cells[ci].coords;
                bool ok = true;
                for (int k = 0; k < D; ++k) {
                    nb[k] += o[k];
                    if (nb[k] < 0 || nb[k] >= (1 << level)) ok = false;
                }
                if (!ok) continue;
                const int cover = find_covering(level, nb);
                if (cells[cover].leaf() && cells[cover].level < level - 1) {
                    // split the too-coarse neighbor
                    const Cell base = cells[cover];
                    for (int b = 0; b < n_children; ++b) {
                        Cell child;
                        child.level = base.level + 1;
                        child.parent = cover;
                        child.children.fill(-1);
                        for (int k = 0; k < D; ++k) child.coords[k] = 2 * base.coords[k] + ((b >> k) & 1);
                        cells.push_back(child);
                        cells[cover].children[b] = int(cells.size()) - 1;
                    }
                    changed = true;
                }
            }
        }
    }
}

template <int D>
void AdaptiveGrid<D>::build_vertices_and_simplices() {
    // leaves in DFS order
    leaves.clear();
    std::vector<int> stack = {0};
    while (!stack.empty()) {
        const int ci = stack.back();
        stack.pop_back();
        if (cells[ci].leaf()) {
            leaves.push_back(ci);
            continue;
        }
        for (int b = n_children - 1; b >= 0; --b) stack.push_back(cells[ci].children[b]);
    }

    const int64_t res = int64_t(1) << level_max;

    // collect corner vertices, deterministic ids by sorted integer coords
    std::map<std::array<int64_t, D>, int> vmap;
    for (int leaf : leaves) {
        const Cell& c = cells[leaf];
        const int64_t step = int64_t(1) << (level_max - c.level);
        for (int b = 0; b < n_children; ++b) {
            std::array<int64_t, D> vc;
            for (int k = 0; k < D; ++k) vc[k] = (int64_t(c.coords[k]) + ((b >> k) & 1)) * step;
            vmap.emplace(vc, 0);
        }
    }
    vertex_pos.clear();
    vertex_coord.clear();
    int id = 0;
    for (auto& [vc, vid] : vmap) {
        vid = id++;
        vertex_coord.push_back(vc);
        Vec<D> p;
        for (int k = 0; k < D; ++k) p[k] = double(vc[k]) / double(res);
        vertex_pos.push_back(p);
    }

    const int nv = num_vertices();
    vertex_dirichlet.assign(nv, 0);
    vertex_hanging.assign(nv, 0);
    for (int v = 0; v < nv; ++v)
        for (int k = 0; k < D; ++k)
            if (vertex_coord[v][k] == 0 || vertex_coord[v][k] == res) vertex_dirichlet[v] = 1;

    // immediate hanging constraints: midpoints of leaf edges and (3D) centers
    // of leaf faces that exist as vertices of finer neighbors
    std::vector<std::vector<std::pair<int, double>>> immediate(nv);
    for (int leaf : leaves) {
        const Cell& c = cells[leaf];
        if (c.level >= level_max) continue;
        const int64_t step = int64_t(1) << (level_max - c.level);
        std::array<int64_t, D> base;
        for (int k = 0; k < D; ++k) base[k] = int64_t(c.coords[k]) * step;

        auto vertex_at = [&](const std::array<int64_t, D>& vc) -> int {
            const auto it = vmap.find(vc);
            return it == vmap.end() ? -1 : it->second;
        };

        // edges: pairs of corners differing in exactly one axis
        for (int b = 0; b < n_children; ++b)
            for (int k = 0; k < D; ++k) {
                if ((b >> k) & 1) continue;
                std::array<int64_t, D> a = base, bb = base, mid = base;
                for (int l = 0; l < D; ++l) {
                    const int64_t o = ((b >> l) & 1) * step;
                    a[l] += o;
                    bb[l] += o;
                    mid[l] += o;
                }
                bb[k] += step;
                mid[k] += step / 2;
                const int vm = vertex_at(mid);
                if (vm < 0) continue;
                const int va = vertex_at(a), vb2 = vertex_at(bb);
                immediate[vm] = {{va, 0.5}, {vb2, 0.5}};
                vertex_hanging[vm] = 1;
            }

        if constexpr (D == 3) {
            // faces: center constrained to the Kuhn face diagonal (min -> max corner)
            for (int axis = 0; axis < 3; ++axis)
                for (int side = 0; side <= 1; ++side) {
                    std::array<int64_t, 3> lo = base, hi = base, ctr = base;
                    lo[axis] += side * step;
                    hi[axis] += side * step;
                    ctr[axis] += side * step;
                    for (int l = 0; l < 3; ++l) {
                        if (l == axis) continue;
                        hi[l] += step;
                        ctr[l] += step / 2;
                    }
                    const int vc = vertex_at(ctr);
                    if (vc < 0) continue;
                    const int vlo = vertex_at(lo), vhi = vertex_at(hi);
                    immediate[vc] = {{vlo, 0.5}, {vhi, 0.5}};
                    vertex_hanging[vc] = 1;
                }
        }
    }

    // flatten transitively: masters of a hanging vertex may hang themselves
    vertex_masters.assign(nv, {});
    std::vector<int8_t> done(nv, 0);
    auto flatten = [&](auto&& self, int v) -> const std::vector<std::pair<int, double>>& {
        if (done[v]) return vertex_masters[v];
        done[v] = 1;
        if (!vertex_hanging[v]) {
            vertex_masters[v] = {{v, 1.0}};
            return vertex_masters[v];
        }
        std::map<int, double> acc;
        for (const auto& [m, w] : immediate[v])
            for (const auto& [mm, ww] : self(self, m)) acc[mm] += w * ww;
        vertex_masters[v].assign(acc.begin(), acc.end());
        return vertex_masters[v];
    };
    for (int v = 0; v < nv; ++v) flatten(flatten, v);

    // free DOFs: not hanging, not Dirichlet
    dof_of_vertex.assign(nv, -1);
    vertex_of_dof.clear();
    for (int v = 0; v < nv; ++v) {
        if (vertex_hanging[v] || vertex_dirichlet[v]) continue;
        dof_of_vertex[v] = int(vertex_of_dof.size());
        vertex_of_dof.push_back(v);
    }

    // Kuhn simplices per leaf
    static const auto perms = grid_detail::permutations<D>();
    simplices.clear();
    leaf_simplex_start.clear();
    leaf_pos_of_cell_.assign(cells.size(), -1);
    for (int li = 0; li < int(leaves.size()); ++li) {
        const int leaf = leaves[li];
        leaf_pos_of_cell_[leaf] = li;
        leaf_simplex_start.push_back(int(simplices.size()));
        const Cell& c = cells[leaf];
        const int64_t step = int64_t(1) << (level_max - c.level);
        const double h = std::ldexp(1.0, -c.level);
        for (const auto& perm : perms) {
            Simplex s;
            s.leaf_cell = leaf;
            std::array<int64_t, D> vc;
            for (int k = 0; k < D; ++k) vc[k] = int64_t(c.coords[k]) * step;
            s.verts[0] = vmap.at(vc);
            for (int k = 0; k < D; ++k) {
                vc[perm[k]] += step;
                s.verts[k + 1] = vmap.at(vc);
            }
            // barycentric gradients of the walk order
            s.grad_bary[0] = Vec<D>{};
            s.grad_bary[0][perm[0]] = -1.0 / h;
            for (int k = 1; k < D; ++k) {
                s.grad_bary[k] = Vec<D>{};
                s.grad_bary[k][perm[k - 1]] = 1.0 / h;
                s.grad_bary[k][perm[k]] = -1.0 / h;
            }
            s.grad_bary[D] = Vec<D>{};
            s.grad_bary[D][perm[D - 1]] = 1.0 / h;
            s.volume = std::pow(h, D) / grid_detail::factorial(D);
            simplices.push_back(s);
        }
    }
}

// Grid (optionally deformed) as legacy-VTK ASCII unstructured mesh with the
// deformation as point-data vectors.
template <int D>
void write_grid_vtk(const AdaptiveGrid<D>& grid, const std::string& path, const Deformation<D>* phi = nullptr,
                    bool deformed_points = false) {
    std::ostringstream out;
    out.precision(17);
    out << "# vtk DataFile Version 3.0\nshellmatch grid\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << grid.vertex_pos.size() << " double\n";
    for (int v = 0; v < grid.num_vertices(); ++v) {
        Vec<D> p = (deformed_points && phi) ? phi->values[v] : grid.vertex_pos[v];
        out << p[0] << " " << p[1] << " " << (D == 3 ? p[D - 1] : 0.0) << "\n";
    }
    out << "CELLS " << grid.simplices.size() << " " << grid.simplices.size() * (D + 2) << "\n";
    for (const auto& s : grid.simplices) {
        out << (D + 1);
        for (int v : s.verts) out << " " << v;
        out << "\n";
    }
    out << "CELL_TYPES " << grid.simplices.size() << "\n";
    for (std::size_t i = 0; i < grid.simplices.size(); ++i) out << (D == 2 ? 5 : 10) << "\n";
    if (phi) {
        out << "POINT_DATA " << grid.num_vertices() << "\nVECTORS deformation double\n";
        for (int v = 0; v < grid.num_vertices(); ++v) {
            const Vec<D> u = phi->values[v] - grid.vertex_pos[v];
            out << u[0] << " " << u[1] << " " << (D == 3 ? u[D - 1] : 0.0) << "\n";
        }
    }
    write_file_atomic(path, out.str());
}

} // namespace shellmatch

#endif
