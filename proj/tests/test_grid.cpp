#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "shellmatch/grid.hpp"
#include "test_util.hpp"

using namespace shellmatch;

namespace {

template <int D>
std::shared_ptr<const AdaptiveGrid<D>> make_grid(int lmin, int lmax, const SignedShape<D>& s1,
                                                 const SignedShape<D>& s2, double band,
                                                 const AdaptiveGrid<D>* at_least = nullptr) {
    return std::make_shared<AdaptiveGrid<D>>(AdaptiveGrid<D>::build(lmin, lmax, s1, s2, band, at_least));
}

SignedShape<2> circle_sdf(double r, int level = 7) {
    return fast_march_sdf(make_circle(Vec<2>{{0.5, 0.5}}, r, 1024), std::ldexp(1.0, -level));
}

// brute-force barycentric coordinates of x in a simplex; empty if outside
template <int D>
bool bary_in_simplex(const AdaptiveGrid<D>& g, int si, const Vec<D>& x, std::array<double, D + 1>& bary,
                     double tol = 1e-12) {
    const auto& s = g.simplices[si];
    Mat<D> m;
    for (int k = 0; k < D; ++k)
        for (int i = 0; i < D; ++i) m(i, k) = g.vertex_pos[s.verts[k + 1]][i] - g.vertex_pos[s.verts[0]][i];
    const double dm = det(m);
    if (std::abs(dm) < 1e-300) return false;
    const Vec<D> rhs = x - g.vertex_pos[s.verts[0]];
    const Vec<D> lam = (transpose(cofactor(m)) * (1.0 / dm)) * rhs;
    double l0 = 1.0;
    for (int k = 0; k < D; ++k) l0 -= lam[k];
    bary[0] = l0;
    for (int k = 0; k < D; ++k) bary[k + 1] = lam[k];
    for (int k = 0; k <= D; ++k)
        if (bary[k] < -tol) return false;
    return true;
}

} // namespace

TEST_CASE("band leaves reach the finest level") {
    const auto s1 = circle_sdf(0.2);
    const auto s2 = circle_sdf(0.25);
    const double band = 0.05;
    const auto g = make_grid<2>(4, 7, s1, s2, band);
    for (int leaf : g->leaves) {
        const auto& c = g->cells[leaf];
        const double h = std::ldexp(1.0, -c.level);
        // sample the cell densely; any point in either band forces level_max
        bool in_band = false;
        for (int a = 0; a <= 4 && !in_band; ++a)
            for (int b = 0; b <= 4 && !in_band; ++b) {
                const Vec<2> p{{(c.coords[0] + a / 4.0) * h, (c.coords[1] + b / 4.0) * h}};
                if (std::abs(s1.distance(p)) <= band || std::abs(s2.distance(p)) <= band) in_band = true;
            }
        if (in_band) CHECK(c.level == 7);
    }
}

TEST_CASE("degenerate adaptivity gives a uniform grid with no hanging vertices") {
    const auto s1 = circle_sdf(0.2, 6);
    const auto g = make_grid<2>(5, 5, s1, s1, 0.05);
    CHECK(int(g->leaves.size()) == 32 * 32);
    CHECK(g->num_vertices() == 33 * 33);
    for (int v = 0; v < g->num_vertices(); ++v) CHECK(!g->vertex_hanging[v]);
}

TEST_CASE("adaptive grid is smaller than the uniform one") {
    const auto s1 = circle_sdf(0.2);
    const auto s2 = circle_sdf(0.25);
    const auto g = make_grid<2>(4, 7, s1, s2, 2.0 * std::ldexp(1.0, -7));
    CHECK(g->num_vertices() < 129 * 129);
}

TEST_CASE("2:1 balance holds between edge-adjacent leaves") {
    const auto s1 = circle_sdf(0.2);
    const auto s2 = circle_sdf(0.25);
    const auto g = make_grid<2>(3, 7, s1, s2, 0.04);
    for (int leaf : g->leaves) {
        const auto& c = g->cells[leaf];
        const double h = std::ldexp(1.0, -c.level);
        for (int k = 0; k < 2; ++k)
            for (int dir : {-1, 1}) {
                Vec<2> probe;
                for (int a = 0; a < 2; ++a) probe[a] = (c.coords[a] + 0.5) * h;
                probe[k] += dir * 0.51 * h;
                if (probe[k] < 0 || probe[k] > 1) continue;
                const int nb = g->locate_leaf(probe);
                CHECK(std::abs(g->cells[nb].level - c.level) <= 1);
            }
    }
}

TEST_CASE("hanging constraints: weights sum to one, masters unconstrained") {
    const auto s1 = circle_sdf(0.2);
    const auto s2 = circle_sdf(0.25);
    for (int lmax : {6, 7}) {
        const auto g = make_grid<2>(4, lmax, s1, s2, 0.05);
        int hanging = 0;
        for (int v = 0; v < g->num_vertices(); ++v) {
            double sum = 0;
            for (const auto& [m, w] : g->vertex_masters[v]) {
                sum += w;
                CHECK(!g->vertex_hanging[m]);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
            hanging += g->vertex_hanging[v];
        }
        CHECK(hanging > 0);
    }
}

TEST_CASE("locate agrees with exhaustive containment search") {
    const auto s1 = circle_sdf(0.2, 6);
    const auto s2 = circle_sdf(0.25, 6);
    const auto g = make_grid<2>(3, 6, s1, s2, 0.06);
    auto rng = smtest::make_rng(401);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 2000; ++k) {
        const Vec<2> x{{u(rng), u(rng)}};
        const auto loc = g->locate(x);
        // barycentric validity + reconstruction
        double lsum = 0;
        for (int i = 0; i <= 2; ++i) {
            CHECK(loc.bary[i] >= -1e-12);
            lsum += loc.bary[i];
        }
        CHECK(lsum == doctest::Approx(1.0).epsilon(1e-12));
        Vec<2> rec{};
        for (int i = 0; i <= 2; ++i) rec += loc.bary[i] * g->vertex_pos[g->simplices[loc.simplex].verts[i]];
        CHECK(norm(rec - x) < 1e-12);
        // exhaustive check: locate's simplex must contain x
        std::array<double, 3> bary;
        CHECK(bary_in_simplex(*g, loc.simplex, x, bary, 1e-9));
    }
}

TEST_CASE("locate at cell centers and grid vertices") {
    const auto s1 = circle_sdf(0.2, 5);
    const auto g = make_grid<2>(4, 5, s1, s1, 0.05);
    // the cell center sits on the Kuhn diagonal, so probe a point strictly
    // inside one triangle instead: all barycentrics positive
    const int leaf = g->leaves[10];
    const double h = std::ldexp(1.0, -g->cells[leaf].level);
    Vec<2> c;
    c[0] = (g->cells[leaf].coords[0] + 0.6) * h;
    c[1] = (g->cells[leaf].coords[1] + 0.3) * h;
    const auto loc = g->locate(c);
    for (int i = 0; i <= 2; ++i) CHECK(loc.bary[i] > 0.0);
    // the diagonal point itself still reconstructs exactly
    Vec<2> diag_pt;
    for (int k = 0; k < 2; ++k) diag_pt[k] = (g->cells[leaf].coords[k] + 0.5) * h;
    const auto dloc = g->locate(diag_pt);
    Vec<2> rec{};
    for (int i = 0; i <= 2; ++i) rec += dloc.bary[i] * g->vertex_pos[g->simplices[dloc.simplex].verts[i]];
    CHECK(norm(rec - diag_pt) < 1e-14);
    // grid vertex: one barycentric coordinate equals 1
    const auto vloc = g->locate(g->vertex_pos[g->num_vertices() / 2]);
    double maxb = 0;
    for (int i = 0; i <= 2; ++i) maxb = std::max(maxb, vloc.bary[i]);
    CHECK(maxb == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("evaluate reproduces identity and affine fields exactly") {
    const auto s1 = circle_sdf(0.2, 6);
    const auto s2 = circle_sdf(0.25, 6);
    const auto g = make_grid<2>(3, 6, s1, s2, 0.06);
    Deformation<2> phi(g);
    auto rng = smtest::make_rng(402);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 500; ++k) {
        const Vec<2> x{{u(rng), u(rng)}};
        CHECK(norm(phi.evaluate(x) - x) < 1e-14);
    }
    // affine reproduction
    const Mat<2> a{{1.1, 0.2, -0.1, 0.9}};
    const Vec<2> b{{0.05, -0.02}};
    for (int v = 0; v < g->num_vertices(); ++v) phi.values[v] = a * g->vertex_pos[v] + b;
    phi.apply_constraints();
    for (int k = 0; k < 500; ++k) {
        const Vec<2> x{{u(rng), u(rng)}};
        CHECK(norm(phi.evaluate(x) - (a * x + b)) < 1e-12);
    }
    for (size_t si = 0; si < g->simplices.size(); si += 7) {
        CHECK(frob_norm(phi.jacobian(int(si)) - a) < 1e-12);
    }
}

TEST_CASE("FE space is continuous across faces (conformity)") {
    const auto s1 = circle_sdf(0.2);
    const auto s2 = circle_sdf(0.25);
    const auto g = make_grid<2>(3, 7, s1, s2, 0.04);
    Deformation<2> phi(g);
    auto rng = smtest::make_rng(403);
    std::normal_distribution<double> gsn(0.0, 0.1);
    for (int d = 0; d < g->num_dofs(); ++d) {
        const int v = g->vertex_of_dof[d];
        phi.values[v] += Vec<2>{{gsn(rng), gsn(rng)}};
    }
    phi.apply_constraints();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    for (int k = 0; k < 40000 && checked < 400; ++k) {
        // random points on vertical/horizontal grid lines hit faces between leaves
        Vec<2> x;
        const int axis = k % 2;
        x[axis] = std::round(u(rng) * 128.0) / 128.0;
        x[1 - axis] = u(rng);
        std::array<double, 3> bary;
        Vec<2> val{};
        int found = 0;
        for (int si = 0; si < int(g->simplices.size()); ++si) {
            if (!bary_in_simplex(*g, si, x, bary, 1e-13)) continue;
            Vec<2> v{};
            for (int i = 0; i <= 2; ++i) v += bary[i] * phi.values[g->simplices[si].verts[i]];
            if (found) CHECK(norm(v - val) < 1e-12);
            val = v;
            ++found;
        }
        if (found > 1) ++checked;
    }
    CHECK(checked >= 400);
}

TEST_CASE("Kuhn containment across refinement") {
    const auto s1 = circle_sdf(0.2, 5);
    const auto coarse = make_grid<2>(3, 3, s1, s1, 1e-9);
    const auto fine = make_grid<2>(4, 4, s1, s1, 1e-9);
    for (int fi = 0; fi < int(fine->simplices.size()); ++fi) {
        Vec<2> centroid{};
        for (int i = 0; i <= 2; ++i) centroid += (1.0 / 3.0) * fine->vertex_pos[fine->simplices[fi].verts[i]];
        // the coarse simplex containing the centroid must contain all vertices
        int host = -1;
        std::array<double, 3> bary;
        for (int si = 0; si < int(coarse->simplices.size()); ++si)
            if (bary_in_simplex(*coarse, si, centroid, bary, 1e-13)) {
                host = si;
                break;
            }
        REQUIRE(host >= 0);
        for (int i = 0; i <= 2; ++i)
            CHECK(bary_in_simplex(*coarse, host, fine->vertex_pos[fine->simplices[fi].verts[i]], bary, 1e-12));
    }
}

TEST_CASE("Kuhn containment across refinement, 3D") {
    const auto sp = fast_march_sdf(make_icosphere(Vec<3>{{0.5, 0.5, 0.5}}, 0.25, 1), std::ldexp(1.0, -4));
    const auto coarse = make_grid<3>(2, 2, sp, sp, 1e-9);
    const auto fine = make_grid<3>(3, 3, sp, sp, 1e-9);
    std::array<double, 4> bary;
    for (int fi = 0; fi < int(fine->simplices.size()); fi += 3) {
        Vec<3> centroid{};
        for (int i = 0; i <= 3; ++i) centroid += 0.25 * fine->vertex_pos[fine->simplices[fi].verts[i]];
        int host = -1;
        for (int si = 0; si < int(coarse->simplices.size()); ++si)
            if (bary_in_simplex(*coarse, si, centroid, bary, 1e-13)) {
                host = si;
                break;
            }
        REQUIRE(host >= 0);
        for (int i = 0; i <= 3; ++i)
            CHECK(bary_in_simplex(*coarse, host, fine->vertex_pos[fine->simplices[fi].verts[i]], bary, 1e-12));
    }
}

TEST_CASE("prolongation is pointwise exact and preserves determinants") {
    const auto s1 = circle_sdf(0.2);
    const auto s2 = circle_sdf(0.25);
    const auto coarse = make_grid<2>(3, 5, s1, s2, 0.1);
    const auto fine = make_grid<2>(3, 6, s1, s2, 0.05, coarse.get());

    Deformation<2> phi(coarse);
    auto rng = smtest::make_rng(404);
    std::normal_distribution<double> gsn(0.0, 0.02);
    for (int d = 0; d < coarse->num_dofs(); ++d) {
        const int v = coarse->vertex_of_dof[d];
        phi.values[v] += Vec<2>{{gsn(rng), gsn(rng)}};
    }
    phi.apply_constraints();

    const auto fphi = prolong(phi, fine);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        const Vec<2> x{{u(rng), u(rng)}};
        CHECK(norm(fphi.evaluate(x) - phi.evaluate(x)) < 1e-12);
    }
    // Jacobian determinant is preserved under interpolation to the finer grid
    for (int fi = 0; fi < int(fine->simplices.size()); ++fi) {
        Vec<2> centroid{};
        for (int i = 0; i <= 2; ++i) centroid += (1.0 / 3.0) * fine->vertex_pos[fine->simplices[fi].verts[i]];
        const auto coarse_loc = phi.grid->locate(centroid);
        const double want = det(phi.jacobian(coarse_loc.simplex));
        const double got = det(fphi.jacobian(fi));
        CHECK(std::abs(got - want) < 1e-13);
    }

    // identity prolongs to identity
    Deformation<2> id(coarse);
    const auto fid = prolong(id, fine);
    for (int v = 0; v < fine->num_vertices(); ++v) CHECK(norm(fid.values[v] - fine->vertex_pos[v]) < 1e-14);
}

TEST_CASE("prolong rejects non-refining grids") {
    const auto s1 = circle_sdf(0.2, 6);
    const auto coarse = make_grid<2>(3, 4, s1, s1, 0.05);
    const auto fine = make_grid<2>(3, 6, s1, s1, 0.05, coarse.get());
    Deformation<2> phi(fine);
    CHECK_THROWS_AS((void)prolong(phi, coarse), GridMismatch);
}
