#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "shellmatch/sdf.hpp"
#include "shellmatch/shape.hpp"
#include "test_util.hpp"

using namespace shellmatch;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("ingest square polyline CSV") {
    const std::string path = temp_path("square.csv");
    std::ofstream(path) << "0.2,0.2\n0.8,0.2\n0.8,0.8\n0.2,0.8\n";
    const auto s = ingest_shape<2>(path);
    CHECK(s.vertices.size() == 4);
    CHECK(s.elements.size() == 4);
}

TEST_CASE("open polyline rejected") {
    DiscreteShape<2> s;
    s.vertices = {Vec<2>{{0.2, 0.2}}, Vec<2>{{0.8, 0.2}}, Vec<2>{{0.8, 0.8}}};
    s.elements = {{0, 1}, {1, 2}}; // gap: not closed
    CHECK_THROWS_AS(validate_shape(s), OpenManifold);
}

TEST_CASE("vertex outside the domain rejected") {
    const std::string path = temp_path("outside.csv");
    std::ofstream(path) << "0.2,0.2\n1.2,0.2\n0.8,0.8\n";
    CHECK_THROWS_AS((void)ingest_shape<2>(path), OutOfDomain);
}

TEST_CASE("OBJ icosphere round trip and Euler characteristic") {
    const auto sphere = make_icosphere(Vec<3>{{0.5, 0.5, 0.5}}, 0.25, 2);
    const std::string path = temp_path("icosphere.obj");
    write_shape<3>(sphere, path);
    const auto s = ingest_shape<3>(path);
    CHECK(s.elements.size() == 20u * 4u * 4u);
    std::set<std::pair<int, int>> edges;
    for (const auto& t : s.elements)
        for (int k = 0; k < 3; ++k) edges.insert(std::minmax(t[k], t[(k + 1) % 3]));
    const long v = long(s.vertices.size()), e = long(edges.size()), f = long(s.elements.size());
    CHECK(v - e + f == 2);
}

TEST_CASE("mesh with a hole rejected") {
    auto sphere = make_icosphere(Vec<3>{{0.5, 0.5, 0.5}}, 0.25, 1);
    sphere.elements.pop_back();
    CHECK_THROWS_AS(validate_shape(sphere), OpenManifold);
}

TEST_CASE("circle SDF accuracy against the analytic oracle") {
    const Vec<2> c{{0.5, 0.5}};
    const double r = 0.2;
    const double h = std::ldexp(1.0, -8);
    const auto sdf = fast_march_sdf(make_circle(c, r, 512), h);
    const int n = sdf.nodes_per_axis();
    double max_err = 0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const Vec<2> x{{i * h, j * h}};
            const double want = norm(x - c) - r;
            max_err = std::max(max_err, std::abs(sdf.value_at_node({i, j}) - want));
        }
    CHECK(max_err <= 2.0 * h);
    // sign convention: negative inside
    CHECK(sdf.distance(c) < 0.0);
    CHECK(sdf.distance(Vec<2>{{0.9, 0.9}}) > 0.0);
}

TEST_CASE("circle eikonal residual in the band") {
    const double h = std::ldexp(1.0, -8);
    const auto sdf = fast_march_sdf(make_circle(Vec<2>{{0.5, 0.5}}, 0.2, 512), h);
    const int n = sdf.nodes_per_axis();
    std::vector<double> residuals;
    for (int j = 2; j < n - 2; ++j)
        for (int i = 2; i < n - 2; ++i) {
            const double d = sdf.value_at_node({i, j});
            if (std::abs(d) >= 0.1) continue;
            const Vec<2> x{{i * h, j * h}};
            const auto jet = sdf.eval_geometry_jet(x, 0.1, false);
            Vec<2> g;
            g[0] = (sdf.distance(Vec<2>{{x[0] + h, x[1]}}) - sdf.distance(Vec<2>{{x[0] - h, x[1]}})) / (2 * h);
            g[1] = (sdf.distance(Vec<2>{{x[0], x[1] + h}}) - sdf.distance(Vec<2>{{x[0], x[1] - h}})) / (2 * h);
            residuals.push_back(std::abs(norm(g) - 1.0));
            (void)jet;
        }
    std::sort(residuals.begin(), residuals.end());
    CHECK(residuals[residuals.size() / 2] <= 0.02);
}

TEST_CASE("sphere SDF gradient magnitude") {
    const Vec<3> c{{0.5, 0.5, 0.5}};
    const double r = 0.2;
    const double h = std::ldexp(1.0, -6);
    const auto sdf = fast_march_sdf(make_icosphere(c, r, 3), h);
    const int n = sdf.nodes_per_axis();
    double worst = 0;
    for (int k = 2; k < n - 2; ++k)
        for (int j = 2; j < n - 2; ++j)
            for (int i = 2; i < n - 2; ++i) {
                const double d = sdf.value_at_node({i, j, k});
                if (std::abs(d) <= 2 * h || std::abs(d) >= 0.1) continue;
                const Vec<3> x{{i * h, j * h, k * h}};
                const auto jet = sdf.eval_geometry_jet(x, 0.1, false);
                Vec<3> g;
                for (int a = 0; a < 3; ++a) {
                    Vec<3> xp = x, xm = x;
                    xp[a] += h;
                    xm[a] -= h;
                    g[a] = (sdf.distance(xp) - sdf.distance(xm)) / (2 * h);
                }
                worst = std::max(worst, std::abs(norm(g) - 1.0));
                (void)jet;
            }
    CHECK(worst <= 0.05);
}

TEST_CASE("offset circle curvature, shape operator and Gaussian curvature") {
    const Vec<2> c{{0.5, 0.5}};
    const double r = 0.2, tau = 0.1;
    const double h = std::ldexp(1.0, -8);
    // second differences see polygon faceting at ~4*sagitta/h^2, so the
    // polyline must be sampled well below the lattice scale
    const auto sdf = fast_march_sdf(make_circle(c, r, 4096), h);

    const Vec<2> x{{0.5 + r + 0.05, 0.5}}; // distance 0.05 outside
    const auto g = sdf.eval_geometry(x, tau);
    CHECK(g.d == doctest::Approx(0.05).epsilon(0.02));
    CHECK(norm(g.n - Vec<2>{{1, 0}}) < 0.01);

    // analytic offset curvature oracle: 1/(r+t) = 4
    const auto es_h = sym_eigen(g.hessian);
    CHECK(std::abs(es_h.values[1] - 4.0) < 0.1);

    const auto es_s = sym_eigen(g.s);
    CHECK(std::abs(es_s.values[0] - 1.0) < 0.02);
    CHECK(std::abs(es_s.values[1] - 4.0) < 0.1);

    // K = n^T cof(S) n picks up the tangential curvature in 2D
    CHECK(std::abs(g.k - 4.0) < 0.1);
    // the two expressions of the regularized Gaussian curvature agree
    CHECK(std::abs(g.k - det(g.s) / dot(g.n, g.s * g.n)) < 1e-8);
}

TEST_CASE("flat region regularizes to the tau floor") {
    const double tau = 0.1;
    const double h = std::ldexp(1.0, -8);
    DiscreteShape<2> big;
    const int m = 200;
    // big square, flat sides
    for (int i = 0; i < m; ++i) {
        const double t = double(i) / m * 4.0;
        Vec<2> p;
        if (t < 1)
            p = Vec<2>{{0.1 + 0.8 * t, 0.1}};
        else if (t < 2)
            p = Vec<2>{{0.9, 0.1 + 0.8 * (t - 1)}};
        else if (t < 3)
            p = Vec<2>{{0.9 - 0.8 * (t - 2), 0.9}};
        else
            p = Vec<2>{{0.1, 0.9 - 0.8 * (t - 3)}};
        big.vertices.push_back(p);
        big.elements.push_back({i, (i + 1) % m});
    }
    const auto sdf = fast_march_sdf(big, h);
    const auto g = sdf.eval_geometry(Vec<2>{{0.5, 0.15}}, tau); // near flat bottom side
    const auto es = sym_eigen(g.s);
    CHECK(std::abs(es.values[0] - tau) < 0.02);
    CHECK(std::abs(es.values[1] - 1.0) < 0.02);
}

TEST_CASE("S is SPD with eigenvalue floor tau at sampled points") {
    const double tau = 0.1;
    const double h = std::ldexp(1.0, -7);
    const auto sdf = fast_march_sdf(make_circle(Vec<2>{{0.5, 0.5}}, 0.2, 256), h);
    auto rng = smtest::make_rng(301);
    std::uniform_real_distribution<double> u(0.15, 0.85);
    for (int k = 0; k < 500; ++k) {
        const Vec<2> x{{u(rng), u(rng)}};
        const auto g = sdf.eval_geometry(x, tau);
        const auto es = sym_eigen(g.s);
        CHECK(es.values[0] >= tau - 1e-10);
        CHECK(std::abs(g.k - det(g.s) / dot(g.n, g.s * g.n)) < 1e-8);
    }
}

TEST_CASE("injectivity radius of two circles") {
    const double h = std::ldexp(1.0, -8);
    const auto s1 = fast_march_sdf(make_circle(Vec<2>{{0.5, 0.5}}, 0.2, 512), h);
    const auto s2 = fast_march_sdf(make_circle(Vec<2>{{0.5, 0.5}}, 0.3, 512), h);
    const double ri = injectivity_radius(s1, s2);
    CHECK(ri == doctest::Approx(0.2).epsilon(0.10));
}

TEST_CASE("injectivity radius of two identical spheres") {
    const double h = std::ldexp(1.0, -6);
    const auto sp = make_icosphere(Vec<3>{{0.5, 0.5, 0.5}}, 0.25, 3);
    const auto s1 = fast_march_sdf(sp, h);
    // |D^2 d|_F = sqrt(2)/r on a sphere, so r_I = r/sqrt(2)
    const double ri = injectivity_radius(s1, s1);
    CHECK(ri == doctest::Approx(0.25 / std::sqrt(2.0)).epsilon(0.10));
}

TEST_CASE("injectivity radius ellipse vs circle") {
    const double h = std::ldexp(1.0, -8);
    const auto s1 = fast_march_sdf(make_ellipse(Vec<2>{{0.5, 0.5}}, 0.3, 0.15, 0.0, 1024), h);
    const auto s2 = fast_march_sdf(make_circle(Vec<2>{{0.5, 0.5}}, 0.3, 512), h);
    // max curvature of the ellipse is a/b^2 at the tips
    const double want = std::min(0.15 * 0.15 / 0.3, 0.3);
    const double ri = injectivity_radius(s1, s2);
    CHECK(ri == doctest::Approx(want).epsilon(0.15));
}

TEST_CASE("centroid of a circle is inside") {
    const double h = std::ldexp(1.0, -7);
    const auto shape = make_circle(Vec<2>{{0.4, 0.6}}, 0.15, 256);
    const auto sdf = fast_march_sdf(shape, h);
    CHECK(sdf.distance(shape.centroid()) < 0.0);
}

TEST_CASE("geometry query outside the closed domain") {
    const double h = std::ldexp(1.0, -6);
    const auto sdf = fast_march_sdf(make_circle(Vec<2>{{0.5, 0.5}}, 0.2, 128), h);
    CHECK_THROWS_AS((void)sdf.eval_geometry(Vec<2>{{1.5, 0.5}}, 0.1), OutsideEvaluable);
    // queries within h of the boundary clamp to the nearest evaluable sample
    CHECK(sdf.eval_geometry(Vec<2>{{1.0, 0.5}}, 0.1).d > 0.0);
}
