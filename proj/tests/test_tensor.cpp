#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "shellmatch/tensor.hpp"
#include "test_util.hpp"

using namespace shellmatch;
using smtest::make_rng;
using smtest::random_matrix;
using smtest::random_rotation;
using smtest::random_spd;
using smtest::random_unit;

namespace {

// test-only cubic characteristic-polynomial roots for a symmetric 3x3,
// independent of the Jacobi path (trigonometric solution)
std::array<double, 3> char_poly_roots(const Mat<3>& m) {
    const double q = trace(m) / 3.0;
    Mat<3> b = m - Mat<3>::identity() * q;
    const double p2 = frob(b, b) / 6.0;
    const double p = std::sqrt(std::max(p2, 0.0));
    if (p < 1e-14) return {q, q, q};
    const double detb = det(b) / 2.0;
    double r = detb / (p * p * p);
    r = std::clamp(r, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double pi = 3.14159265358979323846;
    std::array<double, 3> lam = {q + 2 * p * std::cos(phi + 2 * pi / 3), q + 2 * p * std::cos(phi - 2 * pi / 3),
                                 q + 2 * p * std::cos(phi)};
    std::sort(lam.begin(), lam.end());
    return lam;
}

} // namespace

TEST_CASE("cofactor basics") {
    CHECK(frob_norm(cofactor(Mat<2>::identity()) - Mat<2>::identity()) == doctest::Approx(0.0).epsilon(1e-15));

    Mat<2> d23 = Mat<2>::diag(Vec<2>{{2, 3}});
    Mat<2> want = Mat<2>::diag(Vec<2>{{3, 2}});
    CHECK(frob_norm(cofactor(d23) - want) < 1e-14);
}

TEST_CASE("cofactor Cramer identity, random 3x3") {
    auto rng = make_rng(101);
    for (int k = 0; k < 200; ++k) {
        const Mat<3> a = random_matrix<3>(rng);
        const Mat<3> lhs = a * transpose(cofactor(a));
        const Mat<3> rhs = Mat<3>::identity() * det(a);
        CHECK(frob_norm(lhs - rhs) < 1e-12);
    }
}

TEST_CASE("cofactor transpose over det is the inverse") {
    auto rng = make_rng(102);
    for (int k = 0; k < 200; ++k) {
        Mat<3> a = random_matrix<3>(rng);
        if (std::abs(det(a)) < 0.05) continue;
        const Mat<3> inv = transpose(cofactor(a)) * (1.0 / det(a));
        CHECK(frob_norm(a * inv - Mat<3>::identity()) / frob_norm(a * inv) < 1e-10);
    }
}

TEST_CASE("spd_sqrt_pair diagonal and identity") {
    auto [s, si] = spd_sqrt_pair(Mat<2>::identity());
    CHECK(frob_norm(s - Mat<2>::identity()) < 1e-14);
    CHECK(frob_norm(si - Mat<2>::identity()) < 1e-14);

    auto [s2, si2] = spd_sqrt_pair(Mat<2>::diag(Vec<2>{{4, 9}}));
    CHECK(frob_norm(s2 - Mat<2>::diag(Vec<2>{{2, 3}})) < 1e-13);
    CHECK(frob_norm(si2 - Mat<2>::diag(Vec<2>{{0.5, 1.0 / 3.0}})) < 1e-13);
}

TEST_CASE("spd_sqrt_pair random SPD round trips") {
    auto rng = make_rng(103);
    for (int k = 0; k < 200; ++k) {
        const Mat<3> m = random_spd<3>(rng, 0.1, 8.0);
        auto [s, si] = spd_sqrt_pair(m);
        CHECK(frob_norm(s * s - m) < 1e-10);
        CHECK(frob_norm(s * si - Mat<3>::identity()) < 1e-10);
        CHECK(frob_norm(s - transpose(s)) < 1e-12);
    }
}

TEST_CASE("spd_sqrt_pair rejects non-SPD") {
    CHECK_THROWS_AS((void)spd_sqrt_pair(Mat<2>::diag(Vec<2>{{1, -1}})), NotSPD);
    Mat<2> asym{};
    asym(0, 0) = 2;
    asym(1, 1) = 2;
    asym(0, 1) = 0.5;
    asym(1, 0) = -0.5;
    CHECK_THROWS_AS((void)spd_sqrt_pair(asym), NotSPD);
}

TEST_CASE("reg_abs eigenvalue map") {
    const double tau = 0.1;
    Mat<2> a = Mat<2>::diag(Vec<2>{{0.5, -2.0}});
    CHECK(frob_norm(reg_abs(a, tau) - Mat<2>::diag(Vec<2>{{0.5, 2.0}})) < 1e-13);

    Mat<2> b = Mat<2>::diag(Vec<2>{{0.05, 1.0}});
    CHECK(frob_norm(reg_abs(b, tau) - Mat<2>::diag(Vec<2>{{0.1, 1.0}})) < 1e-13);
}

TEST_CASE("reg_abs spectrum against characteristic-polynomial oracle") {
    auto rng = make_rng(104);
    const double tau = 0.1;
    for (int k = 0; k < 200; ++k) {
        Mat<3> m = random_matrix<3>(rng);
        m = 0.5 * (m + transpose(m));
        const auto lam = char_poly_roots(m);
        std::array<double, 3> want;
        for (int i = 0; i < 3; ++i) want[i] = std::max(std::abs(lam[i]), tau);
        std::sort(want.begin(), want.end());
        const Mat<3> r = reg_abs(m, tau);
        const auto got = char_poly_roots(r);
        for (int i = 0; i < 3; ++i) CHECK(std::abs(got[i] - want[i]) < 1e-10);
        // commutes with m (same eigenbasis)
        CHECK(frob_norm(m * r - r * m) < 1e-10);
        // SPD with floor tau
        CHECK(got[0] >= tau - 1e-12);
    }
}

TEST_CASE("rotation_to representatives") {
    CHECK(frob_norm(rotation_to<2>(Vec<2>{{0, 1}}) - Mat<2>::identity()) < 1e-14);
    CHECK(frob_norm(rotation_to<3>(Vec<3>{{0, 0, 1}}) - Mat<3>::identity()) < 1e-14);

    const Mat<3> flip = rotation_to<3>(Vec<3>{{0, 0, -1}});
    CHECK(frob_norm(flip - Mat<3>::diag(Vec<3>{{1, -1, -1}})) < 1e-14);
}

TEST_CASE("rotation_to properties on random unit vectors") {
    auto rng = make_rng(105);
    for (int k = 0; k < 300; ++k) {
        const Vec<3> e = random_unit<3>(rng);
        const Mat<3> q = rotation_to<3>(e);
        CHECK(norm(q * Vec<3>::axis(2) - e) < 1e-12);
        CHECK(frob_norm(transpose(q) * q - Mat<3>::identity()) < 1e-12);
        CHECK(std::abs(det(q) - 1.0) < 1e-12);

        const Vec<2> e2 = random_unit<2>(rng);
        const Mat<2> q2 = rotation_to<2>(e2);
        CHECK(norm(q2 * Vec<2>::axis(1) - e2) < 1e-12);
        CHECK(std::abs(det(q2) - 1.0) < 1e-12);
        CHECK(frob_norm(q2 * transpose(q2) - Mat<2>::identity()) < 1e-12);
    }
}

TEST_CASE("rotation_to rejects non-unit input") {
    CHECK_THROWS_AS((void)rotation_to<3>(Vec<3>{{0, 0, 1.5}}), NotUnit);
}

TEST_CASE("projection") {
    CHECK(frob_norm(projection(Vec<2>{{0, 1}}) - Mat<2>::diag(Vec<2>{{1, 0}})) < 1e-15);
    auto rng = make_rng(106);
    for (int k = 0; k < 300; ++k) {
        const Vec<3> n = random_unit<3>(rng);
        const Mat<3> p = projection(n);
        CHECK(norm(p * n) < 1e-14);
        CHECK(frob_norm(p * p - p) < 1e-13);
    }
}

TEST_CASE("spectral_derivative matches finite differences") {
    auto rng = make_rng(107);
    auto f = [](double l) { return std::sqrt(std::max(std::abs(l), 0.1)); };
    auto df = [](double l) { return std::abs(l) > 0.1 ? (l > 0 ? 1.0 : -1.0) / (2.0 * std::sqrt(std::abs(l))) : 0.0; };
    for (int k = 0; k < 100; ++k) {
        Mat<3> m = random_matrix<3>(rng);
        m = 0.5 * (m + transpose(m));
        Mat<3> h = random_matrix<3>(rng, -0.5, 0.5);
        h = 0.5 * (h + transpose(h));
        const auto es = sym_eigen(m);
        // skip near-degenerate / near-kink spectra where f(M) is not differentiable
        bool ok = true;
        for (int i = 0; i < 3; ++i) {
            if (std::abs(std::abs(es.values[i]) - 0.1) < 1e-3) ok = false;
            for (int j = i + 1; j < 3; ++j)
                if (std::abs(es.values[i] - es.values[j]) < 1e-3) ok = false;
        }
        if (!ok) continue;
        const Mat<3> dk = spectral_derivative(es, h, f, df);
        const double eps = 1e-6;
        const Mat<3> fp = spectral_apply(sym_eigen(m + h * eps), f);
        const Mat<3> fm = spectral_apply(sym_eigen(m - h * eps), f);
        const Mat<3> fd = (fp - fm) * (1.0 / (2.0 * eps));
        CHECK(frob_norm(dk - fd) < 1e-6 * std::max(1.0, frob_norm(fd)));
    }
}

TEST_CASE("sym_eigen reconstructs the matrix") {
    auto rng = make_rng(108);
    for (int k = 0; k < 200; ++k) {
        Mat<3> m = random_matrix<3>(rng);
        m = 0.5 * (m + transpose(m));
        const auto es = sym_eigen(m);
        const Mat<3> rec = spectral_apply(es, [](double l) { return l; });
        CHECK(frob_norm(rec - m) < 1e-12);
        CHECK(frob_norm(transpose(es.vectors) * es.vectors - Mat<3>::identity()) < 1e-12);
    }
}

TEST_CASE("random rotations leave the identity invariant under rotation_to composition") {
    auto rng = make_rng(109);
    for (int k = 0; k < 100; ++k) {
        const Vec<3> e = random_unit<3>(rng);
        const Mat<3> q = rotation_to<3>(e);
        CHECK(frob_norm(q * transpose(q) - Mat<3>::identity()) < 1e-12);
    }
}
