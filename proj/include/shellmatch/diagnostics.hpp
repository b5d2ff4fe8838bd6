#ifndef SHELLMATCH_DIAGNOSTICS_HPP
#define SHELLMATCH_DIAGNOSTICS_HPP

// Quantitative diagnostics: residuals of psi(phi(x)) - x over the domain and
// over the input hypersurface, narrow-band inclusion checks, and the
// Gamma-convergence desk study comparing narrow-band energies against the
// surface limit oracle.

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "shellmatch/energy.hpp"

namespace shellmatch {

struct SymmetryReport {
    double l2_omega = 0;   // || psi.phi - Id ||_L2(Omega)
    double linf_omega = 0; // sup over quadrature points
    double avg_m1 = 0;     // mean over shape-1 vertices
    double linf_m1 = 0;    // max over shape-1 vertices
    std::string mode_label;
    long clamped_points = 0; // composed points that left (0,1)^d
};

template <int D>
SymmetryReport symmetry_report(const Deformation<D>& phi, const Deformation<D>& psi, const DiscreteShape<D>& shape1,
                               const std::string& mode_label) {
    SymmetryReport rep;
    rep.mode_label = mode_label;
    const auto& g = *phi.grid;

    auto compose = [&](const Vec<D>& x) {
        Vec<D> y = phi.evaluate(x);
        for (int k = 0; k < D; ++k) {
            if (y[k] < 0.0 || y[k] > 1.0) {
                ++rep.clamped_points;
                y[k] = std::clamp(y[k], 0.0, 1.0);
                break;
            }
        }
        return psi.evaluate(y) - x;
    };

    double l2 = 0;
    for (int si = 0; si < int(g.simplices.size()); ++si) {
        const auto& s = g.simplices[si];
        for (int qi = 0; qi < SimplexQuadrature<D>::n; ++qi) {
            Vec<D> x{};
            for (int i = 0; i <= D; ++i) x += SimplexQuadrature<D>::bary[qi][i] * g.vertex_pos[s.verts[i]];
            const Vec<D> r = compose(x);
            const double nr = norm(r);
            l2 += SimplexQuadrature<D>::weights[qi] * s.volume * nr * nr;
            rep.linf_omega = std::max(rep.linf_omega, nr);
        }
    }
    rep.l2_omega = std::sqrt(l2);

    double acc = 0;
    for (const auto& v : shape1.vertices) {
        const double nr = norm(compose(v));
        acc += nr;
        rep.linf_m1 = std::max(rep.linf_m1, nr);
    }
    rep.avg_m1 = acc / double(shape1.vertices.size());
    return rep;
}

struct BandInclusion {
    bool pass = false;
    double max_violation = 0; // max |d_2(phi(x))| over the sigma-band of shape 1
};

template <int D>
BandInclusion band_inclusion_check(const Deformation<D>& phi, const SignedShape<D>& s1, const SignedShape<D>& s2,
                                   double sigma, double eps) {
    BandInclusion out;
    const auto& g = *phi.grid;
    for (int si = 0; si < int(g.simplices.size()); ++si) {
        const auto& s = g.simplices[si];
        for (int qi = 0; qi < SimplexQuadrature<D>::n; ++qi) {
            Vec<D> x{};
            for (int i = 0; i <= D; ++i) x += SimplexQuadrature<D>::bary[qi][i] * g.vertex_pos[s.verts[i]];
            if (std::abs(s1.distance(x)) > sigma) continue;
            Vec<D> y = phi.evaluate(x);
            for (int k = 0; k < D; ++k) y[k] = std::clamp(y[k], 0.0, 1.0);
            out.max_violation = std::max(out.max_violation, std::abs(s2.distance(y)));
        }
    }
    out.pass = out.max_violation <= eps;
    return out;
}

struct GammaStudy {
    std::vector<double> sigmas;              // strictly decreasing
    std::vector<double> narrowband_energies; // direct-mode E^sigma
    double surface_energy = 0;               // E^0 oracle
    std::vector<double> gaps;                // |E^sigma - E^0|
};

// Direct-mode energies of a fixed deformation for a decreasing sigma sequence
// against the surface-limit oracle (theta = 0 regime).
template <int D>
GammaStudy gamma_study(const Deformation<D>& phi_fixed, const SignedShape<D>& s1, const SignedShape<D>& s2,
                       const DiscreteShape<D>& shape1, const EnergyParams& params, std::vector<double> sigmas) {
    GammaStudy out;
    out.sigmas = std::move(sigmas);
    EnergyParams p = params;
    p.mode = EnergyMode::direct;
    p.theta = 0;
    out.surface_energy = surface_limit_energy(phi_fixed, shape1, s1, s2, p);
    for (const double sigma : out.sigmas) {
        p.sigma = sigma;
        const auto e = assemble_energy(phi_fixed, s1, s2, p);
        out.narrowband_energies.push_back(e.total);
        out.gaps.push_back(std::abs(e.total - out.surface_energy));
    }
    return out;
}

inline std::string gamma_study_csv(const GammaStudy& g) {
    std::ostringstream out;
    out.precision(17);
    out << "sigma,narrowband_energy,surface_energy,gap\n";
    for (std::size_t i = 0; i < g.sigmas.size(); ++i)
        out << g.sigmas[i] << "," << g.narrowband_energies[i] << "," << g.surface_energy << "," << g.gaps[i] << "\n";
    return out.str();
}

// ---- algebraic property suites (shared by `shellmatch verify` and the
// acceptance tests) ----

struct PropertyCheck {
    std::string name;
    bool pass = false;
    double worst = 0;
    double tolerance = 0;
    long count = 0;
};

namespace verify_detail {

template <int D>
Mat<D> random_matrix(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Mat<D> a;
    for (int i = 0; i < D * D; ++i) a.e[i] = u(rng);
    return a;
}

template <int D>
Vec<D> random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec<D> v;
    double n2 = 0;
    do {
        for (int i = 0; i < D; ++i) v[i] = g(rng);
        n2 = dot(v, v);
    } while (n2 < 1e-8);
    return v * (1.0 / std::sqrt(n2));
}

template <int D>
Mat<D> rotation_fixing_last_axis(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * 3.14159265358979323846);
    const double t = u(rng);
    Mat<D> r = Mat<D>::identity();
    r(0, 0) = std::cos(t);
    r(0, 1) = -std::sin(t);
    r(1, 0) = std::sin(t);
    r(1, 1) = std::cos(t);
    return r;
}

// SPD with `n` as an eigenvector (shape-operator structure)
template <int D>
Mat<D> random_spd_with_axis(std::mt19937_64& rng, const Vec<D>& n, double lo = 0.2, double hi = 4.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vec<D> lam;
    for (int i = 0; i < D; ++i) lam[i] = u(rng);
    const Mat<D> q = rotation_to<D>(n);
    return q * Mat<D>::diag(lam) * transpose(q);
}

} // namespace verify_detail

// The four determinant identities on random tuples (half d=2, half d=3);
// both sides of each identity are evaluated independently.
template <int D>
void determinant_identity_suite(std::mt19937_64& rng, long tuples, double& worst) {
    using namespace verify_detail;
    long done = 0;
    while (done < tuples) {
        const Mat<D> a = random_matrix<D>(rng, -2.0, 2.0);
        const Vec<D> n1 = random_unit<D>(rng), n2 = random_unit<D>(rng);
        const Mat<D> p1 = projection(n1), p2 = projection(n2);

        worst = std::max(worst, std::abs(det(p2 * a * p1 + outer(n2, n1)) - dot(n2, cofactor(a) * n1)));

        if (det(a) <= 0.05) continue;
        ++done;
        const double dt = det(a);
        const Mat<D> binv = transpose(cofactor(a)) * (1.0 / dt);
        worst = std::max(worst, std::abs(det(p1 * binv * p2 + outer(n1, n2)) - dot(n2, a * n1) / dt));

        const Mat<D> s1 = random_spd_with_axis<D>(rng, n1);
        const Mat<D> s2 = random_spd_with_axis<D>(rng, n2);
        const double k1 = dot(n1, cofactor(s1) * n1);
        const double k2 = dot(n2, cofactor(s2) * n2);
        const auto [sq1, isq1] = spd_sqrt_pair(s1);
        const auto [sq2, isq2] = spd_sqrt_pair(s2);
        worst = std::max(worst, std::abs(det(p2 * sq2 * p2 * a * p1 * isq1 * p1 + outer(n2, n1)) -
                                         std::sqrt(k2 / k1) * dot(n2, cofactor(a) * n1)));
        worst = std::max(worst, std::abs(det(p1 * sq1 * p1 * binv * p2 * isq2 * p2 + outer(n1, n2)) -
                                         std::sqrt(k1 / k2) * dot(n2, a * n1) / dt));
    }
}

inline PropertyCheck check_determinant_identities(unsigned seed, long tuples, double tol) {
    std::mt19937_64 rng(seed);
    PropertyCheck c{"determinant identities (inversearea/tancof/shapecof/invshapecof)", false, 0, tol, tuples};
    determinant_identity_suite<2>(rng, tuples / 2, c.worst);
    determinant_identity_suite<3>(rng, tuples - tuples / 2, c.worst);
    c.pass = c.worst < tol;
    return c;
}

inline std::vector<PropertyCheck> check_stored_energy_properties(unsigned seed, long n_nonneg, long n_pairs,
                                                                 long n_grad) {
    using namespace verify_detail;
    std::mt19937_64 rng(seed);
    std::vector<PropertyCheck> out;

    {
        PropertyCheck c{"stored energy nonnegative, W(1) = 0", false, 0, 1e-12, n_nonneg};
        c.worst = std::abs(stored_energy(Mat<3>::identity()));
        c.worst = std::max(c.worst, std::abs(stored_energy(Mat<2>::identity())));
        for (long k = 0; k < n_nonneg; ++k) {
            const double w = (k % 2 == 0) ? stored_energy(random_matrix<3>(rng, -3.0, 3.0))
                                          : stored_energy(random_matrix<2>(rng, -3.0, 3.0));
            c.worst = std::max(c.worst, -w);
        }
        c.pass = c.worst < c.tolerance;
        out.push_back(c);
    }
    {
        PropertyCheck c{"frame invariance and isotropy", false, 0, 1e-10, n_pairs};
        for (long k = 0; k < n_pairs; ++k) {
            const Mat<3> a = random_matrix<3>(rng, -2.0, 2.0);
            const Vec<3> axis = random_unit<3>(rng);
            const Mat<3> q = rotation_to<3>(axis) * rotation_fixing_last_axis<3>(rng);
            const double w = stored_energy(a);
            c.worst = std::max(c.worst, std::abs(stored_energy(q * a) - w));
            c.worst = std::max(c.worst, std::abs(stored_energy(a * q) - w));
        }
        c.pass = c.worst < c.tolerance;
        out.push_back(c);
    }
    {
        PropertyCheck c{"What-hat midpoint convexity", false, 0, 1e-12, n_pairs};
        std::uniform_real_distribution<double> us(0.0, 100.0), ut(-10.0, 10.0);
        auto what = [](int d, double s, double t) {
            const double cdm1 = std::pow(double(d), (d - 1) / 2.0);
            return std::pow(s, (d + 1.0) / d) / (d + 1) + std::sqrt(2.0) * cdm1 * std::sqrt(1.0 + (t - 2.0) * (t - 2.0));
        };
        for (long k = 0; k < n_pairs; ++k) {
            const int d = (k % 2) ? 2 : 3;
            const double s1 = us(rng), s2 = us(rng), t1 = ut(rng), t2 = ut(rng);
            const double viol = what(d, 0.5 * (s1 + s2), 0.5 * (t1 + t2)) - 0.5 * (what(d, s1, t1) + what(d, s2, t2));
            c.worst = std::max(c.worst, viol);
        }
        c.pass = c.worst < c.tolerance;
        out.push_back(c);
    }
    {
        PropertyCheck c{"gradient vs central differences", false, 0, 1e-6, n_grad};
        const double h = 1e-5;
        for (long k = 0; k < n_grad; ++k) {
            const Mat<3> a = random_matrix<3>(rng, -3.0, 3.0);
            const Mat<3> an = stored_energy_grad(a);
            Mat<3> fd;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    Mat<3> ap = a, am = a;
                    ap(i, j) += h;
                    am(i, j) -= h;
                    fd(i, j) = (stored_energy(ap) - stored_energy(am)) / (2.0 * h);
                }
            c.worst = std::max(c.worst, frob_norm(an - fd) / std::max(1.0, frob_norm(fd)));
        }
        c.pass = c.worst < c.tolerance;
        out.push_back(c);
    }
    return out;
}

inline std::vector<PropertyCheck> check_classifier_equivalence(unsigned seed, long n_each) {
    using namespace verify_detail;
    std::mt19937_64 rng(seed);
    std::vector<PropertyCheck> out;
    PropertyCheck sat{"classifier orthogonal for pullback-compatible A", false, 0, 1e-9, n_each};
    PropertyCheck viol{"classifier non-orthogonal for random A", false,
                       std::numeric_limits<double>::infinity(), 1e-3, n_each};
    for (long k = 0; k < n_each; ++k) {
        const Vec<3> n1 = random_unit<3>(rng), n2 = random_unit<3>(rng);
        const Mat<3> m = random_spd_with_axis<3>(rng, n1, 0.3, 3.0);
        const Mat<3> n = random_spd_with_axis<3>(rng, n2, 0.3, 3.0);
        const Mat<3> p1 = projection(n1), p2 = projection(n2);
        const auto [msq, misq] = spd_sqrt_pair(m);
        const auto [nsq, nisq] = spd_sqrt_pair(n);
        (void)misq;
        (void)nsq;
        const Mat<3> u = rotation_to<3>(n2) * rotation_fixing_last_axis<3>(rng) * transpose(rotation_to<3>(n1));
        const Mat<3> a = (p2 * nisq * p2 + outer(n2, n2)) * u * (p1 * msq * p1 + outer(n1, n1));
        const Mat<3> lam = classifier(m, n, a, n1, n2);
        sat.worst = std::max(sat.worst, frob_norm(transpose(lam) * lam - Mat<3>::identity()));

        const Mat<3> bad = random_matrix<3>(rng, -2.0, 2.0);
        const Mat<3> lam_bad = classifier(m, n, bad, n1, n2);
        viol.worst = std::min(viol.worst, frob_norm(transpose(lam_bad) * lam_bad - Mat<3>::identity()));
    }
    sat.pass = sat.worst < sat.tolerance;
    viol.pass = viol.worst > viol.tolerance;
    out.push_back(sat);
    out.push_back(viol);
    return out;
}

} // namespace shellmatch

#endif
