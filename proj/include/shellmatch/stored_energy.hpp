#ifndef SHELLMATCH_STORED_ENERGY_HPP
#define SHELLMATCH_STORED_ENERGY_HPP

// Closed-form stored energy densities with a single well at SO(d),
// their inverse-composed variants and analytic first derivatives.

#include <cmath>

#include "shellmatch/errors.hpp"
#include "shellmatch/tensor.hpp"

namespace shellmatch {

enum class EnergyDensityKind {
    paper_bounded,   // |A|^{d+1}/(d+1) + sqrt(2) d^{(d-1)/2} sqrt(1+(det A-2)^2) - consts
    exponential_wo,  // |A|^{d+1}/(d+1) + d^{(d-1)/2} e^{1-det A} - consts (no growth bound)
    comparison_wvol, // |A|^3+|cof A|^3+3(det A)^-2 (d=3) / |A|^2+(det A)^-2 (d=2)
};

template <int D>
struct EnergyDensitySpec {
    static constexpr int d = D;
    static constexpr int p = D + 1; // coercivity exponent of the bounded density
    EnergyDensityKind kind = EnergyDensityKind::paper_bounded;
};

namespace density_detail {

template <int D>
constexpr double pow_d_half(int num) {
    // d^(num/2)
    double r = 1.0;
    for (int i = 0; i < num / 2; ++i) r *= D;
    if (num % 2) r *= (D == 2 ? 1.4142135623730950488 : 1.7320508075688772935);
    return r;
}

} // namespace density_detail

// Bounded polyconvex density, defined on all of R^{dxd} regardless of orientation.
// W >= 0 with W = 0 exactly on SO(d).
template <int D>
inline double stored_energy(const Mat<D>& a) {
    const double na = frob_norm(a);
    const double dt = det(a);
    const double cdm1 = density_detail::pow_d_half<D>(D - 1); // d^{(d-1)/2}
    const double cdp1 = density_detail::pow_d_half<D>(D + 1); // d^{(d+1)/2}
    double napow = 1.0;
    for (int i = 0; i < D + 1; ++i) napow *= na;
    return napow / (D + 1) + std::sqrt(2.0) * cdm1 * std::sqrt(1.0 + (dt - 2.0) * (dt - 2.0)) -
           cdp1 / (D + 1) - 2.0 * cdm1;
}

// dW/dA = |A|^{d-1} A + sqrt(2) d^{(d-1)/2} (det A - 2)/sqrt(1+(det A-2)^2) cof A
template <int D>
inline Mat<D> stored_energy_grad(const Mat<D>& a) {
    const double na = frob_norm(a);
    const double dt = det(a);
    const double cdm1 = density_detail::pow_d_half<D>(D - 1);
    double napow = 1.0;
    for (int i = 0; i < D - 1; ++i) napow *= na;
    const double s = (dt - 2.0) / std::sqrt(1.0 + (dt - 2.0) * (dt - 2.0));
    return a * napow + cofactor(a) * (std::sqrt(2.0) * cdm1 * s);
}

// Exponential variant W_o. Coercive in W^{1,d+1} but without the growth bound
// W(A) <= C(1+|A|^{d+1}); kept out of the defaults.
template <int D>
inline double stored_energy_wo(const Mat<D>& a) {
    const double na = frob_norm(a);
    const double dt = det(a);
    const double cdm1 = density_detail::pow_d_half<D>(D - 1);
    const double cdp1 = density_detail::pow_d_half<D>(D + 1);
    double napow = 1.0;
    for (int i = 0; i < D + 1; ++i) napow *= na;
    return napow / (D + 1) + cdm1 * std::exp(1.0 - dt) - cdp1 / (D + 1) - cdm1;
}

template <int D>
inline Mat<D> stored_energy_wo_grad(const Mat<D>& a) {
    const double na = frob_norm(a);
    const double dt = det(a);
    const double cdm1 = density_detail::pow_d_half<D>(D - 1);
    double napow = 1.0;
    for (int i = 0; i < D - 1; ++i) napow *= na;
    return a * napow - cofactor(a) * (cdm1 * std::exp(1.0 - dt));
}

template <int D>
inline double density_value(const Mat<D>& a, EnergyDensityKind kind) {
    switch (kind) {
    case EnergyDensityKind::exponential_wo: return stored_energy_wo(a);
    default: return stored_energy(a);
    }
}

template <int D>
inline Mat<D> density_grad(const Mat<D>& a, EnergyDensityKind kind) {
    switch (kind) {
    case EnergyDensityKind::exponential_wo: return stored_energy_wo_grad(a);
    default: return stored_energy_grad(a);
    }
}

// W(A^{-1}) |det A| = W(cof A^T / det A) |det A|, the inverse-composed density.
template <int D>
inline double stored_energy_inverse_density(const Mat<D>& a) {
    const double dt = det(a);
    if (dt <= 0.0) throw NonpositiveDeterminant("stored_energy_inverse_density: det A <= 0");
    const Mat<D> ainv = transpose(cofactor(a)) * (1.0 / dt);
    return stored_energy(ainv) * dt;
}

// d/dA of W(A^{-1}) det A = -det A A^{-T} dW(A^{-1}) A^{-T} + W(A^{-1}) cof A
template <int D>
inline Mat<D> stored_energy_inverse_density_grad(const Mat<D>& a) {
    const double dt = det(a);
    if (dt <= 0.0) throw NonpositiveDeterminant("stored_energy_inverse_density_grad: det A <= 0");
    const Mat<D> ainv = transpose(cofactor(a)) * (1.0 / dt);
    const Mat<D> ainvT = transpose(ainv);
    return -dt * (ainvT * stored_energy_grad(ainv) * ainvT) + cofactor(a) * stored_energy(ainv);
}

// Comparison volume density, stationary at the identity.
inline double stored_energy_vol(const Mat<2>& a) {
    const double dt = det(a);
    if (dt <= 0.0) throw NonpositiveDeterminant("stored_energy_vol: det A <= 0");
    const double na = frob_norm(a);
    return na * na + 1.0 / (dt * dt);
}

inline double stored_energy_vol(const Mat<3>& a) {
    const double dt = det(a);
    if (dt <= 0.0) throw NonpositiveDeterminant("stored_energy_vol: det A <= 0");
    const double na = frob_norm(a);
    const double nc = frob_norm(cofactor(a));
    return na * na * na + nc * nc * nc + 3.0 / (dt * dt);
}

inline Mat<2> stored_energy_vol_grad(const Mat<2>& a) {
    const double dt = det(a);
    if (dt <= 0.0) throw NonpositiveDeterminant("stored_energy_vol_grad: det A <= 0");
    return 2.0 * a - (2.0 / (dt * dt * dt)) * cofactor(a);
}

inline Mat<3> stored_energy_vol_grad(const Mat<3>& a) {
    const double dt = det(a);
    if (dt <= 0.0) throw NonpositiveDeterminant("stored_energy_vol_grad: det A <= 0");
    const Mat<3> cof = cofactor(a);
    const double na = frob_norm(a);
    const double nc = frob_norm(cof);
    Mat<3> g = 3.0 * na * a - (6.0 / (dt * dt * dt)) * cof;
    // d|cof A|^3 = 3|cof A| (cof A : dcof A); build by directional probes of
    // dcof[H] = cof(A) tr(A^-1 H) - cof(A) H^T A^-T ... assembled entrywise below.
    // Use d(cof A)_{ij}/dA_{kl} via the identity cof A = det(A) A^{-T} away from
    // singular A, evaluated directionwise for robustness and clarity.
    const Mat<3> ainv = transpose(cof) * (1.0 / dt);
    const Mat<3> ainvT = transpose(ainv);
    for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
            Mat<3> h{};
            h(k, l) = 1.0;
            const Mat<3> dcof = dt * (trace(ainv * h) * ainvT - ainvT * transpose(h) * ainvT);
            g(k, l) += 3.0 * nc * frob(cof, dcof);
        }
    return g;
}

} // namespace shellmatch

#endif
