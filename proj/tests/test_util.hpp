#ifndef SHELLMATCH_TEST_UTIL_HPP
#define SHELLMATCH_TEST_UTIL_HPP

#include <random>

#include "shellmatch/tensor.hpp"

namespace smtest {

using shellmatch::Mat;
using shellmatch::Vec;

inline std::mt19937_64 make_rng(unsigned seed) { return std::mt19937_64(seed); }

template <int D>
Mat<D> random_matrix(std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
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
        n2 = shellmatch::dot(v, v);
    } while (n2 < 1e-8);
    return v * (1.0 / std::sqrt(n2));
}

template <int D>
Mat<D> random_rotation(std::mt19937_64& rng);

template <>
inline Mat<2> random_rotation<2>(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * 3.14159265358979323846);
    const double t = u(rng);
    Mat<2> q;
    q(0, 0) = std::cos(t);
    q(0, 1) = -std::sin(t);
    q(1, 0) = std::sin(t);
    q(1, 1) = std::cos(t);
    return q;
}

template <>
inline Mat<3> random_rotation<3>(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * 3.14159265358979323846);
    const double t = u(rng);
    Mat<3> rz{};
    rz(0, 0) = std::cos(t);
    rz(0, 1) = -std::sin(t);
    rz(1, 0) = std::sin(t);
    rz(1, 1) = std::cos(t);
    rz(2, 2) = 1.0;
    return shellmatch::rotation_to<3>(random_unit<3>(rng)) * rz;
}

// random SPD with spectrum in [lo_eig, hi_eig]
template <int D>
Mat<D> random_spd(std::mt19937_64& rng, double lo_eig = 0.2, double hi_eig = 4.0) {
    std::uniform_real_distribution<double> u(lo_eig, hi_eig);
    Vec<D> lam;
    for (int i = 0; i < D; ++i) lam[i] = u(rng);
    const Mat<D> q = random_rotation<D>(rng);
    return q * Mat<D>::diag(lam) * shellmatch::transpose(q);
}

// random SPD having `n` as an eigenvector (eigenvalue from the same range)
template <int D>
Mat<D> random_spd_with_axis(std::mt19937_64& rng, const Vec<D>& n, double lo_eig = 0.2, double hi_eig = 4.0) {
    std::uniform_real_distribution<double> u(lo_eig, hi_eig);
    Vec<D> lam;
    for (int i = 0; i < D; ++i) lam[i] = u(rng);
    const Mat<D> q = shellmatch::rotation_to<D>(n);
    return q * Mat<D>::diag(lam) * shellmatch::transpose(q);
}

} // namespace smtest

#endif
