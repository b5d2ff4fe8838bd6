#ifndef SHELLMATCH_TENSOR_HPP
#define SHELLMATCH_TENSOR_HPP

// Dimension-generic (D in {2,3}) dense small-vector/matrix algebra.
// Everything here is a pure function on value types.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>

#include "shellmatch/errors.hpp"

namespace shellmatch {

template <int D>
struct Vec {
    std::array<double, D> e{};

    double& operator[](int i) { return e[i]; }
    double operator[](int i) const { return e[i]; }

    Vec operator+(const Vec& o) const {
        Vec r;
        for (int i = 0; i < D; ++i) r.e[i] = e[i] + o.e[i];
        return r;
    }
    Vec operator-(const Vec& o) const {
        Vec r;
        for (int i = 0; i < D; ++i) r.e[i] = e[i] - o.e[i];
        return r;
    }
    Vec operator*(double s) const {
        Vec r;
        for (int i = 0; i < D; ++i) r.e[i] = e[i] * s;
        return r;
    }
    Vec operator-() const {
        Vec r;
        for (int i = 0; i < D; ++i) r.e[i] = -e[i];
        return r;
    }
    Vec& operator+=(const Vec& o) {
        for (int i = 0; i < D; ++i) e[i] += o.e[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        for (int i = 0; i < D; ++i) e[i] -= o.e[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (int i = 0; i < D; ++i) e[i] *= s;
        return *this;
    }

    static Vec zero() { return Vec{}; }
    static Vec axis(int k) {
        Vec r{};
        r.e[k] = 1.0;
        return r;
    }
};

template <int D>
inline Vec<D> operator*(double s, const Vec<D>& v) {
    return v * s;
}

template <int D>
inline double dot(const Vec<D>& a, const Vec<D>& b) {
    double s = 0;
    for (int i = 0; i < D; ++i) s += a.e[i] * b.e[i];
    return s;
}

template <int D>
inline double norm(const Vec<D>& a) {
    return std::sqrt(dot(a, a));
}

inline Vec<3> cross(const Vec<3>& a, const Vec<3>& b) {
    return Vec<3>{{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]}};
}

// Row-major D x D matrix.
template <int D>
struct Mat {
    std::array<double, D * D> e{};

    double& operator()(int i, int j) { return e[i * D + j]; }
    double operator()(int i, int j) const { return e[i * D + j]; }

    Mat operator+(const Mat& o) const {
        Mat r;
        for (int i = 0; i < D * D; ++i) r.e[i] = e[i] + o.e[i];
        return r;
    }
    Mat operator-(const Mat& o) const {
        Mat r;
        for (int i = 0; i < D * D; ++i) r.e[i] = e[i] - o.e[i];
        return r;
    }
    Mat operator*(double s) const {
        Mat r;
        for (int i = 0; i < D * D; ++i) r.e[i] = e[i] * s;
        return r;
    }
    Mat operator-() const {
        Mat r;
        for (int i = 0; i < D * D; ++i) r.e[i] = -e[i];
        return r;
    }
    Mat& operator+=(const Mat& o) {
        for (int i = 0; i < D * D; ++i) e[i] += o.e[i];
        return *this;
    }
    Mat& operator-=(const Mat& o) {
        for (int i = 0; i < D * D; ++i) e[i] -= o.e[i];
        return *this;
    }
    Mat& operator*=(double s) {
        for (int i = 0; i < D * D; ++i) e[i] *= s;
        return *this;
    }

    Mat operator*(const Mat& o) const {
        Mat r{};
        for (int i = 0; i < D; ++i)
            for (int k = 0; k < D; ++k) {
                const double a = (*this)(i, k);
                for (int j = 0; j < D; ++j) r(i, j) += a * o(k, j);
            }
        return r;
    }

    Vec<D> operator*(const Vec<D>& v) const {
        Vec<D> r{};
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j) r[i] += (*this)(i, j) * v[j];
        return r;
    }

    static Mat identity() {
        Mat r{};
        for (int i = 0; i < D; ++i) r(i, i) = 1.0;
        return r;
    }
    static Mat zero() { return Mat{}; }
    static Mat diag(const Vec<D>& d) {
        Mat r{};
        for (int i = 0; i < D; ++i) r(i, i) = d[i];
        return r;
    }
};

template <int D>
inline Mat<D> operator*(double s, const Mat<D>& m) {
    return m * s;
}

template <int D>
inline Mat<D> transpose(const Mat<D>& a) {
    Mat<D> r;
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) r(i, j) = a(j, i);
    return r;
}

template <int D>
inline Mat<D> outer(const Vec<D>& a, const Vec<D>& b) {
    Mat<D> r;
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) r(i, j) = a[i] * b[j];
    return r;
}

template <int D>
inline double trace(const Mat<D>& a) {
    double s = 0;
    for (int i = 0; i < D; ++i) s += a(i, i);
    return s;
}

// Frobenius inner product A : B.
template <int D>
inline double frob(const Mat<D>& a, const Mat<D>& b) {
    double s = 0;
    for (int i = 0; i < D * D; ++i) s += a.e[i] * b.e[i];
    return s;
}

template <int D>
inline double frob_norm(const Mat<D>& a) {
    return std::sqrt(frob(a, a));
}

inline double det(const Mat<2>& a) {
    return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
}

inline double det(const Mat<3>& a) {
    return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
           a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
           a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

// Cofactor matrix: A cof(A)^T = det(A) 1. Defined for singular A too.
inline Mat<2> cofactor(const Mat<2>& a) {
    Mat<2> c;
    c(0, 0) = a(1, 1);
    c(0, 1) = -a(1, 0);
    c(1, 0) = -a(0, 1);
    c(1, 1) = a(0, 0);
    return c;
}

inline Mat<3> cofactor(const Mat<3>& a) {
    Mat<3> c;
    c(0, 0) = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
    c(0, 1) = a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2);
    c(0, 2) = a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0);
    c(1, 0) = a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2);
    c(1, 1) = a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0);
    c(1, 2) = a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1);
    c(2, 0) = a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1);
    c(2, 1) = a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2);
    c(2, 2) = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    return c;
}

template <int D>
inline Mat<D> inverse(const Mat<D>& a) {
    const double d = det(a);
    return transpose(cofactor(a)) * (1.0 / d);
}

// Orthogonal projection onto the plane normal to n: P = 1 - n (x) n.
template <int D>
inline Mat<D> projection(const Vec<D>& n) {
    return Mat<D>::identity() - outer(n, n);
}

template <int D>
struct SymEigen {
    Vec<D> values;  // ascending
    Mat<D> vectors; // columns are eigenvectors
};

inline SymEigen<2> sym_eigen(const Mat<2>& m) {
    const double a = m(0, 0), b = 0.5 * (m(0, 1) + m(1, 0)), c = m(1, 1);
    SymEigen<2> r;
    if (std::abs(b) < 1e-300) {
        if (a <= c) {
            r.values = {{a, c}};
            r.vectors = Mat<2>::identity();
        } else {
            r.values = {{c, a}};
            r.vectors = Mat<2>{{0, 1, 1, 0}};
        }
        return r;
    }
    const double half_tr = 0.5 * (a + c);
    const double rad = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    const double l0 = half_tr - rad, l1 = half_tr + rad;
    // eigenvector for l1 from the larger-residual row
    Vec<2> v1{{b, l1 - a}};
    Vec<2> alt{{l1 - c, b}};
    if (dot(alt, alt) > dot(v1, v1)) v1 = alt;
    v1 *= 1.0 / norm(v1);
    r.values = {{l0, l1}};
    r.vectors(0, 0) = -v1[1];
    r.vectors(1, 0) = v1[0];
    r.vectors(0, 1) = v1[0];
    r.vectors(1, 1) = v1[1];
    return r;
}

// Cyclic Jacobi iteration for 3x3 symmetric matrices.
inline SymEigen<3> sym_eigen(const Mat<3>& m_in) {
    Mat<3> a = 0.5 * (m_in + transpose(m_in));
    Mat<3> v = Mat<3>::identity();
    const double scale = std::max({std::abs(a.e[0]), std::abs(a.e[4]), std::abs(a.e[8]),
                                   std::abs(a.e[1]), std::abs(a.e[2]), std::abs(a.e[5]), 1e-300});
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = std::sqrt(a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2));
        if (off <= 1e-14 * scale) break;
        for (int p = 0; p < 2; ++p)
            for (int q = p + 1; q < 3; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < 3; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < 3; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }
    // sort ascending
    std::array<int, 3> idx = {0, 1, 2};
    std::array<double, 3> lam = {a(0, 0), a(1, 1), a(2, 2)};
    for (int i = 0; i < 2; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (lam[idx[j]] < lam[idx[i]]) std::swap(idx[i], idx[j]);
    SymEigen<3> r;
    for (int j = 0; j < 3; ++j) {
        r.values[j] = lam[idx[j]];
        for (int i = 0; i < 3; ++i) r.vectors(i, j) = v(i, idx[j]);
    }
    return r;
}

// Apply f to the spectrum of a symmetric matrix: V f(diag) V^T.
template <int D, typename F>
inline Mat<D> spectral_apply(const SymEigen<D>& es, F&& f) {
    Mat<D> r{};
    for (int k = 0; k < D; ++k) {
        const double fk = f(es.values[k]);
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j) r(i, j) += fk * es.vectors(i, k) * es.vectors(j, k);
    }
    return r;
}

// Daleckii-Krein: directional derivative of M -> f(M) at a symmetric M
// along symmetric H, from M's eigensystem and f, f'.
template <int D, typename F, typename DF>
inline Mat<D> spectral_derivative(const SymEigen<D>& es, const Mat<D>& h, F&& f, DF&& df) {
    // G = V^T H V, scale by divided differences, rotate back.
    Mat<D> g{};
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
            double s = 0;
            for (int a = 0; a < D; ++a)
                for (int b = 0; b < D; ++b) s += es.vectors(a, i) * h(a, b) * es.vectors(b, j);
            g(i, j) = s;
        }
    const double scale = std::max(std::abs(es.values[0]), std::abs(es.values[D - 1])) + 1e-300;
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
            const double li = es.values[i], lj = es.values[j];
            const double dd = (std::abs(li - lj) > 1e-9 * scale) ? (f(li) - f(lj)) / (li - lj) : df(0.5 * (li + lj));
            g(i, j) *= dd;
        }
    Mat<D> r{};
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
            double s = 0;
            for (int a = 0; a < D; ++a)
                for (int b = 0; b < D; ++b) s += es.vectors(i, a) * g(a, b) * es.vectors(j, b);
            r(i, j) = s;
        }
    return r;
}

// Regularized absolute value of the eigenvalues: lambda -> max(|lambda|, tau).
// Output is SPD with the same eigenvectors as M and smallest eigenvalue >= tau.
template <int D>
inline Mat<D> reg_abs(const Mat<D>& m, double tau) {
    const auto es = sym_eigen(m);
    return spectral_apply(es, [tau](double l) { return std::max(std::abs(l), tau); });
}

namespace spectral_detail {

// divided difference of reg(l) = max(|l|, tau), branch-wise without
// cancellation; a != b assumed handled by the caller near coincidence
inline double dd_reg(double a, double b, double tau) {
    const double ra = std::max(std::abs(a), tau), rb = std::max(std::abs(b), tau);
    const bool fa = std::abs(a) > tau, fb = std::abs(b) > tau;
    if (!fa && !fb) return 0.0;
    if (fa && fb && ((a > 0) == (b > 0))) return a > 0 ? 1.0 : -1.0;
    return (ra - rb) / (a - b); // mixed branch or sign: |a - b| >= |.|-tau gap
}

} // namespace spectral_detail

// Directional derivatives of M -> sqrt(reg(M)) and M -> reg(M)^{-1/2} using
// cancellation-free divided differences, stable for clustered spectra.
template <int D>
inline Mat<D> spectral_derivative_sqrt_reg(const SymEigen<D>& es, const Mat<D>& h, double tau) {
    auto f = [tau](double l) { return std::sqrt(std::max(std::abs(l), tau)); };
    auto df = [tau](double l) {
        const double al = std::abs(l);
        return al > tau ? (l > 0 ? 1.0 : -1.0) / (2.0 * std::sqrt(al)) : 0.0;
    };
    const double scale = std::max(std::abs(es.values[0]), std::abs(es.values[D - 1])) + 1e-300;
    Mat<D> g{};
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
            double s = 0;
            for (int a = 0; a < D; ++a)
                for (int b = 0; b < D; ++b) s += es.vectors(a, i) * h(a, b) * es.vectors(b, j);
            const double li = es.values[i], lj = es.values[j];
            double dd;
            if (std::abs(li - lj) <= 1e-12 * scale) {
                dd = df(0.5 * (li + lj));
            } else {
                const double ri = std::max(std::abs(li), tau), rj = std::max(std::abs(lj), tau);
                dd = spectral_detail::dd_reg(li, lj, tau) / (std::sqrt(ri) + std::sqrt(rj));
            }
            g(i, j) = s * dd;
        }
    Mat<D> r{};
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
            double s = 0;
            for (int a = 0; a < D; ++a)
                for (int b = 0; b < D; ++b) s += es.vectors(i, a) * g(a, b) * es.vectors(j, b);
            r(i, j) = s;
        }
    (void)f;
    return r;
}

template <int D>
inline Mat<D> spectral_derivative_invsqrt_reg(const SymEigen<D>& es, const Mat<D>& h, double tau) {
    auto df = [tau](double l) {
        const double al = std::abs(l);
        return al > tau ? -(l > 0 ? 1.0 : -1.0) / (2.0 * al * std::sqrt(al)) : 0.0;
    };
    const double scale = std::max(std::abs(es.values[0]), std::abs(es.values[D - 1])) + 1e-300;
    Mat<D> g{};
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
            double s = 0;
            for (int a = 0; a < D; ++a)
                for (int b = 0; b < D; ++b) s += es.vectors(a, i) * h(a, b) * es.vectors(b, j);
            const double li = es.values[i], lj = es.values[j];
            double dd;
            if (std::abs(li - lj) <= 1e-12 * scale) {
                dd = df(0.5 * (li + lj));
            } else {
                const double ri = std::max(std::abs(li), tau), rj = std::max(std::abs(lj), tau);
                const double si = std::sqrt(ri), sj = std::sqrt(rj);
                dd = -spectral_detail::dd_reg(li, lj, tau) / (si * sj * (si + sj));
            }
            g(i, j) = s * dd;
        }
    Mat<D> r{};
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
            double s = 0;
            for (int a = 0; a < D; ++a)
                for (int b = 0; b < D; ++b) s += es.vectors(i, a) * g(a, b) * es.vectors(j, b);
            r(i, j) = s;
        }
    return r;
}

// (M^{1/2}, M^{-1/2}) for symmetric positive definite M.
template <int D>
inline std::pair<Mat<D>, Mat<D>> spd_sqrt_pair(const Mat<D>& m) {
    double asym = 0;
    for (int i = 0; i < D; ++i)
        for (int j = i + 1; j < D; ++j) asym = std::max(asym, std::abs(m(i, j) - m(j, i)));
    const double scale = frob_norm(m) + 1e-300;
    if (asym > 1e-9 * scale) throw NotSPD("spd_sqrt_pair: matrix not symmetric");
    const auto es = sym_eigen(m);
    if (es.values[0] <= 0.0) throw NotSPD("spd_sqrt_pair: nonpositive eigenvalue");
    auto sq = spectral_apply(es, [](double l) { return std::sqrt(l); });
    auto isq = spectral_apply(es, [](double l) { return 1.0 / std::sqrt(l); });
    return {sq, isq};
}

namespace detail {
inline Mat<2> rotation_to_impl(const Vec<2>& e) {
    // closed form; handles the antipode too since -1 is in SO(2)
    Mat<2> q;
    q(0, 0) = e[1];
    q(0, 1) = e[0];
    q(1, 0) = -e[0];
    q(1, 1) = e[1];
    return q;
}

inline Mat<3> rotation_to_impl(const Vec<3>& e) {
    const Vec<3> ed = Vec<3>::axis(2);
    const double c = dot(ed, e);
    if (c <= -1.0 + 1e-8) {
        // fixed flip representative for the antipode
        Mat<3> q{};
        q(0, 0) = 1.0;
        q(1, 1) = -1.0;
        q(2, 2) = -1.0;
        return q;
    }
    // quaternion (1+c, e_d x e), normalized; the resulting matrix stays
    // orthogonal to machine precision even close to the antipode
    const Vec<3> v = cross(ed, e);
    double qw = 1.0 + c, qx = v[0], qy = v[1], qz = v[2];
    const double qn = std::sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
    qw /= qn;
    qx /= qn;
    qy /= qn;
    qz /= qn;
    Mat<3> r;
    r(0, 0) = 1.0 - 2.0 * (qy * qy + qz * qz);
    r(0, 1) = 2.0 * (qx * qy - qw * qz);
    r(0, 2) = 2.0 * (qx * qz + qw * qy);
    r(1, 0) = 2.0 * (qx * qy + qw * qz);
    r(1, 1) = 1.0 - 2.0 * (qx * qx + qz * qz);
    r(1, 2) = 2.0 * (qy * qz - qw * qx);
    r(2, 0) = 2.0 * (qx * qz - qw * qy);
    r(2, 1) = 2.0 * (qy * qz + qw * qx);
    r(2, 2) = 1.0 - 2.0 * (qx * qx + qy * qy);
    return r;
}
} // namespace detail

// Proper rotation Q with Q e_D = e; only Q e_D = e, Q^T Q = 1, det Q = 1 are contractual.
template <int D>
inline Mat<D> rotation_to(const Vec<D>& e) {
    if (std::abs(norm(e) - 1.0) > 1e-10) throw NotUnit("rotation_to: input not unit");
    return detail::rotation_to_impl(e);
}

} // namespace shellmatch

#endif
