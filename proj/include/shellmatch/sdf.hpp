#ifndef SHELLMATCH_SDF_HPP
#define SHELLMATCH_SDF_HPP

// Signed distance fields on a fine uniform lattice over (0,1)^D, built from a
// DiscreteShape by exact near-band initialization plus first-order upwind fast
// marching. Exposes the geometric fields the energies need: d, n = grad d,
// the Hessian, the regularized shape operator S and curvature K.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <vector>

#include "shellmatch/parallel.hpp"
#include "shellmatch/shape.hpp"
#include "shellmatch/tensor.hpp"

namespace shellmatch {

template <int D>
struct GeometrySample {
    double d = 0;       // signed distance, multilinear interpolation
    Vec<D> n{};         // unit normal of the offset level set
    Mat<D> hessian{};   // tangentially projected Hessian of d
    Mat<D> s{};         // reg_abs(hessian + n (x) n, tau), SPD
    double k = 0;       // n^T cof(S) n, regularized Gaussian curvature
};

// Evaluation with the spatial derivatives the energy gradient needs.
template <int D>
struct GeometryJet {
    double d = 0;
    Vec<D> grad_d{};                // exact gradient of the d-interpolant
    Vec<D> n{};
    Mat<D> dn{};                    // dn(i,j) = d n_i / d y_j
    Mat<D> proj{};                  // 1 - n (x) n
    bool with_shape_operator = false;
    Mat<D> s_arg{};                 // P H P + n (x) n
    std::array<Mat<D>, D> ds_arg{}; // spatial derivative of s_arg per axis
    SymEigen<D> es{};               // eigensystem of s_arg
};

namespace sdf_detail {

inline double dist_point_segment(const Vec<2>& p, const Vec<2>& a, const Vec<2>& b) {
    const Vec<2> ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return norm(p - (a + t * ab));
}

// closest-point distance to a triangle (Ericson, Real-Time Collision Detection)
inline double dist_point_triangle(const Vec<3>& p, const Vec<3>& a, const Vec<3>& b, const Vec<3>& c) {
    const Vec<3> ab = b - a, ac = c - a, ap = p - a;
    const double d1 = dot(ab, ap), d2 = dot(ac, ap);
    if (d1 <= 0 && d2 <= 0) return norm(p - a);
    const Vec<3> bp = p - b;
    const double d3 = dot(ab, bp), d4 = dot(ac, bp);
    if (d3 >= 0 && d4 <= d3) return norm(p - b);
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        const double v = d1 / (d1 - d3);
        return norm(p - (a + v * ab));
    }
    const Vec<3> cp = p - c;
    const double d5 = dot(ab, cp), d6 = dot(ac, cp);
    if (d6 >= 0 && d5 <= d6) return norm(p - c);
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        const double w = d2 / (d2 - d6);
        return norm(p - (a + w * ac));
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return norm(p - (b + w * (c - b)));
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return norm(p - (a + v * ab + w * ac));
}

} // namespace sdf_detail

template <int D>
class SignedShape {
  public:
    SignedShape() = default;

    int nodes_per_axis() const { return n_; }
    double spacing() const { return h_; }
    const DiscreteShape<D>& shape() const { return shape_; }
    const std::vector<double>& values() const { return values_; }

    std::size_t index(const std::array<int, D>& c) const {
        std::size_t idx = c[D - 1];
        for (int k = D - 2; k >= 0; --k) idx = idx * n_ + c[k];
        return idx;
    }

    double value_at_node(const std::array<int, D>& c) const { return values_[index(c)]; }

    // multilinear interpolation of d (x clamped into the lattice)
    double distance(const Vec<D>& x) const {
        double v, unused_grad[D];
        interp_scalar(x, v, unused_grad);
        return v;
    }

    GeometrySample<D> eval_geometry(const Vec<D>& x, double tau) const {
        const GeometryJet<D> jet = eval_geometry_jet(x, tau, true);
        GeometrySample<D> g;
        g.d = jet.d;
        g.n = jet.n;
        g.hessian = jet.s_arg - outer(jet.n, jet.n);
        g.s = spectral_apply(jet.es, [tau](double l) { return std::max(std::abs(l), tau); });
        g.k = dot(jet.n, cofactor(g.s) * jet.n);
        return g;
    }

    GeometryJet<D> eval_geometry_jet(const Vec<D>& x, double tau, bool with_shape_operator) const {
        (void)tau;
        for (int k = 0; k < D; ++k)
            if (x[k] < -1e-9 || x[k] > 1.0 + 1e-9) throw OutsideEvaluable("geometry query outside [0,1]^d");
        GeometryJet<D> jet;
        double gv[D];
        interp_scalar(x, jet.d, gv);
        for (int k = 0; k < D; ++k) jet.grad_d[k] = gv[k];
        // normal from the sampled gradient field
        Vec<D> g;
        Mat<D> dg;
        interp_vector(x, grad_, g, dg);
        const double gn = std::max(norm(g), 1e-12);
        jet.n = g * (1.0 / gn);
        jet.dn = (Mat<D>::identity() - outer(jet.n, jet.n)) * dg * (1.0 / gn);
        jet.proj = projection(jet.n);
        if (!with_shape_operator) return jet;

        jet.with_shape_operator = true;
        Mat<D> hess;
        std::array<Mat<D>, D> dhess;
        interp_hessian(x, hess, dhess);
        // project so n is an exact eigenvector of s_arg (unit eigenvalue)
        const Mat<D>& p = jet.proj;
        jet.s_arg = p * hess * p + outer(jet.n, jet.n);
        jet.s_arg = 0.5 * (jet.s_arg + transpose(jet.s_arg));
        for (int k = 0; k < D; ++k) {
            Vec<D> ck;
            for (int i = 0; i < D; ++i) ck[i] = jet.dn(i, k);
            const Mat<D> dp = -(outer(ck, jet.n) + outer(jet.n, ck));
            Mat<D> ds = dp * hess * p + p * dhess[k] * p + p * hess * dp + outer(ck, jet.n) + outer(jet.n, ck);
            jet.ds_arg[k] = 0.5 * (ds + transpose(ds));
        }
        jet.es = sym_eigen(jet.s_arg);
        return jet;
    }

    // r per shape: 1 / sup |D^2 d|_F over lattice nodes with |d| <= h
    double hessian_sup_near_zero_level() const {
        double sup = 0;
        const std::size_t total = values_.size();
        for (std::size_t i = 0; i < total; ++i) {
            if (std::abs(values_[i]) > h_) continue;
            Mat<D> hess = unpack_hessian(i);
            sup = std::max(sup, frob_norm(hess));
        }
        return sup;
    }

    static SignedShape fast_march(const DiscreteShape<D>& shape, double h_sdf, double exact_band);

  private:
    int n_ = 0;     // nodes per axis
    double h_ = 0;  // lattice spacing
    DiscreteShape<D> shape_;
    std::vector<double> values_;                              // signed distance
    std::vector<Vec<D>> grad_;                                // central-difference gradient field
    std::vector<std::array<double, D*(D + 1) / 2>> hess_;     // packed symmetric Hessian field

    static int pack_index(int i, int j) {
        if (i > j) std::swap(i, j);
        if constexpr (D == 2) return i == 0 ? (j == 0 ? 0 : 1) : 2; // 00,01,11
        return i == 0 ? j : (i == 1 ? 2 + j : 5);                   // 00,01,02,11,12,22
    }

    Mat<D> unpack_hessian(std::size_t idx) const {
        Mat<D> m;
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j) m(i, j) = hess_[idx][pack_index(i, j)];
        return m;
    }

    struct CellRef {
        std::array<int, D> c;
        std::array<double, D> t;
    };

    CellRef locate_cell(const Vec<D>& x) const {
        CellRef r;
        for (int k = 0; k < D; ++k) {
            const double xi = std::clamp(x[k], 0.0, 1.0);
            int c = int(std::floor(xi / h_));
            c = std::clamp(c, 0, n_ - 2);
            r.c[k] = c;
            r.t[k] = std::clamp(xi / h_ - c, 0.0, 1.0);
        }
        return r;
    }

    // multilinear value + exact interpolant gradient of the scalar field
    void interp_scalar(const Vec<D>& x, double& val, double grad[D]) const {
        const CellRef cr = locate_cell(x);
        val = 0;
        for (int k = 0; k < D; ++k) grad[k] = 0;
        for (int corner = 0; corner < (1 << D); ++corner) {
            std::array<int, D> c = cr.c;
            double w = 1.0;
            for (int k = 0; k < D; ++k)
                if (corner & (1 << k)) {
                    c[k] += 1;
                    w *= cr.t[k];
                } else {
                    w *= 1.0 - cr.t[k];
                }
            const double f = values_[index(c)];
            val += w * f;
            for (int k = 0; k < D; ++k) {
                double dw = 1.0;
                for (int l = 0; l < D; ++l) {
                    if (l == k) continue;
                    dw *= (corner & (1 << l)) ? cr.t[l] : 1.0 - cr.t[l];
                }
                grad[k] += ((corner & (1 << k)) ? 1.0 : -1.0) / h_ * dw * f;
            }
        }
    }

    void interp_vector(const Vec<D>& x, const std::vector<Vec<D>>& field, Vec<D>& val, Mat<D>& jac) const {
        const CellRef cr = locate_cell(x);
        val = Vec<D>{};
        jac = Mat<D>{};
        for (int corner = 0; corner < (1 << D); ++corner) {
            std::array<int, D> c = cr.c;
            double w = 1.0;
            for (int k = 0; k < D; ++k)
                if (corner & (1 << k)) {
                    c[k] += 1;
                    w *= cr.t[k];
                } else {
                    w *= 1.0 - cr.t[k];
                }
            const Vec<D>& f = field[index(c)];
            val += w * f;
            for (int k = 0; k < D; ++k) {
                double dw = 1.0;
                for (int l = 0; l < D; ++l) {
                    if (l == k) continue;
                    dw *= (corner & (1 << l)) ? cr.t[l] : 1.0 - cr.t[l];
                }
                const double s = ((corner & (1 << k)) ? 1.0 : -1.0) / h_ * dw;
                for (int i = 0; i < D; ++i) jac(i, k) += s * f[i];
            }
        }
    }

    void interp_hessian(const Vec<D>& x, Mat<D>& val, std::array<Mat<D>, D>& der) const {
        const CellRef cr = locate_cell(x);
        val = Mat<D>{};
        for (int k = 0; k < D; ++k) der[k] = Mat<D>{};
        for (int corner = 0; corner < (1 << D); ++corner) {
            std::array<int, D> c = cr.c;
            double w = 1.0;
            for (int k = 0; k < D; ++k)
                if (corner & (1 << k)) {
                    c[k] += 1;
                    w *= cr.t[k];
                } else {
                    w *= 1.0 - cr.t[k];
                }
            const Mat<D> f = unpack_hessian(index(c));
            val += w * f;
            for (int k = 0; k < D; ++k) {
                double dw = 1.0;
                for (int l = 0; l < D; ++l) {
                    if (l == k) continue;
                    dw *= (corner & (1 << l)) ? cr.t[l] : 1.0 - cr.t[l];
                }
                der[k] += (((corner & (1 << k)) ? 1.0 : -1.0) / h_ * dw) * f;
            }
        }
    }

    void build_fields();
    void compute_signs();
};

// exact_band: half-width of the region initialized with exact point-to-element
// distances (the narrow-band coefficients need second derivatives there, which
// the first-order march cannot deliver). Defaults to max(4h, 0.1).
template <int D>
SignedShape<D> fast_march_sdf(const DiscreteShape<D>& shape, double h_sdf, double exact_band = -1.0) {
    if (exact_band <= 0.0) exact_band = std::max(4.0 * h_sdf, 0.1);
    return SignedShape<D>::fast_march(shape, h_sdf, exact_band);
}

// r_I = min over the two fields of 1 / sup |D^2 d| near the zero level.
template <int D>
double injectivity_radius(const SignedShape<D>& s1, const SignedShape<D>& s2) {
    const double sup = std::max(s1.hessian_sup_near_zero_level(), s2.hessian_sup_near_zero_level());
    return 1.0 / std::max(sup, 1e-12);
}

// ---- fast marching implementation ----

template <int D>
SignedShape<D> SignedShape<D>::fast_march(const DiscreteShape<D>& shape, double h_sdf, double exact_band) {
    SignedShape<D> s;
    const int level = int(std::lround(-std::log2(h_sdf)));
    if (std::abs(std::ldexp(1.0, -level) - h_sdf) > 1e-14 || level < 1)
        throw std::invalid_argument("h_sdf must be a dyadic fraction of 1");
    s.h_ = h_sdf;
    s.n_ = (1 << level) + 1;
    s.shape_ = shape;

    const int n = s.n_;
    const double h = s.h_;
    std::size_t total = 1;
    for (int k = 0; k < D; ++k) total *= n;

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double>& dist = s.values_;
    dist.assign(total, inf);
    const double seed_radius = std::max(exact_band, 2.0 * h) + h;

    // exact point-to-element distances near each element
    for (const auto& el : shape.elements) {
        Vec<D> lo = shape.vertices[el[0]], hi = lo;
        for (int v : el)
            for (int k = 0; k < D; ++k) {
                lo[k] = std::min(lo[k], shape.vertices[v][k]);
                hi[k] = std::max(hi[k], shape.vertices[v][k]);
            }
        std::array<int, D> ilo, ihi;
        for (int k = 0; k < D; ++k) {
            ilo[k] = std::max(0, int(std::floor((lo[k] - seed_radius) / h)));
            ihi[k] = std::min(n - 1, int(std::ceil((hi[k] + seed_radius) / h)));
        }
        std::array<int, D> c = ilo;
        for (;;) {
            Vec<D> p;
            for (int k = 0; k < D; ++k) p[k] = c[k] * h;
            double dd;
            if constexpr (D == 2)
                dd = sdf_detail::dist_point_segment(p, shape.vertices[el[0]], shape.vertices[el[1]]);
            else
                dd = sdf_detail::dist_point_triangle(p, shape.vertices[el[0]], shape.vertices[el[1]],
                                                     shape.vertices[el[2]]);
            std::size_t idx = s.index(c);
            dist[idx] = std::min(dist[idx], dd);
            int k = 0;
            while (k < D && ++c[k] > ihi[k]) {
                c[k] = ilo[k];
                ++k;
            }
            if (k == D) break;
        }
    }

    // keep only seeds within the exact band; march the rest
    enum : uint8_t { FAR = 0, NARROW = 1, DONE = 2 };
    std::vector<uint8_t> state(total, FAR);
    std::vector<uint8_t> frozen(total, 0); // exact seeds are never overwritten
    using HeapItem = std::pair<double, std::size_t>;
    std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<>> heap;
    for (std::size_t i = 0; i < total; ++i) {
        if (dist[i] <= seed_radius) {
            state[i] = NARROW;
            frozen[i] = 1;
            heap.push({dist[i], i});
        } else {
            dist[i] = inf;
        }
    }

    auto decode = [&](std::size_t idx, std::array<int, D>& c) {
        for (int k = 0; k < D; ++k) {
            c[k] = int(idx % n);
            idx /= n;
        }
    };

    auto solve_upwind = [&](const std::array<int, D>& c) -> double {
        std::array<double, D> a;
        int m = 0;
        for (int k = 0; k < D; ++k) {
            double best = inf;
            std::array<int, D> nb = c;
            if (c[k] > 0) {
                nb[k] = c[k] - 1;
                const std::size_t j = s.index(nb);
                if (state[j] == DONE) best = std::min(best, dist[j]);
            }
            if (c[k] < n - 1) {
                nb[k] = c[k] + 1;
                const std::size_t j = s.index(nb);
                if (state[j] == DONE) best = std::min(best, dist[j]);
            }
            if (best < inf) a[m++] = best;
        }
        if (m == 0) return inf;
        std::sort(a.begin(), a.begin() + m);
        double t = a[0] + h;
        for (int terms = 2; terms <= m; ++terms) {
            if (t <= a[terms - 1]) break;
            double sum = 0, sq = 0;
            for (int k = 0; k < terms; ++k) {
                sum += a[k];
                sq += a[k] * a[k];
            }
            const double disc = sum * sum - terms * (sq - h * h);
            if (disc < 0) break;
            t = (sum + std::sqrt(disc)) / terms;
        }
        return t;
    };

    while (!heap.empty()) {
        const auto [v, idx] = heap.top();
        heap.pop();
        if (state[idx] == DONE) continue;
        state[idx] = DONE;
        std::array<int, D> c;
        decode(idx, c);
        for (int k = 0; k < D; ++k)
            for (int dir : {-1, 1}) {
                std::array<int, D> nb = c;
                nb[k] += dir;
                if (nb[k] < 0 || nb[k] >= n) continue;
                const std::size_t j = s.index(nb);
                if (state[j] == DONE || frozen[j]) continue;
                const double t = solve_upwind(nb);
                if (t < dist[j]) {
                    dist[j] = t;
                    state[j] = NARROW;
                    heap.push({t, j});
                }
            }
    }

    s.compute_signs();
    s.build_fields();
    return s;
}

template <>
inline void SignedShape<2>::compute_signs() {
    const int n = n_;
    const double h = h_;
    // even-odd ray casting per lattice row
    for (int j = 0; j < n; ++j) {
        const double y = j * h;
        std::vector<double> crossings;
        for (const auto& el : shape_.elements) {
            const Vec<2>& a = shape_.vertices[el[0]];
            const Vec<2>& b = shape_.vertices[el[1]];
            if ((a[1] <= y) == (b[1] <= y)) continue;
            crossings.push_back(a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
        }
        std::sort(crossings.begin(), crossings.end());
        for (int i = 0; i < n; ++i) {
            const double x = i * h;
            const std::size_t cnt = std::upper_bound(crossings.begin(), crossings.end(), x) - crossings.begin();
            if (cnt % 2 == 1) values_[index({i, j})] = -values_[index({i, j})];
        }
    }
}

template <>
inline void SignedShape<3>::compute_signs() {
    const int n = n_;
    const double h = h_;
    std::size_t total = std::size_t(n) * n * n;

    auto winding = [&](const Vec<3>& p) {
        double w = 0;
        for (const auto& el : shape_.elements) {
            const Vec<3> a = shape_.vertices[el[0]] - p;
            const Vec<3> b = shape_.vertices[el[1]] - p;
            const Vec<3> c = shape_.vertices[el[2]] - p;
            const double la = norm(a), lb = norm(b), lc = norm(c);
            const double num = dot(a, cross(b, c));
            const double den = la * lb * lc + dot(a, b) * lc + dot(b, c) * la + dot(c, a) * lb;
            w += 2.0 * std::atan2(num, den);
        }
        return w / (4.0 * 3.14159265358979323846);
    };

    // nodes adjacent to the surface form a barrier (any edge crossing the
    // surface has both endpoints within h of it); winding number there,
    // constant-sign flood fill on the rest
    const double band = 2.0 * h;
    std::vector<int8_t> sign(total, 0);
    std::vector<std::size_t> band_nodes;
    for (std::size_t i = 0; i < total; ++i)
        if (values_[i] <= band) band_nodes.push_back(i);

    std::vector<int8_t> band_sign(band_nodes.size(), 1);
    parallel_chunks(band_nodes.size(), 2048, [&](std::size_t b, std::size_t e, std::size_t) {
        for (std::size_t q = b; q < e; ++q) {
            std::size_t idx = band_nodes[q];
            std::array<int, 3> c;
            std::size_t rest = idx;
            for (int k = 0; k < 3; ++k) {
                c[k] = int(rest % n);
                rest /= n;
            }
            const Vec<3> p{{c[0] * h, c[1] * h, c[2] * h}};
            band_sign[q] = std::abs(winding(p)) > 0.5 ? -1 : 1;
        }
    });
    for (std::size_t q = 0; q < band_nodes.size(); ++q) sign[band_nodes[q]] = band_sign[q];

    // BFS components of the far field; shapes are strictly interior, so the
    // domain corner is outside; other enclosed components get one winding probe
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < total; ++start) {
        if (sign[start] != 0) continue;
        std::array<int, 3> c0;
        std::size_t rest = start;
        for (int k = 0; k < 3; ++k) {
            c0[k] = int(rest % n);
            rest /= n;
        }
        int8_t comp_sign;
        if (start == 0) {
            comp_sign = 1;
        } else {
            const Vec<3> p{{c0[0] * h, c0[1] * h, c0[2] * h}};
            comp_sign = std::abs(winding(p)) > 0.5 ? -1 : 1;
        }
        stack.push_back(start);
        sign[start] = comp_sign;
        while (!stack.empty()) {
            const std::size_t idx = stack.back();
            stack.pop_back();
            std::array<int, 3> c;
            rest = idx;
            for (int k = 0; k < 3; ++k) {
                c[k] = int(rest % n);
                rest /= n;
            }
            for (int k = 0; k < 3; ++k)
                for (int dir : {-1, 1}) {
                    std::array<int, 3> nb = c;
                    nb[k] += dir;
                    if (nb[k] < 0 || nb[k] >= n) continue;
                    const std::size_t j = index(nb);
                    if (sign[j] != 0 || values_[j] <= band) continue;
                    sign[j] = comp_sign;
                    stack.push_back(j);
                }
        }
    }
    for (std::size_t i = 0; i < total; ++i)
        if (sign[i] < 0) values_[i] = -values_[i];
}

template <int D>
void SignedShape<D>::build_fields() {
    const int n = n_;
    const double h = h_;
    std::size_t total = values_.size();
    grad_.assign(total, Vec<D>{});
    hess_.assign(total, {});

    auto value_at = [&](std::array<int, D> c) {
        for (int k = 0; k < D; ++k) c[k] = std::clamp(c[k], 0, n - 1);
        return values_[index(c)];
    };

    parallel_chunks(total, 1 << 16, [&](std::size_t b, std::size_t e, std::size_t) {
        for (std::size_t idx = b; idx < e; ++idx) {
            std::array<int, D> c;
            std::size_t rest = idx;
            for (int k = 0; k < D; ++k) {
                c[k] = int(rest % n);
                rest /= n;
            }
            // clamp stencils toward the interior at the domain boundary
            std::array<int, D> cc = c;
            for (int k = 0; k < D; ++k) cc[k] = std::clamp(c[k], 1, n - 2);
            for (int k = 0; k < D; ++k) {
                std::array<int, D> cp = cc, cm = cc;
                cp[k] += 1;
                cm[k] -= 1;
                grad_[idx][k] = (value_at(cp) - value_at(cm)) / (2.0 * h);
                hess_[idx][pack_index(k, k)] = (value_at(cp) - 2.0 * value_at(cc) + value_at(cm)) / (h * h);
            }
            for (int a = 0; a < D; ++a)
                for (int bx = a + 1; bx < D; ++bx) {
                    std::array<int, D> cpp = cc, cpm = cc, cmp = cc, cmm = cc;
                    cpp[a] += 1;
                    cpp[bx] += 1;
                    cpm[a] += 1;
                    cpm[bx] -= 1;
                    cmp[a] -= 1;
                    cmp[bx] += 1;
                    cmm[a] -= 1;
                    cmm[bx] -= 1;
                    hess_[idx][pack_index(a, bx)] =
                        (value_at(cpp) - value_at(cpm) - value_at(cmp) + value_at(cmm)) / (4.0 * h * h);
                }
        }
    });
}

} // namespace shellmatch

#endif
