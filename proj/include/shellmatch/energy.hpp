#ifndef SHELLMATCH_ENERGY_HPP
#define SHELLMATCH_ENERGY_HPP

// Narrow-band shell matching energies on the adaptive simplicial grid.
// Symmetric mode integrates every inverse-deformation term in the reference
// configuration via cof(Dphi)^T / det(Dphi); direct mode drops the inverse
// contributions; comparison mode swaps the volume density.
// Gradients are exact derivatives of the discrete energy: every phi-dependent
// coefficient (d_2, n_2, the interpolated Hessian entering S_2) is chained
// through, with spectral derivatives for the eigenvalue maps.

#include <limits>
#include <optional>
#include <vector>

#include "shellmatch/grid.hpp"
#include "shellmatch/parallel.hpp"
#include "shellmatch/sdf.hpp"
#include "shellmatch/stored_energy.hpp"
#include "shellmatch/tensor.hpp"

namespace shellmatch {

enum class EnergyMode { symmetric, direct, comparison };
enum class BumpKind { quartic_c1 };

struct EnergyParams {
    double c_match = 1.0, c_mem = 1.0, c_bend = 1.0, c_vol = 1.0;
    double sigma = 0.1;   // band half-width
    double q = 3.0;       // matching exponent (weight c_match / sigma^q)
    int theta = 1;        // volume scaling exponent in {0,1}
    double tau = 0.1;     // eigenvalue floor of the shape operator regularization
    EnergyMode mode = EnergyMode::symmetric;
    BumpKind eta = BumpKind::quartic_c1;
};

struct EnergyBreakdown {
    double match = 0, mem = 0, bend = 0, vol = 0, total = 0;
    double min_det = std::numeric_limits<double>::infinity();
    bool feasible = true; // min_det > 0; term values are unset otherwise
};

// C^1 quartic bump, supp = [-1,1], unit integral: eta(t) = (15/16)(1-t^2)^2.
inline double eta_sigma(double s, double sigma) {
    const double t = s / sigma;
    if (t <= -1.0 || t >= 1.0) return 0.0;
    const double u = 1.0 - t * t;
    return (15.0 / 16.0) * u * u / sigma;
}

// d/ds of eta_sigma
inline double eta_sigma_prime(double s, double sigma) {
    const double t = s / sigma;
    if (t <= -1.0 || t >= 1.0) return 0.0;
    return -(15.0 / 4.0) * t * (1.0 - t * t) / (sigma * sigma);
}

// projected tangential derivative P_2 Dphi P_1 + n_2 (x) n_1
template <int D>
Mat<D> d_tt(const Mat<D>& dphi, const GeometrySample<D>& g1, const GeometrySample<D>& g2) {
    return projection(g2.n) * dphi * projection(g1.n) + outer(g2.n, g1.n);
}

// classifier matrix P_2 N^{1/2} P_2 A P_1 M^{-1/2} P_1 + n_2 (x) n_1
template <int D>
Mat<D> classifier(const Mat<D>& m, const Mat<D>& n, const Mat<D>& a, const Vec<D>& n1, const Vec<D>& n2) {
    const auto [msq, misq] = spd_sqrt_pair(m);
    (void)msq;
    const auto [nsq, nisq] = spd_sqrt_pair(n);
    (void)nisq;
    const Mat<D> p1 = projection(n1), p2 = projection(n2);
    return p2 * nsq * p2 * a * p1 * misq * p1 + outer(n2, n1);
}

// P_1 (cof A^T / det A) P_2 + n_1 (x) n_2; det equals (n_2^T A n_1)/det A
template <int D>
Mat<D> inverse_projected_block(const Mat<D>& a, const GeometrySample<D>& g1, const GeometrySample<D>& g2) {
    const double dt = det(a);
    if (dt <= 0.0) throw NonpositiveDeterminant("inverse_projected_block: det A <= 0");
    const Mat<D> b = transpose(cofactor(a)) * (1.0 / dt);
    return projection(g1.n) * b * projection(g2.n) + outer(g1.n, g2.n);
}

// order-2 quadrature on the reference simplex (barycentric points, unit weights)
template <int D>
struct SimplexQuadrature;

template <>
struct SimplexQuadrature<2> {
    static constexpr int n = 3;
    static constexpr std::array<std::array<double, 3>, 3> bary = {{
        {{0.5, 0.5, 0.0}},
        {{0.0, 0.5, 0.5}},
        {{0.5, 0.0, 0.5}},
    }};
    static constexpr std::array<double, 3> weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
};

template <>
struct SimplexQuadrature<3> {
    static constexpr int n = 4;
    static constexpr double qa = 0.585410196624968515;
    static constexpr double qb = 0.138196601125010504;
    static constexpr std::array<std::array<double, 4>, 4> bary = {{
        {{qa, qb, qb, qb}},
        {{qb, qa, qb, qb}},
        {{qb, qb, qa, qb}},
        {{qb, qb, qb, qa}},
    }};
    static constexpr std::array<double, 4> weights = {0.25, 0.25, 0.25, 0.25};
};

template <int D>
class EnergyAssembler {
  public:
    EnergyAssembler(std::shared_ptr<const AdaptiveGrid<D>> grid, const SignedShape<D>& s1, const SignedShape<D>& s2,
                    const EnergyParams& params)
        : grid_(std::move(grid)), s1_(&s1), s2_(&s2), params_(params) {
        build_cache();
    }

    const EnergyParams& params() const { return params_; }
    const AdaptiveGrid<D>& grid() const { return *grid_; }

    EnergyBreakdown energy(const Deformation<D>& phi) const { return run(phi, nullptr); }

    EnergyBreakdown energy_and_gradient(const Deformation<D>& phi, std::vector<double>& grad) const {
        grad.assign(std::size_t(grid_->num_dofs()) * D, 0.0);
        return run(phi, &grad);
    }

  private:
    static constexpr int NQ = SimplexQuadrature<D>::n;

    struct SideCache { // shape-1 data at one quadrature point (x is fixed)
        double d = 0;
        Vec<D> n{};
        Mat<D> proj{};
        Mat<D> sq{};  // S^{1/2}
        Mat<D> isq{}; // S^{-1/2}
    };

    std::shared_ptr<const AdaptiveGrid<D>> grid_;
    const SignedShape<D>* s1_;
    const SignedShape<D>* s2_;
    EnergyParams params_;

    std::vector<Vec<D>> qpt_pos_;      // simplex-major quadrature positions
    std::vector<SideCache> side1_;     // same layout
    std::vector<double> d1_vertex_;    // |d_1| prefilter data per vertex

    void build_cache() {
        const auto& g = *grid_;
        const int ns = int(g.simplices.size());
        qpt_pos_.resize(std::size_t(ns) * NQ);
        side1_.resize(std::size_t(ns) * NQ);
        const bool need_shape_op = params_.c_bend != 0.0;
        parallel_chunks(ns, 256, [&](std::size_t b, std::size_t e, std::size_t) {
            for (std::size_t si = b; si < e; ++si) {
                const auto& s = g.simplices[si];
                for (int qi = 0; qi < NQ; ++qi) {
                    Vec<D> x{};
                    for (int i = 0; i <= D; ++i)
                        x += SimplexQuadrature<D>::bary[qi][i] * g.vertex_pos[s.verts[i]];
                    qpt_pos_[si * NQ + qi] = x;
                    SideCache& c = side1_[si * NQ + qi];
                    const auto jet = s1_->eval_geometry_jet(x, params_.tau, need_shape_op);
                    c.d = jet.d;
                    c.n = jet.n;
                    c.proj = jet.proj;
                    if (need_shape_op) {
                        const double tau = params_.tau;
                        c.sq = spectral_apply(jet.es, [tau](double l) { return std::sqrt(std::max(std::abs(l), tau)); });
                        c.isq =
                            spectral_apply(jet.es, [tau](double l) { return 1.0 / std::sqrt(std::max(std::abs(l), tau)); });
                    }
                }
            }
        });
        d1_vertex_.resize(g.num_vertices());
        for (int v = 0; v < g.num_vertices(); ++v) d1_vertex_[v] = s1_->distance(g.vertex_pos[v]);
    }

    struct ChunkOut {
        double match = 0, mem = 0, bend = 0, vol = 0;
        double min_det = std::numeric_limits<double>::infinity();
        std::vector<std::pair<int, Vec<D>>> grad; // (vertex id, dE/dphi_vertex)
    };

    EnergyBreakdown run(const Deformation<D>& phi, std::vector<double>* grad) const {
        const auto& g = *grid_;
        const int ns = int(g.simplices.size());
        const std::size_t chunk = 256;
        const std::size_t n_chunks = (std::size_t(ns) + chunk - 1) / chunk;
        std::vector<ChunkOut> outs(n_chunks);

        // d_2(phi(v)) once per call, shared by the pullback prefilter
        std::vector<double> d2_def(g.num_vertices());
        parallel_chunks(g.num_vertices(), 4096, [&](std::size_t b, std::size_t e, std::size_t) {
            for (std::size_t v = b; v < e; ++v) d2_def[v] = s2_->distance(clamp_domain(phi.values[v]));
        });

        parallel_chunks(ns, chunk, [&](std::size_t b, std::size_t e, std::size_t ci) {
            ChunkOut& out = outs[ci];
            for (std::size_t si = b; si < e; ++si) element(phi, int(si), d2_def, out, grad != nullptr);
        });

        EnergyBreakdown sum;
        for (const auto& o : outs) sum.min_det = std::min(sum.min_det, o.min_det);
        sum.feasible = sum.min_det > 0.0;
        if (!sum.feasible) {
            sum.match = sum.mem = sum.bend = sum.vol = 0;
            sum.total = std::numeric_limits<double>::infinity();
            if (grad) grad->clear();
            return sum;
        }
        for (const auto& o : outs) { // fixed chunk order: bitwise reproducible
            sum.match += o.match;
            sum.mem += o.mem;
            sum.bend += o.bend;
            sum.vol += o.vol;
        }
        sum.total = sum.match + sum.mem + sum.bend + sum.vol;
        if (grad) {
            for (const auto& o : outs)
                for (const auto& [v, gv] : o.grad)
                    for (const auto& [m, w] : g.vertex_masters[v]) {
                        const int dof = g.dof_of_vertex[m];
                        if (dof < 0) continue;
                        for (int k = 0; k < D; ++k) (*grad)[std::size_t(dof) * D + k] += w * gv[k];
                    }
        }
        return sum;
    }

    static Vec<D> clamp_domain(Vec<D> y) {
        for (int k = 0; k < D; ++k) y[k] = std::clamp(y[k], 0.0, 1.0);
        return y;
    }

    void element(const Deformation<D>& phi, int si, const std::vector<double>& d2_def, ChunkOut& out,
                 bool want_grad) const {
        const auto& g = *grid_;
        const auto& s = g.simplices[si];
        const double sigma = params_.sigma;
        const EnergyMode mode = params_.mode;
        const double cm_s = params_.c_match / std::pow(sigma, params_.q);
        const double cv = params_.c_vol * (params_.theta == 1 ? sigma : 1.0);

        const Mat<D> a = phi.jacobian(si);
        const double det_a = det(a);
        out.min_det = std::min(out.min_det, det_a);
        if (det_a <= 0.0) return;

        const double volume = s.volume;
        const Mat<D> cof_a = cofactor(a);
        const Mat<D> ainv = transpose(cof_a) * (1.0 / det_a);
        const Mat<D> ainv_t = transpose(ainv);

        std::array<Vec<D>, D + 1> node_grad{}; // dE/dphi per local vertex
        bool any_grad = false;

        // volume term: integrand constant per simplex
        if (params_.c_vol != 0.0) {
            double wvol;
            Mat<D> gvol{};
            if (mode == EnergyMode::comparison) {
                wvol = stored_energy_vol(a);
                if (want_grad) gvol = stored_energy_vol_grad(a);
            } else if (mode == EnergyMode::direct) {
                wvol = stored_energy(a);
                if (want_grad) gvol = stored_energy_grad(a);
            } else {
                wvol = stored_energy(a) + stored_energy_inverse_density(a);
                if (want_grad) gvol = stored_energy_grad(a) + stored_energy_inverse_density_grad(a);
            }
            out.vol += cv * wvol * volume;
            if (want_grad) {
                const Mat<D> gm = cv * volume * gvol;
                for (int i = 0; i <= D; ++i) node_grad[i] += gm * s.grad_bary[i];
                any_grad = true;
            }
        }

        // band prefilters (eta vanishes outside its support, so these only
        // skip work, never change values)
        const double h_cell = std::ldexp(1.0, -g.cells[s.leaf_cell].level);
        const double diam_ref = h_cell * std::sqrt(double(D));
        double min_d1 = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= D; ++i) min_d1 = std::min(min_d1, std::abs(d1_vertex_[s.verts[i]]));
        const bool direct_active = min_d1 <= sigma + diam_ref;

        bool inverse_active = false;
        if (mode == EnergyMode::symmetric) {
            double min_d2 = std::numeric_limits<double>::infinity();
            for (int i = 0; i <= D; ++i) min_d2 = std::min(min_d2, std::abs(d2_def[s.verts[i]]));
            double diam_def = 0;
            for (int i = 0; i <= D; ++i)
                for (int j = i + 1; j <= D; ++j)
                    diam_def = std::max(diam_def, norm(phi.values[s.verts[i]] - phi.values[s.verts[j]]));
            inverse_active = min_d2 <= sigma + diam_def;
        }

        if (!direct_active && !inverse_active) {
            if (any_grad) flush_grad(s, node_grad, out);
            return;
        }

        const bool need_bend = params_.c_bend != 0.0;
        const double tau = params_.tau;

        for (int qi = 0; qi < NQ; ++qi) {
            const std::size_t qidx = std::size_t(si) * NQ + qi;
            const SideCache& c1 = side1_[qidx];
            const double w = SimplexQuadrature<D>::weights[qi] * volume;

            Vec<D> y{};
            for (int i = 0; i <= D; ++i) y += SimplexQuadrature<D>::bary[qi][i] * phi.values[s.verts[i]];
            y = clamp_domain(y);

            const double eta1 = eta_sigma(c1.d, sigma);
            // cheap early-out: d_2 at y decides the inverse weight
            const double d2q = s2_->distance(y);
            const double eta2 = (mode == EnergyMode::symmetric) ? eta_sigma(d2q, sigma) : 0.0;
            if (eta1 == 0.0 && eta2 == 0.0) continue;

            const auto jet2 = s2_->eval_geometry_jet(y, tau, need_bend);
            const double e1 = c1.d, e2 = jet2.d;
            const Mat<D>& p1 = c1.proj;
            const Mat<D>& p2 = jet2.proj;
            const Vec<D>& n1 = c1.n;
            const Vec<D>& n2 = jet2.n;
            const double eta2p = (mode == EnergyMode::symmetric) ? eta_sigma_prime(e2, sigma) : 0.0;

            Mat<D> grad_a{}; // d(integrand)/dA, accumulated with weights
            Vec<D> grad_y{}; // d(integrand)/dy
            bool qpt_grad = false;

            // matching terms
            if (params_.c_match != 0.0) {
                const double diff = e2 - e1;
                const double sq = diff * diff;
                if (eta1 > 0.0) {
                    out.match += w * cm_s * eta1 * sq;
                    if (want_grad) {
                        grad_y += (cm_s * eta1 * 2.0 * diff) * jet2.grad_d;
                        qpt_grad = true;
                    }
                }
                if (eta2 > 0.0 || (want_grad && eta2p != 0.0)) {
                    out.match += w * cm_s * eta2 * det_a * sq;
                    if (want_grad) {
                        grad_a += (cm_s * eta2 * sq) * cof_a;
                        grad_y += (cm_s * det_a * (eta2p * sq + eta2 * 2.0 * diff)) * jet2.grad_d;
                        qpt_grad = true;
                    }
                }
            }

            // membrane terms
            if (params_.c_mem != 0.0) {
                if (eta1 > 0.0) {
                    const Mat<D> dtt = p2 * a * p1 + outer(n2, n1);
                    out.mem += w * params_.c_mem * eta1 * stored_energy(dtt);
                    if (want_grad) {
                        const Mat<D> gw = stored_energy_grad(dtt);
                        grad_a += (params_.c_mem * eta1) * (p2 * gw * p1);
                        for (int k = 0; k < D; ++k) {
                            Vec<D> ck;
                            for (int i = 0; i < D; ++i) ck[i] = jet2.dn(i, k);
                            const Mat<D> dp2 = -(outer(ck, n2) + outer(n2, ck));
                            grad_y[k] += params_.c_mem * eta1 * frob(gw, dp2 * a * p1 + outer(ck, n1));
                        }
                        qpt_grad = true;
                    }
                }
                if (eta2 > 0.0 || (want_grad && eta2p != 0.0)) {
                    const Mat<D> binv = p1 * ainv * p2 + outer(n1, n2);
                    const double wb = stored_energy(binv);
                    out.mem += w * params_.c_mem * eta2 * wb * det_a;
                    if (want_grad) {
                        const Mat<D> gw = stored_energy_grad(binv);
                        grad_a += params_.c_mem * eta2 *
                                  (-det_a * (ainv_t * (p1 * gw * p2) * ainv_t) + wb * cof_a);
                        for (int k = 0; k < D; ++k) {
                            Vec<D> ck;
                            for (int i = 0; i < D; ++i) ck[i] = jet2.dn(i, k);
                            const Mat<D> dp2 = -(outer(ck, n2) + outer(n2, ck));
                            grad_y[k] += params_.c_mem * det_a *
                                         (eta2p * jet2.grad_d[k] * wb +
                                          eta2 * frob(gw, p1 * ainv * dp2 + outer(n1, ck)));
                        }
                        qpt_grad = true;
                    }
                }
            }

            // bending terms
            if (need_bend) {
                const Mat<D> sq2 =
                    spectral_apply(jet2.es, [tau](double l) { return std::sqrt(std::max(std::abs(l), tau)); });
                const Mat<D> isq2 =
                    spectral_apply(jet2.es, [tau](double l) { return 1.0 / std::sqrt(std::max(std::abs(l), tau)); });

                if (eta1 > 0.0) {
                    const Mat<D> l2 = p2 * sq2 * p2;
                    const Mat<D> r1 = p1 * c1.isq * p1;
                    const Mat<D> lam = l2 * a * r1 + outer(n2, n1);
                    out.bend += w * params_.c_bend * eta1 * stored_energy(lam);
                    if (want_grad) {
                        const Mat<D> gw = stored_energy_grad(lam);
                        grad_a += (params_.c_bend * eta1) * (l2 * gw * r1);
                        for (int k = 0; k < D; ++k) {
                            Vec<D> ck;
                            for (int i = 0; i < D; ++i) ck[i] = jet2.dn(i, k);
                            const Mat<D> dp2 = -(outer(ck, n2) + outer(n2, ck));
                            const Mat<D> dsq2 = spectral_derivative_sqrt_reg(jet2.es, jet2.ds_arg[k], tau);
                            const Mat<D> dl2 = dp2 * sq2 * p2 + p2 * dsq2 * p2 + p2 * sq2 * dp2;
                            grad_y[k] += params_.c_bend * eta1 * frob(gw, dl2 * a * r1 + outer(ck, n1));
                        }
                        qpt_grad = true;
                    }
                }
                if (eta2 > 0.0 || (want_grad && eta2p != 0.0)) {
                    const Mat<D> l1 = p1 * c1.sq * p1;
                    const Mat<D> r2 = p2 * isq2 * p2;
                    const Mat<D> lam = l1 * ainv * r2 + outer(n1, n2);
                    const double wb = stored_energy(lam);
                    out.bend += w * params_.c_bend * eta2 * wb * det_a;
                    if (want_grad) {
                        const Mat<D> gw = stored_energy_grad(lam);
                        grad_a += params_.c_bend * eta2 *
                                  (-det_a * (ainv_t * (l1 * gw * r2) * ainv_t) + wb * cof_a);
                        for (int k = 0; k < D; ++k) {
                            Vec<D> ck;
                            for (int i = 0; i < D; ++i) ck[i] = jet2.dn(i, k);
                            const Mat<D> dp2 = -(outer(ck, n2) + outer(n2, ck));
                            const Mat<D> disq2 = spectral_derivative_invsqrt_reg(jet2.es, jet2.ds_arg[k], tau);
                            const Mat<D> dr2 = dp2 * isq2 * p2 + p2 * disq2 * p2 + p2 * isq2 * dp2;
                            grad_y[k] += params_.c_bend * det_a *
                                         (eta2p * jet2.grad_d[k] * wb + eta2 * frob(gw, l1 * ainv * dr2 + outer(n1, ck)));
                        }
                        qpt_grad = true;
                    }
                }
            }

            if (want_grad && qpt_grad) {
                for (int i = 0; i <= D; ++i) {
                    node_grad[i] += w * (grad_a * s.grad_bary[i]);
                    node_grad[i] += (w * SimplexQuadrature<D>::bary[qi][i]) * grad_y;
                }
                any_grad = true;
            }
        }

        if (any_grad) flush_grad(s, node_grad, out);
    }

    void flush_grad(const typename AdaptiveGrid<D>::Simplex& s, const std::array<Vec<D>, D + 1>& node_grad,
                    ChunkOut& out) const {
        for (int i = 0; i <= D; ++i) out.grad.emplace_back(s.verts[i], node_grad[i]);
    }
};

// one-shot wrappers
template <int D>
EnergyBreakdown assemble_energy(const Deformation<D>& phi, const SignedShape<D>& s1, const SignedShape<D>& s2,
                                const EnergyParams& params) {
    return EnergyAssembler<D>(phi.grid, s1, s2, params).energy(phi);
}

template <int D>
EnergyBreakdown assemble_gradient(const Deformation<D>& phi, const SignedShape<D>& s1, const SignedShape<D>& s2,
                                  const EnergyParams& params, std::vector<double>& grad) {
    return EnergyAssembler<D>(phi.grid, s1, s2, params).energy_and_gradient(phi, grad);
}

// Surface limit functional: membrane + bending integrands on the input
// hypersurface itself plus the bulk term, used as the Gamma-study oracle.
// Surface quadrature: 3-point Gauss per segment, edge midpoints per triangle.
template <int D>
double surface_limit_energy(const Deformation<D>& phi, const DiscreteShape<D>& shape1, const SignedShape<D>& s1,
                            const SignedShape<D>& s2, const EnergyParams& params) {
    double surf = 0;
    const double tau = params.tau;

    auto point_term = [&](const Vec<D>& x, double w) {
        const auto loc = phi.grid->locate(x);
        const Mat<D> a = phi.jacobian(loc.simplex);
        const auto g1 = s1.eval_geometry(x, tau);
        Vec<D> y{};
        const auto& sx = phi.grid->simplices[loc.simplex];
        for (int i = 0; i <= D; ++i) y += loc.bary[i] * phi.values[sx.verts[i]];
        for (int k = 0; k < D; ++k) y[k] = std::clamp(y[k], 0.0, 1.0);
        const auto g2 = s2.eval_geometry(y, tau);
        double val = params.c_mem * stored_energy(d_tt(a, g1, g2));
        if (params.c_bend != 0.0) val += params.c_bend * stored_energy(classifier(g1.s, g2.s, a, g1.n, g2.n));
        surf += w * val;
    };

    if constexpr (D == 2) {
        static const std::array<double, 3> gp = {0.5 - std::sqrt(0.15), 0.5, 0.5 + std::sqrt(0.15)};
        static const std::array<double, 3> gw = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
        for (const auto& el : shape1.elements) {
            const Vec<2>& a = shape1.vertices[el[0]];
            const Vec<2>& b = shape1.vertices[el[1]];
            const double len = norm(b - a);
            for (int k = 0; k < 3; ++k) point_term(a + gp[k] * (b - a), gw[k] * len);
        }
    } else {
        for (const auto& el : shape1.elements) {
            const Vec<3>& a = shape1.vertices[el[0]];
            const Vec<3>& b = shape1.vertices[el[1]];
            const Vec<3>& c = shape1.vertices[el[2]];
            const double area = 0.5 * norm(cross(b - a, c - a));
            point_term(0.5 * (a + b), area / 3.0);
            point_term(0.5 * (b + c), area / 3.0);
            point_term(0.5 * (c + a), area / 3.0);
        }
    }

    // bulk regularizer over the whole domain
    double bulk = 0;
    for (int si = 0; si < int(phi.grid->simplices.size()); ++si) {
        const Mat<D> a = phi.jacobian(si);
        bulk += params.c_vol * stored_energy(a) * phi.grid->simplices[si].volume;
    }
    return surf + bulk;
}

} // namespace shellmatch

#endif
