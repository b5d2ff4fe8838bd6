#ifndef SHELLMATCH_OPTIMIZE_HPP
#define SHELLMATCH_OPTIMIZE_HPP

// Multiscale first-order descent: Polak-Ribiere+ nonlinear conjugate gradient
// preconditioned with a weighted H^1 metric (M + alpha K on the free DOFs),
// Armijo backtracking that rejects infeasible (det <= 0) trial states, and
// prolongation of the iterate between levels with sigma = 2 h_level.

#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "shellmatch/energy.hpp"
#include "shellmatch/grid.hpp"

namespace shellmatch {

struct DescentConfig {
    int level_min = 4, level_max = 7;
    int max_iters_per_level = 500;
    double armijo_slope = 1e-4; // beta_a
    double backtrack = 0.5;     // rho
    double h1_weight = 1.0;     // alpha = h1_weight * h_level^2
    double grad_tol = 1e-6;      // relative to the first gradient norm per level
    double grad_tol_abs = 1e-12; // absolute floor so exact minima terminate
    int cg_restart = 50;
    int max_backtracks = 60;
};

struct EnergyRecord {
    int level = 0;
    int iteration = 0; // 0 = state at level entry
    EnergyBreakdown energy;
    double step = 0;
    double grad_norm = 0;
};

template <int D>
struct DescentState {
    int level = 0;
    Deformation<D> phi;
    std::vector<EnergyRecord> energy_history;
    std::vector<int> accepted_per_level;
    int iterations = 0;
    double last_step_size = 0;
    bool line_search_failed = false;
    std::vector<std::string> warnings;

    explicit DescentState(Deformation<D> p) : phi(std::move(p)) {}
};

// scalar FE operator M + alpha K on unconstrained DOFs, CSR storage
template <int D>
class H1Metric {
  public:
    H1Metric(const AdaptiveGrid<D>& grid, double alpha) : n_(grid.num_dofs()) {
        std::map<std::pair<int, int>, double> entries;
        const double mass_diag = 2.0 / ((D + 1.0) * (D + 2.0));
        const double mass_off = 1.0 / ((D + 1.0) * (D + 2.0));
        for (const auto& s : grid.simplices) {
            for (int i = 0; i <= D; ++i)
                for (int j = 0; j <= D; ++j) {
                    const double m = s.volume * (i == j ? mass_diag : mass_off);
                    const double k = s.volume * dot(s.grad_bary[i], s.grad_bary[j]);
                    const double val = m + alpha * k;
                    for (const auto& [vi, wi] : grid.vertex_masters[s.verts[i]]) {
                        const int di = grid.dof_of_vertex[vi];
                        if (di < 0) continue;
                        for (const auto& [vj, wj] : grid.vertex_masters[s.verts[j]]) {
                            const int dj = grid.dof_of_vertex[vj];
                            if (dj < 0) continue;
                            entries[{di, dj}] += wi * wj * val;
                        }
                    }
                }
        }
        row_start_.assign(n_ + 1, 0);
        for (const auto& [ij, v] : entries) row_start_[ij.first + 1]++;
        for (int i = 0; i < n_; ++i) row_start_[i + 1] += row_start_[i];
        cols_.resize(entries.size());
        vals_.resize(entries.size());
        std::vector<int> fill(row_start_.begin(), row_start_.end() - 1);
        for (const auto& [ij, v] : entries) {
            const int slot = fill[ij.first]++;
            cols_[slot] = ij.second;
            vals_[slot] = v;
        }
    }

    int size() const { return n_; }

    void matvec(const double* x, double* y) const {
        for (int i = 0; i < n_; ++i) {
            double acc = 0;
            for (int s = row_start_[i]; s < row_start_[i + 1]; ++s) acc += vals_[s] * x[cols_[s]];
            y[i] = acc;
        }
    }

    std::vector<std::vector<double>> to_dense() const {
        std::vector<std::vector<double>> a(n_, std::vector<double>(n_, 0.0));
        for (int i = 0; i < n_; ++i)
            for (int s = row_start_[i]; s < row_start_[i + 1]; ++s) a[i][cols_[s]] = vals_[s];
        return a;
    }

    // CG solve per component of the interleaved (dof x D) vector
    std::vector<double> apply_inverse(const std::vector<double>& g) const {
        std::vector<double> u(g.size(), 0.0);
        std::vector<double> rhs(n_), x(n_), r(n_), p(n_), ap(n_);
        for (int comp = 0; comp < D; ++comp) {
            double rhs_norm2 = 0;
            for (int i = 0; i < n_; ++i) {
                rhs[i] = g[std::size_t(i) * D + comp];
                rhs_norm2 += rhs[i] * rhs[i];
            }
            if (rhs_norm2 == 0.0) {
                for (int i = 0; i < n_; ++i) u[std::size_t(i) * D + comp] = 0.0;
                continue;
            }
            std::fill(x.begin(), x.end(), 0.0);
            r = rhs;
            p = r;
            double rr = rhs_norm2;
            const double tol2 = 1e-16 * rhs_norm2; // relative residual 1e-8
            const long max_iters = 10L * n_;
            long it = 0;
            while (rr > tol2) {
                if (++it > max_iters) throw SolverStall("h1_precondition: CG did not reach tolerance");
                matvec(p.data(), ap.data());
                double pap = 0;
                for (int i = 0; i < n_; ++i) pap += p[i] * ap[i];
                const double a = rr / pap;
                double rr_new = 0;
                for (int i = 0; i < n_; ++i) {
                    x[i] += a * p[i];
                    r[i] -= a * ap[i];
                    rr_new += r[i] * r[i];
                }
                const double beta = rr_new / rr;
                for (int i = 0; i < n_; ++i) p[i] = r[i] + beta * p[i];
                rr = rr_new;
            }
            for (int i = 0; i < n_; ++i) u[std::size_t(i) * D + comp] = x[i];
        }
        return u;
    }

  private:
    int n_;
    std::vector<int> row_start_;
    std::vector<int> cols_;
    std::vector<double> vals_;
};

// smoothed gradient representative: solves (M + alpha K) u = g
template <int D>
std::vector<double> h1_precondition(const std::vector<double>& g, const AdaptiveGrid<D>& grid, double alpha) {
    return H1Metric<D>(grid, alpha).apply_inverse(g);
}

// Largest step t0 rho^k with a feasible energy and Armijo decrease.
// slope = <g, direction> must be negative; zero slope returns step 0.
template <int D>
std::pair<double, Deformation<D>> armijo_search(const EnergyAssembler<D>& assembler, const Deformation<D>& phi,
                                                const std::vector<double>& direction, double slope,
                                                const EnergyBreakdown& e0, double t0, const DescentConfig& cfg,
                                                EnergyBreakdown* e_out = nullptr) {
    if (slope == 0.0) {
        if (e_out) *e_out = e0;
        return {0.0, phi};
    }
    if (slope > 0.0) throw std::invalid_argument("armijo_search: not a descent direction");
    const std::vector<double> u0 = phi.to_dofs();
    std::vector<double> u(u0.size());
    Deformation<D> trial(phi.grid);
    double t = t0;
    for (int k = 0; k < cfg.max_backtracks; ++k, t *= cfg.backtrack) {
        for (std::size_t i = 0; i < u0.size(); ++i) u[i] = u0[i] + t * direction[i];
        trial.from_dofs(u);
        const EnergyBreakdown e = assembler.energy(trial);
        if (!e.feasible) continue; // infeasible trials rejected like insufficient decrease
        if (e0.total - e.total >= cfg.armijo_slope * t * (-slope)) {
            if (e_out) *e_out = e;
            return {t, trial};
        }
    }
    throw LineSearchFailed("armijo_search: no acceptable step after " + std::to_string(cfg.max_backtracks) +
                           " backtracks");
}

// Descend on one grid with preconditioned PR+ nonlinear CG. Returns the number
// of accepted steps; appends history records.
template <int D>
int descend_level(const EnergyAssembler<D>& assembler, Deformation<D>& phi, const DescentConfig& cfg, int level,
                  std::vector<EnergyRecord>& history, double& last_step, bool& line_search_failed) {
    const auto& grid = assembler.grid();
    const double h_level = std::ldexp(1.0, -level);
    const H1Metric<D> metric(grid, cfg.h1_weight * h_level * h_level);

    std::vector<double> g;
    EnergyBreakdown e = assembler.energy_and_gradient(phi, g);
    if (!e.feasible) throw std::invalid_argument("descend_level: infeasible initial state");

    auto norm2 = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };

    double gn = norm2(g);
    history.push_back({level, 0, e, 0.0, gn});
    const double tol = std::max(cfg.grad_tol * gn, cfg.grad_tol_abs);
    if (gn <= tol) return 0;

    std::vector<double> u = metric.apply_inverse(g);
    std::vector<double> dir(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) dir[i] = -u[i];
    std::vector<double> g_prev, u_prev;
    double gu_prev = 0;
    {
        double gu = 0;
        for (std::size_t i = 0; i < u.size(); ++i) gu += g[i] * u[i];
        gu_prev = gu;
    }

    int accepted = 0;
    double t0 = last_step > 0 ? std::min(4.0, last_step / cfg.backtrack) : 1.0;
    for (int it = 1; it <= cfg.max_iters_per_level; ++it) {
        double slope = 0;
        for (std::size_t i = 0; i < g.size(); ++i) slope += g[i] * dir[i];
        if (slope >= 0.0) { // restart on a non-descent direction
            for (std::size_t i = 0; i < u.size(); ++i) dir[i] = -u[i];
            slope = -gu_prev;
        }

        double step = 0;
        EnergyBreakdown e_new;
        Deformation<D> phi_new(phi.grid);
        try {
            auto [t, pn] = armijo_search(assembler, phi, dir, slope, e, t0, cfg, &e_new);
            step = t;
            phi_new = std::move(pn);
        } catch (const LineSearchFailed&) {
            line_search_failed = true;
            break;
        }

        phi = std::move(phi_new);
        ++accepted;
        last_step = step;
        t0 = std::min(4.0, std::max(step / cfg.backtrack, 1e-12));

        g_prev = std::move(g);
        u_prev = std::move(u);
        e = assembler.energy_and_gradient(phi, g);
        gn = norm2(g);
        history.push_back({level, accepted, e, step, gn});
        if (gn <= tol) break;

        u = metric.apply_inverse(g);
        double gu = 0, beta_num = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            gu += g[i] * u[i];
            beta_num += (g[i] - g_prev[i]) * u[i];
        }
        double beta = (accepted % cfg.cg_restart == 0) ? 0.0 : std::max(0.0, beta_num / gu_prev);
        for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = -u[i] + beta * dir[i];
        gu_prev = gu;
    }
    return accepted;
}

// Full multiscale run. Grids are built per level as monotone refinements of the
// previous level so the prolongation precondition (and determinant
// preservation) holds; sigma = 2 h_level per level.
template <int D>
DescentState<D> run_multiscale(const SignedShape<D>& s1, const SignedShape<D>& s2, const EnergyParams& params,
                               const DescentConfig& cfg) {
    const double r_i = injectivity_radius(s1, s2);

    std::shared_ptr<const AdaptiveGrid<D>> grid = std::make_shared<AdaptiveGrid<D>>(
        AdaptiveGrid<D>::build(cfg.level_min, cfg.level_min, s1, s2, 4.0 * std::ldexp(1.0, -cfg.level_min)));
    DescentState<D> state{Deformation<D>(grid)};

    double last_step = 0;
    for (int level = cfg.level_min; level <= cfg.level_max; ++level) {
        const double sigma = 2.0 * std::ldexp(1.0, -level);
        if (sigma >= r_i)
            state.warnings.push_back("sigma=" + std::to_string(sigma) + " at level " + std::to_string(level) +
                                     " exceeds the injectivity radius " + std::to_string(r_i));
        if (level > cfg.level_min) {
            std::shared_ptr<const AdaptiveGrid<D>> next = std::make_shared<AdaptiveGrid<D>>(
                AdaptiveGrid<D>::build(cfg.level_min, level, s1, s2, 2.0 * sigma, grid.get()));
            state.phi = prolong(state.phi, next);
            grid = next;
        }

        EnergyParams p = params;
        p.sigma = sigma;
        const EnergyAssembler<D> assembler(grid, s1, s2, p);

        bool lsf = false;
        const int accepted = descend_level(assembler, state.phi, cfg, level, state.energy_history, last_step, lsf);
        state.accepted_per_level.push_back(accepted);
        state.iterations += accepted;
        state.line_search_failed = state.line_search_failed || lsf;
        state.level = level;
    }
    state.last_step_size = last_step;
    return state;
}

// ---- checkpointing: magic "SHLM1", little-endian, header + raw nodal array ----

template <int D>
void checkpoint_save(const DescentState<D>& state, const std::string& path) {
    std::ofstream out(path + ".tmp", std::ios::binary);
    if (!out) throw IOError("checkpoint_save: cannot open " + path);
    out.write("SHLM1", 5);
    const uint32_t version = 1;
    const uint8_t dim = D;
    const uint8_t failed = state.line_search_failed ? 1 : 0;
    const uint32_t level = uint32_t(state.level);
    const uint64_t nv = uint64_t(state.phi.values.size());
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&dim), 1);
    out.write(reinterpret_cast<const char*>(&failed), 1);
    out.write(reinterpret_cast<const char*>(&level), 4);
    out.write(reinterpret_cast<const char*>(&nv), 8);
    for (const auto& v : state.phi.values)
        out.write(reinterpret_cast<const char*>(v.e.data()), sizeof(double) * D);
    out.close();
    if (!out) throw IOError("checkpoint_save: write failed: " + path);
    std::error_code ec;
    std::filesystem::rename(path + ".tmp", path, ec);
    if (ec) throw IOError("checkpoint_save: rename failed: " + path);
}

template <int D>
DescentState<D> checkpoint_restore(std::shared_ptr<const AdaptiveGrid<D>> grid, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("checkpoint_restore: cannot open " + path);
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "SHLM1", 5) != 0) throw IOError("checkpoint_restore: bad magic");
    uint32_t version = 0, level = 0;
    uint8_t dim = 0, failed = 0;
    uint64_t nv = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&dim), 1);
    in.read(reinterpret_cast<char*>(&failed), 1);
    in.read(reinterpret_cast<char*>(&level), 4);
    in.read(reinterpret_cast<char*>(&nv), 8);
    if (!in || version != 1 || dim != D) throw IOError("checkpoint_restore: incompatible header");
    if (nv != uint64_t(grid->num_vertices())) throw IOError("checkpoint_restore: vertex count mismatch");
    DescentState<D> state{Deformation<D>(grid)};
    state.level = int(level);
    state.line_search_failed = failed != 0;
    for (auto& v : state.phi.values) {
        in.read(reinterpret_cast<char*>(v.e.data()), sizeof(double) * D);
        if (!in) throw IOError("checkpoint_restore: truncated nodal array");
    }
    return state;
}

} // namespace shellmatch

#endif
