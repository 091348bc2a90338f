#ifndef DCDM_SOLVERS_HPP
#define DCDM_SOLVERS_HPP

#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcdm/sparse_matrix.hpp"

namespace dcdm {

struct DegenerateDirection : std::runtime_error {
    DegenerateDirection() : std::runtime_error("degenerate direction: d'Ad <= 0") {}
};
struct FactorBreakdown : std::runtime_error {
    explicit FactorBreakdown(int row)
        : std::runtime_error("IC(0) breakdown at row " + std::to_string(row)) {}
};
struct DeflationBreakdown : std::runtime_error {
    DeflationBreakdown() : std::runtime_error("deflation basis yields singular W'AW") {}
};

/// Full keeps every previous direction; Window(w) retains the last w
/// (Window(2) reproduces i_start = k-2).
struct OrthoPolicy {
    enum class Kind { Full, Window } kind = Kind::Full;
    int width = 0;

    static OrthoPolicy full() { return {Kind::Full, 0}; }
    static OrthoPolicy window(int w) {
        if (w < 1) throw std::invalid_argument("window must be >= 1");
        return {Kind::Window, w};
    }
};

struct SolverConfig {
    double rel_tol = 1e-4;
    int max_iter = 1000;
    OrthoPolicy ortho = OrthoPolicy::full();
};

struct SolveReport {
    int iterations = 0;
    std::vector<double> residual_history;  // ||r_0||, ||r_1||, ...
    bool converged = false;
    std::vector<double> x;

    void write_csv(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot open for writing: " + path);
        os << "iter,residual\n";
        os.precision(17);
        for (std::size_t k = 0; k < residual_history.size(); ++k)
            os << k << "," << residual_history[k] << "\n";
    }
};

/// Maps a unit-norm residual to a search direction; may be nonlinear.
using DirectionOracle =
    std::function<std::vector<double>(const std::vector<double>&)>;

/// alpha = r'd / d'Ad, the A-norm-optimal step along d.
inline double step_size(const std::vector<double>& r,
                        const std::vector<double>& d, const SparseMatrix& a) {
    const std::vector<double> ad = matvec(a, d);
    const double dad = dot(d, ad);
    if (dad <= 1e-14 * dot(d, d)) throw DegenerateDirection();
    return dot(r, d) / dad;
}

namespace detail {
struct RetainedDirection {
    std::vector<double> d;
    std::vector<double> ad;
    double dad = 0.0;
};
} // namespace detail

enum class OrthoStatus { Ok, ZeroDirection };

/// A-orthogonalize d against the retained directions in place:
/// d -= sum_i (d'Ad_i / d_i'Ad_i) d_i. ZeroDirection means the input was
/// (numerically) inside the span of the retained directions.
inline OrthoStatus a_orthogonalize(std::vector<double>& d,
                                   const std::vector<detail::RetainedDirection>& prev) {
    const double norm_in = norm2(d);
    for (const auto& p : prev) {
        const double h = dot(d, p.ad) / p.dad;
        axpy(-h, p.d, d);
    }
    if (norm2(d) <= 1e-14 * norm_in) return OrthoStatus::ZeroDirection;
    return OrthoStatus::Ok;
}

/// The deep conjugate direction method: directions come from an oracle
/// applied to the normalized residual, are A-orthogonalized against a
/// retained window, and stepped by the A-norm-optimal alpha. The residual
/// is recomputed from b - A x each iteration because the oracle is
/// nonlinear.
inline SolveReport dcdm(const SparseMatrix& a, const std::vector<double>& b,
                        const std::vector<double>& x0,
                        const DirectionOracle& oracle, const SolverConfig& cfg) {
    SolveReport rep;
    rep.x = x0;
    std::vector<double> r = b;
    {
        std::vector<double> ax = matvec(a, rep.x);
        axpy(-1.0, ax, r);
    }
    const double r0_norm = norm2(r);
    rep.residual_history.push_back(r0_norm);
    if (r0_norm == 0.0) {
        rep.converged = true;
        return rep;
    }
    const double target = cfg.rel_tol * r0_norm;

    std::vector<detail::RetainedDirection> window;
    for (int k = 1; k <= cfg.max_iter; ++k) {
        const double rnorm = rep.residual_history.back();
        std::vector<double> rhat = r;
        for (double& v : rhat) v /= rnorm;
        std::vector<double> d = oracle(rhat);
        if (a_orthogonalize(d, window) == OrthoStatus::ZeroDirection) {
            // Oracle direction lies in the span of retained directions; fall
            // back to the residual to guarantee progress.
            d = r;
            if (a_orthogonalize(d, window) == OrthoStatus::ZeroDirection)
                break;
        }
        std::vector<double> ad = matvec(a, d);
        const double dad = dot(d, ad);
        if (dad <= 1e-14 * dot(d, d)) throw DegenerateDirection();
        const double alpha = dot(r, d) / dad;
        axpy(alpha, d, rep.x);
        std::vector<double> ax = matvec(a, rep.x);
        r = b;
        axpy(-1.0, ax, r);
        rep.iterations = k;
        rep.residual_history.push_back(norm2(r));

        window.push_back({std::move(d), std::move(ad), dad});
        if (cfg.ortho.kind == OrthoPolicy::Kind::Window &&
            static_cast<int>(window.size()) > cfg.ortho.width)
            window.erase(window.begin());

        if (rep.residual_history.back() <= target) {
            rep.converged = true;
            break;
        }
    }
    return rep;
}

/// Classical conjugate gradients with relative-residual stopping.
inline SolveReport cg(const SparseMatrix& a, const std::vector<double>& b,
                      const std::vector<double>& x0, const SolverConfig& cfg) {
    SolveReport rep;
    rep.x = x0;
    std::vector<double> r = b;
    {
        std::vector<double> ax = matvec(a, rep.x);
        axpy(-1.0, ax, r);
    }
    double rr = dot(r, r);
    const double r0_norm = std::sqrt(rr);
    rep.residual_history.push_back(r0_norm);
    if (r0_norm == 0.0) {
        rep.converged = true;
        return rep;
    }
    const double target = cfg.rel_tol * r0_norm;
    std::vector<double> p = r;
    for (int k = 1; k <= cfg.max_iter; ++k) {
        std::vector<double> ap = matvec(a, p);
        const double pap = dot(p, ap);
        if (pap <= 0.0) throw DegenerateDirection();
        const double alpha = rr / pap;
        axpy(alpha, p, rep.x);
        axpy(-alpha, ap, r);
        const double rr_new = dot(r, r);
        rep.iterations = k;
        rep.residual_history.push_back(std::sqrt(rr_new));
        if (rep.residual_history.back() <= target) {
            rep.converged = true;
            break;
        }
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
    }
    return rep;
}

/// Zero-fill incomplete Cholesky on A's lower-triangular pattern.
/// `shift` scales the diagonal as (1+shift)*a_ii before factoring (Poisson
/// callers pass 1e-6 to clear the Neumann nullspace). Rows with empty
/// structure (Boundary cells) pass through as identity.
inline SparseMatrix ic0_factor(const SparseMatrix& a, double shift = 0.0) {
    SparseMatrix l;
    l.n = a.n;
    l.row_offsets.assign(a.n + 1, 0);
    // Lower-triangular pattern including the diagonal; identity for empty rows.
    for (int i = 0; i < a.n; ++i) {
        bool has_diag = false;
        for (int p = a.row_offsets[i]; p < a.row_offsets[i + 1]; ++p) {
            const int j = a.col_indices[p];
            if (j > i) break;
            l.col_indices.push_back(j);
            l.values.push_back(a.values[p]);
            if (j == i) has_diag = true;
        }
        if (!has_diag) {
            l.col_indices.push_back(i);
            l.values.push_back(1.0);
        } else if (shift != 0.0) {
            l.values.back() *= 1.0 + shift;
        }
        l.row_offsets[i + 1] = static_cast<int>(l.col_indices.size());
    }
    // Empty source rows stay identity; mark them so factorization skips them.
    std::vector<char> structural(a.n, 0);
    for (int i = 0; i < a.n; ++i)
        structural[i] = (a.row_offsets[i + 1] > a.row_offsets[i]) ? 1 : 0;

    std::vector<int> diag_pos(a.n);
    for (int i = 0; i < a.n; ++i) diag_pos[i] = l.row_offsets[i + 1] - 1;

    for (int i = 0; i < a.n; ++i) {
        if (!structural[i]) continue;
        for (int p = l.row_offsets[i]; p <= diag_pos[i]; ++p) {
            const int j = l.col_indices[p];
            // Dot of rows i and j over columns < j (pattern intersection).
            double s = l.values[p];
            int pi = l.row_offsets[i], pj = l.row_offsets[j];
            while (pi < p && pj < diag_pos[j]) {
                const int ci = l.col_indices[pi], cj = l.col_indices[pj];
                if (ci == cj) {
                    s -= l.values[pi] * l.values[pj];
                    ++pi;
                    ++pj;
                } else if (ci < cj) {
                    ++pi;
                } else {
                    ++pj;
                }
            }
            if (j < i) {
                l.values[p] = s / l.values[diag_pos[j]];
            } else {
                if (s <= 0.0) throw FactorBreakdown(i);
                l.values[p] = std::sqrt(s);
            }
        }
    }
    return l;
}

/// z = (L L^T)^{-1} r via forward then back substitution.
inline std::vector<double> ic0_apply(const SparseMatrix& l,
                                     const std::vector<double>& r) {
    const int n = l.n;
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
        double s = r[i];
        const int diag = l.row_offsets[i + 1] - 1;
        for (int p = l.row_offsets[i]; p < diag; ++p)
            s -= l.values[p] * y[l.col_indices[p]];
        y[i] = s / l.values[diag];
    }
    // Back substitution with L^T, column sweep over L.
    std::vector<double> z = y;
    for (int i = n - 1; i >= 0; --i) {
        const int diag = l.row_offsets[i + 1] - 1;
        z[i] /= l.values[diag];
        for (int p = l.row_offsets[i]; p < diag; ++p)
            z[l.col_indices[p]] -= l.values[p] * z[i];
    }
    return z;
}

/// Preconditioned CG with an IC(0) (or any lower-triangular) factor L.
inline SolveReport pcg(const SparseMatrix& a, const std::vector<double>& b,
                       const std::vector<double>& x0, const SparseMatrix& l,
                       const SolverConfig& cfg) {
    SolveReport rep;
    rep.x = x0;
    std::vector<double> r = b;
    {
        std::vector<double> ax = matvec(a, rep.x);
        axpy(-1.0, ax, r);
    }
    const double r0_norm = norm2(r);
    rep.residual_history.push_back(r0_norm);
    if (r0_norm == 0.0) {
        rep.converged = true;
        return rep;
    }
    const double target = cfg.rel_tol * r0_norm;
    std::vector<double> z = ic0_apply(l, r);
    std::vector<double> p = z;
    double rz = dot(r, z);
    for (int k = 1; k <= cfg.max_iter; ++k) {
        std::vector<double> ap = matvec(a, p);
        const double pap = dot(p, ap);
        if (pap <= 0.0) throw DegenerateDirection();
        const double alpha = rz / pap;
        axpy(alpha, p, rep.x);
        axpy(-alpha, ap, r);
        rep.iterations = k;
        rep.residual_history.push_back(norm2(r));
        if (rep.residual_history.back() <= target) {
            rep.converged = true;
            break;
        }
        z = ic0_apply(l, r);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = z[i] + beta * p[i];
    }
    return rep;
}

namespace detail {
/// Dense Cholesky of a small SPD matrix (row-major, k x k), in place.
inline void small_cholesky(std::vector<double>& m, int k) {
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = m[i * k + j];
            for (int t = 0; t < j; ++t) s -= m[i * k + t] * m[j * k + t];
            if (i == j) {
                if (s <= 1e-12 * std::abs(m[i * k + i]) || s <= 0.0)
                    throw DeflationBreakdown();
                m[i * k + i] = std::sqrt(s);
            } else {
                m[i * k + j] = s / m[j * k + j];
            }
        }
    }
}

inline void small_cholesky_solve(const std::vector<double>& chol, int k,
                                 std::vector<double>& rhs) {
    for (int i = 0; i < k; ++i) {
        double s = rhs[i];
        for (int j = 0; j < i; ++j) s -= chol[i * k + j] * rhs[j];
        rhs[i] = s / chol[i * k + i];
    }
    for (int i = k - 1; i >= 0; --i) {
        double s = rhs[i];
        for (int j = i + 1; j < k; ++j) s -= chol[j * k + i] * rhs[j];
        rhs[i] = s / chol[i * k + i];
    }
}
} // namespace detail

/// Deflated CG: CG on the complement of span(W), with the coarse component
/// solved directly through the k x k Gram matrix W'AW.
inline SolveReport deflated_pcg(const SparseMatrix& a,
                                const std::vector<double>& b,
                                const std::vector<std::vector<double>>& w,
                                const SolverConfig& cfg) {
    const int k = static_cast<int>(w.size());
    if (k == 0) return cg(a, b, std::vector<double>(a.n, 0.0), cfg);

    std::vector<std::vector<double>> aw(k);
    for (int i = 0; i < k; ++i) aw[i] = matvec(a, w[i]);
    std::vector<double> gram(static_cast<std::size_t>(k) * k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) gram[i * k + j] = dot(w[i], aw[j]);
    detail::small_cholesky(gram, k);

    auto coarse_solve = [&](const std::vector<double>& v) {
        std::vector<double> c(k);
        for (int i = 0; i < k; ++i) c[i] = dot(w[i], v);
        detail::small_cholesky_solve(gram, k, c);
        return c;
    };
    // Project so that W' A (projected p) = 0: p -= W (W'AW)^{-1} W' A p.
    auto deflate = [&](std::vector<double>& p, const std::vector<double>& ap) {
        std::vector<double> c = coarse_solve(ap);
        for (int i = 0; i < k; ++i) axpy(-c[i], w[i], p);
    };

    SolveReport rep;
    rep.x.assign(a.n, 0.0);
    std::vector<double> r = b;
    // Initial guess absorbing the coarse component: x0 = W (W'AW)^{-1} W' b.
    {
        std::vector<double> c = coarse_solve(b);
        for (int i = 0; i < k; ++i) axpy(c[i], w[i], rep.x);
        std::vector<double> ax = matvec(a, rep.x);
        axpy(-1.0, ax, r);
    }
    const double r0_norm = norm2(r);
    rep.residual_history.push_back(r0_norm);
    if (r0_norm == 0.0) {
        rep.converged = true;
        return rep;
    }
    const double target = cfg.rel_tol * r0_norm;
    std::vector<double> p = r;
    {
        std::vector<double> ar = matvec(a, r);
        deflate(p, ar);
    }
    double rr = dot(r, r);
    for (int it = 1; it <= cfg.max_iter; ++it) {
        std::vector<double> ap = matvec(a, p);
        const double pap = dot(p, ap);
        if (pap <= 0.0) throw DegenerateDirection();
        const double alpha = rr / pap;
        axpy(alpha, p, rep.x);
        axpy(-alpha, ap, r);
        const double rr_new = dot(r, r);
        rep.iterations = it;
        rep.residual_history.push_back(std::sqrt(rr_new));
        if (rep.residual_history.back() <= target) {
            rep.converged = true;
            break;
        }
        const double beta = rr_new / rr;
        rr = rr_new;
        std::vector<double> ar = matvec(a, r);
        std::vector<double> pr = r;
        deflate(pr, ar);
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = pr[i] + beta * p[i];
    }
    return rep;
}

} // namespace dcdm

#endif
