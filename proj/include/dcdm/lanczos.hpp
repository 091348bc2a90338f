#ifndef DCDM_LANCZOS_HPP
#define DCDM_LANCZOS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dcdm/rng.hpp"
#include "dcdm/sparse_matrix.hpp"
#include "dcdm/voxel_domain.hpp"

namespace dcdm {

struct LanczosResult {
    std::vector<std::vector<double>> q;  // orthonormal Lanczos vectors, length n each
    std::vector<double> alpha;           // diagonal of T
    std::vector<double> beta;            // subdiagonal of T (size m-1)
    std::optional<int> breakdown_at;     // set when the Krylov space was exhausted early

    int m() const { return static_cast<int>(q.size()); }
};

struct RitzBasis {
    std::vector<std::vector<double>> q;  // Ritz vectors, orthonormal columns
    std::vector<double> lambdas;         // nondecreasing Ritz values

    int m() const { return static_cast<int>(q.size()); }
};

struct NoPositiveSpectrum : std::runtime_error {
    NoPositiveSpectrum() : std::runtime_error("all Ritz values numerically zero") {}
};

namespace detail {
inline void normalize(std::vector<double>& v) {
    const double nrm = norm2(v);
    for (double& x : v) x /= nrm;
}

/// Twice-repeated modified Gram-Schmidt against all previous columns.
inline void reorthogonalize(std::vector<double>& v,
                            const std::vector<std::vector<double>>& basis) {
    for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : basis) axpy(-dot(q, v), q, v);
}
} // namespace detail

/// Lanczos tridiagonalization with full reorthogonalization. The start
/// vector is Gaussian with the constant component over Fluid cells (or all
/// cells when no mask is given) projected out, so the iteration lives in
/// span(A) for the Neumann Poisson operator. Early beta breakdown returns
/// the shorter basis with `breakdown_at` set; callers may accept it.
inline LanczosResult lanczos(
    const SparseMatrix& a, int m, std::uint64_t seed,
    const VoxelDomain* fluid_mask = nullptr, int checkpoint_every = 0,
    const std::function<void(const LanczosResult&)>& checkpoint = {}) {
    if (m < 1) throw std::invalid_argument("lanczos: m must be >= 1");
    const int n = a.n;
    auto eng = make_engine(seed, "lanczos/q0");
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<double> q0(n);
    for (double& x : q0) x = gauss(eng);
    // Project out the constant over the active cells.
    {
        double sum = 0.0;
        std::size_t count = 0;
        for (int i = 0; i < n; ++i) {
            const bool active =
                !fluid_mask || fluid_mask->labels[i] == CellLabel::Fluid;
            if (active) {
                sum += q0[i];
                ++count;
            } else {
                q0[i] = 0.0;
            }
        }
        if (count > 0) {
            const double mean = sum / static_cast<double>(count);
            for (int i = 0; i < n; ++i) {
                const bool active =
                    !fluid_mask || fluid_mask->labels[i] == CellLabel::Fluid;
                if (active) q0[i] -= mean;
            }
        }
    }
    detail::normalize(q0);

    LanczosResult res;
    res.q.push_back(std::move(q0));
    std::vector<double> v;
    for (int j = 0; j < m; ++j) {
        matvec(a, res.q[j], v);
        const double alpha_j = dot(res.q[j], v);
        res.alpha.push_back(alpha_j);
        if (j + 1 == m) break;
        axpy(-alpha_j, res.q[j], v);
        if (j > 0) axpy(-res.beta[j - 1], res.q[j - 1], v);
        detail::reorthogonalize(v, res.q);
        const double beta_j = norm2(v);
        if (beta_j <= 1e-12) {
            res.breakdown_at = j;
            break;
        }
        res.beta.push_back(beta_j);
        std::vector<double> qn = v;
        for (double& x : qn) x /= beta_j;
        res.q.push_back(std::move(qn));
        if (checkpoint_every > 0 && checkpoint &&
            static_cast<int>(res.q.size()) % checkpoint_every == 0)
            checkpoint(res);
    }
    return res;
}

/// Implicit-shift QL with Wilkinson shifts for a symmetric tridiagonal
/// matrix; accumulates the orthogonal transform. Returns eigenvalues
/// ascending with eigenvector columns permuted to match. Q is row-major
/// m x m; column i is the eigenvector for eigvals[i].
inline std::pair<std::vector<double>, std::vector<double>> tridiag_eig(
    std::vector<double> alpha, std::vector<double> beta) {
    const int m = static_cast<int>(alpha.size());
    if (m == 0) throw std::invalid_argument("tridiag_eig: empty input");
    if (static_cast<int>(beta.size()) != m - 1)
        throw std::invalid_argument("tridiag_eig: beta size must be m-1");

    std::vector<double> d = std::move(alpha);
    std::vector<double> e = std::move(beta);
    e.push_back(0.0);
    std::vector<double> z(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) z[i * m + i] = 1.0;

    auto hypot2 = [](double a, double b) { return std::hypot(a, b); };

    for (int l = 0; l < m; ++l) {
        int iter = 0;
        while (true) {
            int small = l;
            for (; small < m - 1; ++small) {
                const double dd = std::abs(d[small]) + std::abs(d[small + 1]);
                if (std::abs(e[small]) <= std::numeric_limits<double>::epsilon() * dd)
                    break;
            }
            if (small == l) break;
            if (++iter > 30 * m)
                throw std::runtime_error("tridiag_eig: QL failed to converge");
            // Wilkinson shift from the leading 2x2.
            double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            double r = hypot2(g, 1.0);
            g = d[small] - d[l] + e[l] / (g + std::copysign(r, g));
            double s = 1.0, c = 1.0, p = 0.0;
            bool underflow = false;
            for (int i = small - 1; i >= l; --i) {
                double f = s * e[i];
                const double b = c * e[i];
                r = hypot2(f, g);
                e[i + 1] = r;
                if (r == 0.0) {
                    d[i + 1] -= p;
                    e[small] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for (int k = 0; k < m; ++k) {
                    f = z[k * m + i + 1];
                    z[k * m + i + 1] = s * z[k * m + i] + c * f;
                    z[k * m + i] = c * z[k * m + i] - s * f;
                }
            }
            if (underflow) continue;
            d[l] -= p;
            e[l] = g;
            e[small] = 0.0;
        }
    }

    // Sort ascending, permuting eigenvector columns.
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return d[i] < d[j]; });
    std::vector<double> eigvals(m);
    std::vector<double> q(static_cast<std::size_t>(m) * m);
    for (int c = 0; c < m; ++c) {
        eigvals[c] = d[order[c]];
        for (int r = 0; r < m; ++r) q[r * m + c] = z[r * m + order[c]];
    }
    return {std::move(eigvals), std::move(q)};
}

/// Rayleigh-Ritz vectors Q = Q_L * Qhat with their Ritz values.
inline RitzBasis ritz_vectors(const LanczosResult& lan) {
    const int m = lan.m();
    const int n = static_cast<int>(lan.q.front().size());
    auto [vals, qhat] = tridiag_eig(lan.alpha, lan.beta);

    RitzBasis basis;
    basis.lambdas = std::move(vals);
    basis.q.assign(m, std::vector<double>(n, 0.0));
#pragma omp parallel for schedule(static)
    for (int c = 0; c < m; ++c) {
        auto& col = basis.q[c];
        for (int j = 0; j < m; ++j) {
            const double coeff = qhat[j * m + c];
            if (coeff == 0.0) continue;
            axpy(coeff, lan.q[j], col);
        }
    }
    return basis;
}

} // namespace dcdm

#endif
