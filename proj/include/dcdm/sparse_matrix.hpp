#ifndef DCDM_SPARSE_MATRIX_HPP
#define DCDM_SPARSE_MATRIX_HPP

#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcdm {

/// Compressed sparse row symmetric matrix. Column indices are strictly
/// increasing within each row; immutable after assembly.
struct SparseMatrix {
    int n = 0;
    std::vector<int> row_offsets;  // length n+1
    std::vector<int> col_indices;
    std::vector<double> values;

    std::size_t nnz() const { return values.size(); }

    double at(int i, int j) const {
        for (int p = row_offsets[i]; p < row_offsets[i + 1]; ++p)
            if (col_indices[p] == j) return values[p];
        return 0.0;
    }

    static SparseMatrix identity(int n) {
        SparseMatrix a;
        a.n = n;
        a.row_offsets.resize(n + 1);
        a.col_indices.resize(n);
        a.values.assign(n, 1.0);
        for (int i = 0; i <= n; ++i) a.row_offsets[i] = i;
        for (int i = 0; i < n; ++i) a.col_indices[i] = i;
        return a;
    }

    static SparseMatrix diagonal(const std::vector<double>& d) {
        SparseMatrix a = identity(static_cast<int>(d.size()));
        a.values = d;
        return a;
    }

    /// Dense row-major input, zeros dropped; for tests and tiny systems.
    static SparseMatrix from_dense(const std::vector<std::vector<double>>& m) {
        SparseMatrix a;
        a.n = static_cast<int>(m.size());
        a.row_offsets.assign(a.n + 1, 0);
        for (int i = 0; i < a.n; ++i) {
            for (int j = 0; j < a.n; ++j) {
                if (m[i][j] != 0.0) {
                    a.col_indices.push_back(j);
                    a.values.push_back(m[i][j]);
                }
            }
            a.row_offsets[i + 1] = static_cast<int>(a.col_indices.size());
        }
        return a;
    }
};

inline void matvec(const SparseMatrix& a, const std::vector<double>& x,
                   std::vector<double>& y) {
    if (static_cast<int>(x.size()) != a.n)
        throw std::invalid_argument("matvec: dimension mismatch");
    y.resize(a.n);
    // Row partition; each row's reduction stays in-order so results are
    // bitwise independent of thread count.
#pragma omp parallel for schedule(static)
    for (int i = 0; i < a.n; ++i) {
        double s = 0.0;
        for (int p = a.row_offsets[i]; p < a.row_offsets[i + 1]; ++p)
            s += a.values[p] * x[a.col_indices[p]];
        y[i] = s;
    }
}

inline std::vector<double> matvec(const SparseMatrix& a,
                                  const std::vector<double>& x) {
    std::vector<double> y;
    matvec(a, x, y);
    return y;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const std::vector<double>& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

inline void axpy(double alpha, const std::vector<double>& x,
                 std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

/// Matrix-market coordinate export, for debugging.
inline void save_matrix_market(const SparseMatrix& a, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << a.n << " " << a.n << " " << a.nnz() << "\n";
    os << std::setprecision(17);
    for (int i = 0; i < a.n; ++i)
        for (int p = a.row_offsets[i]; p < a.row_offsets[i + 1]; ++p)
            os << i + 1 << " " << a.col_indices[p] + 1 << " " << a.values[p]
               << "\n";
}

} // namespace dcdm

#endif
