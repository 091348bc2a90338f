#ifndef DCDM_POISSON_HPP
#define DCDM_POISSON_HPP

#include "dcdm/sparse_matrix.hpp"
#include "dcdm/voxel_domain.hpp"

namespace dcdm {

/// Assemble the dimensionless 7-point Poisson operator for a labeled voxel
/// grid with Neumann walls. One unknown per cell center (n = nx*ny*nz);
/// rows of Boundary cells are structurally empty. For a Fluid cell the
/// diagonal equals its count of Fluid face-neighbors and each such neighbor
/// contributes an off-diagonal -1. The 1/dx^2 and density factors live in
/// the right-hand side, not here, so one trained network serves every
/// resolution.
inline SparseMatrix assemble_poisson(const VoxelDomain& d) {
    SparseMatrix a;
    a.n = static_cast<int>(d.size());
    a.row_offsets.assign(a.n + 1, 0);
    // Neighbor offsets in ascending linear-index order.
    const int off[6][3] = {{0, 0, -1}, {0, -1, 0}, {-1, 0, 0},
                           {1, 0, 0},  {0, 1, 0},  {0, 0, 1}};
    for (int k = 0; k < d.nz; ++k) {
        for (int j = 0; j < d.ny; ++j) {
            for (int i = 0; i < d.nx; ++i) {
                const int row = d.index(i, j, k);
                if (d.labels[row] == CellLabel::Boundary) {
                    a.row_offsets[row + 1] = static_cast<int>(a.col_indices.size());
                    continue;
                }
                int fluid_neighbors = 0;
                bool diag_emitted = false;
                for (const auto& o : off) {
                    const int ni = i + o[0], nj = j + o[1], nk = k + o[2];
                    if (!d.is_fluid(ni, nj, nk)) continue;
                    ++fluid_neighbors;
                }
                if (fluid_neighbors == 0) {
                    // Isolated fluid cell: structurally empty row.
                    a.row_offsets[row + 1] = static_cast<int>(a.col_indices.size());
                    continue;
                }
                for (const auto& o : off) {
                    const int ni = i + o[0], nj = j + o[1], nk = k + o[2];
                    if (!d.is_fluid(ni, nj, nk)) continue;
                    const int col = d.index(ni, nj, nk);
                    if (!diag_emitted && col > row) {
                        a.col_indices.push_back(row);
                        a.values.push_back(static_cast<double>(fluid_neighbors));
                        diag_emitted = true;
                    }
                    a.col_indices.push_back(col);
                    a.values.push_back(-1.0);
                }
                if (!diag_emitted) {
                    a.col_indices.push_back(row);
                    a.values.push_back(static_cast<double>(fluid_neighbors));
                }
                a.row_offsets[row + 1] = static_cast<int>(a.col_indices.size());
            }
        }
    }
    return a;
}

/// Subtract the mean over Fluid cells; maps onto range(A) for connected
/// full-Neumann domains (the compatible-pressure convention).
inline void remove_fluid_mean(std::vector<double>& v, const VoxelDomain& d) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (d.labels[i] == CellLabel::Fluid) {
            sum += v[i];
            ++count;
        }
    }
    if (count == 0) return;
    const double mean = sum / static_cast<double>(count);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (d.labels[i] == CellLabel::Fluid) v[i] -= mean;
}

} // namespace dcdm

#endif
