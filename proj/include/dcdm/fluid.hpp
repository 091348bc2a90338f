#ifndef DCDM_FLUID_HPP
#define DCDM_FLUID_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcdm/poisson.hpp"
#include "dcdm/solvers.hpp"
#include "dcdm/sparse_matrix.hpp"
#include "dcdm/voxel_domain.hpp"

namespace dcdm {

/// MAC grid: velocity components on cell faces (y is up), scalars at cell
/// centers. Face arrays are (nx+1)*ny*nz for u, nx*(ny+1)*nz for v,
/// nx*ny*(nz+1) for w.
struct MacGrid {
    VoxelDomain domain;
    std::vector<double> u, v, w;
    std::vector<double> density;

    explicit MacGrid(const VoxelDomain& d) : domain(d) {
        u.assign(static_cast<std::size_t>(d.nx + 1) * d.ny * d.nz, 0.0);
        v.assign(static_cast<std::size_t>(d.nx) * (d.ny + 1) * d.nz, 0.0);
        w.assign(static_cast<std::size_t>(d.nx) * d.ny * (d.nz + 1), 0.0);
        density.assign(d.size(), 0.0);
    }

    std::size_t uidx(int i, int j, int k) const {
        return i + static_cast<std::size_t>(domain.nx + 1) *
                       (j + static_cast<std::size_t>(domain.ny) * k);
    }
    std::size_t vidx(int i, int j, int k) const {
        return i + static_cast<std::size_t>(domain.nx) *
                       (j + static_cast<std::size_t>(domain.ny + 1) * k);
    }
    std::size_t widx(int i, int j, int k) const {
        return i + static_cast<std::size_t>(domain.nx) *
                       (j + static_cast<std::size_t>(domain.ny) * k);
    }
};

struct ObstacleSpec {
    enum class Kind { None, Sphere, StaticMask, RotatingBox } kind = Kind::None;
    // Geometry in fractions of the unit cube (the domain is (0,1)^3).
    double cx = 0.5, cy = 0.5, cz = 0.5;
    double radius = 0.15;      // sphere
    double half_width = 0.12;  // rotating box
    double omega = 1.0;        // rad/s about the vertical (y) axis
    std::string mask_path;
};

enum class SolverKind { Cg, Icpcg, Dpcg, Dcdm };

struct SimConfig {
    int grid_n = 32;
    double dt = 1.0 / 30.0;
    double rho = 1.0;
    int frames = 50;
    double inlet_radius = 0.15;  // fraction of the bottom face
    double inlet_speed = 1.0;
    double buoyancy = 2.0;
    ObstacleSpec obstacle;
    SolverKind solver = SolverKind::Cg;
    SolverConfig solver_cfg{1e-4, 3000, OrthoPolicy::full()};
    std::uint64_t seed = 0;

    void validate() const {
        if (grid_n < 2 || grid_n % 2) throw std::invalid_argument("grid must be even and >= 2");
        if (dt <= 0.0 || rho <= 0.0) throw std::invalid_argument("dt and rho must be positive");
        if (frames < 0) throw std::invalid_argument("frames must be >= 0");
    }
};

// ---------------------------------------------------------------------------
// Obstacles and boundary faces
// ---------------------------------------------------------------------------

/// Relabel cells whose centers fall inside the analytic obstacle at time t.
/// Starts from all-Fluid (or the static mask file).
inline VoxelDomain update_obstacle(const VoxelDomain& base, double t,
                                   const ObstacleSpec& obs) {
    if (obs.kind == ObstacleSpec::Kind::StaticMask) {
        VoxelDomain d = load_domain(obs.mask_path);
        if (d.nx != base.nx || d.ny != base.ny || d.nz != base.nz)
            throw std::runtime_error("obstacle mask dims mismatch");
        return d;
    }
    VoxelDomain d = base;
    std::fill(d.labels.begin(), d.labels.end(), CellLabel::Fluid);
    if (obs.kind == ObstacleSpec::Kind::None) return d;
    const double h = 1.0 / d.nx;  // cell size in unit-cube fractions
    for (int k = 0; k < d.nz; ++k) {
        for (int j = 0; j < d.ny; ++j) {
            for (int i = 0; i < d.nx; ++i) {
                const double x = (i + 0.5) * h, y = (j + 0.5) * h,
                             z = (k + 0.5) * h;
                bool inside = false;
                if (obs.kind == ObstacleSpec::Kind::Sphere) {
                    const double dx = x - obs.cx, dy = y - obs.cy, dz = z - obs.cz;
                    inside = dx * dx + dy * dy + dz * dz <= obs.radius * obs.radius;
                } else if (obs.kind == ObstacleSpec::Kind::RotatingBox) {
                    // Rotate the point into the box frame about the y axis.
                    const double ang = -obs.omega * t;
                    const double rx = x - obs.cx, rz = z - obs.cz;
                    const double bx = std::cos(ang) * rx - std::sin(ang) * rz;
                    const double bz = std::sin(ang) * rx + std::cos(ang) * rz;
                    inside = std::abs(bx) <= obs.half_width &&
                             std::abs(y - obs.cy) <= obs.half_width &&
                             std::abs(bz) <= obs.half_width;
                }
                if (inside) d.labels[d.index(i, j, k)] = CellLabel::Boundary;
            }
        }
    }
    return d;
}

/// Rigid velocity of the obstacle at unit-cube position (x,y,z), time t.
inline void obstacle_velocity(const ObstacleSpec& obs, double x, double /*y*/,
                              double z, double /*t*/, double& ox, double& oy,
                              double& oz) {
    ox = oy = oz = 0.0;
    if (obs.kind == ObstacleSpec::Kind::RotatingBox) {
        // omega about +y: vel = omega x r = (omega*(z-cz)? ...): for rotation
        // rate w about y, velocity = (w*(z-cz), 0, -w*(x-cx)).
        ox = obs.omega * (z - obs.cz);
        oz = -obs.omega * (x - obs.cx);
    }
}

/// Set every face adjacent to a Boundary cell (including the domain walls)
/// to its prescribed normal velocity: zero on walls, the inflow speed in
/// the inlet disk on the bottom face, the rigid velocity on moving
/// obstacles. The top wall is an outlet: its faces carry a uniform outflow
/// balancing the net inlet flux, which keeps the Neumann problem
/// compatible (sum of the divergence over Fluid cells is zero).
inline void enforce_boundary_faces(MacGrid& g, double t, const SimConfig& cfg) {
    const VoxelDomain& d = g.domain;
    const double h = 1.0 / d.nx;
    auto solid = [&](int i, int j, int k) {
        return !d.in_bounds(i, j, k) ||
               d.labels[d.index(i, j, k)] == CellLabel::Boundary;
    };
    auto obstacle_cell = [&](int i, int j, int k) {
        return d.in_bounds(i, j, k) &&
               d.labels[d.index(i, j, k)] == CellLabel::Boundary;
    };
    // u faces
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i <= d.nx; ++i) {
                const bool ls = solid(i - 1, j, k), rs = solid(i, j, k);
                if (!ls && !rs) continue;
                double ox = 0, oy = 0, oz = 0;
                if (obstacle_cell(i - 1, j, k) || obstacle_cell(i, j, k))
                    obstacle_velocity(cfg.obstacle, i * h, (j + 0.5) * h,
                                      (k + 0.5) * h, t, ox, oy, oz);
                g.u[g.uidx(i, j, k)] = ox;
            }
    // v faces (bottom wall carries the inlet, top wall the balancing outlet)
    double inflow = 0.0;
    int top_open = 0;
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j <= d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                const bool bs = solid(i, j - 1, k), ts = solid(i, j, k);
                if (!bs && !ts) continue;
                double val = 0.0;
                if (obstacle_cell(i, j - 1, k) || obstacle_cell(i, j, k)) {
                    double ox, oy, oz;
                    obstacle_velocity(cfg.obstacle, (i + 0.5) * h, j * h,
                                      (k + 0.5) * h, t, ox, oy, oz);
                    val = oy;
                } else if (j == 0 && !obstacle_cell(i, 0, k)) {
                    const double x = (i + 0.5) * h - 0.5, z = (k + 0.5) * h - 0.5;
                    if (x * x + z * z <= cfg.inlet_radius * cfg.inlet_radius) {
                        val = cfg.inlet_speed;
                        inflow += val;
                    }
                } else if (j == d.ny && !obstacle_cell(i, d.ny - 1, k)) {
                    ++top_open;
                }
                g.v[g.vidx(i, j, k)] = val;
            }
    if (top_open > 0 && inflow != 0.0) {
        const double out = inflow / top_open;
        for (int k = 0; k < d.nz; ++k)
            for (int i = 0; i < d.nx; ++i)
                if (!obstacle_cell(i, d.ny - 1, k))
                    g.v[g.vidx(i, d.ny, k)] = out;
    }
    // w faces
    for (int k = 0; k <= d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                const bool ns = solid(i, j, k - 1), fs = solid(i, j, k);
                if (!ns && !fs) continue;
                double ox = 0, oy = 0, oz = 0;
                if (obstacle_cell(i, j, k - 1) || obstacle_cell(i, j, k))
                    obstacle_velocity(cfg.obstacle, (i + 0.5) * h, (j + 0.5) * h,
                                      k * h, t, ox, oy, oz);
                g.w[g.widx(i, j, k)] = oz;
            }
}

// ---------------------------------------------------------------------------
// Advection (backward semi-Lagrangian with trilinear interpolation)
// ---------------------------------------------------------------------------

namespace detail {
/// Trilinear sample of a face/cell array whose sample points sit at
/// (i+ox, j+oy, k+oz)*h with logical dims (sx, sy, sz).
inline double trilerp(const std::vector<double>& f, int sx, int sy, int sz,
                      double ox, double oy, double oz, double h, double x,
                      double y, double z) {
    const double gx = x / h - ox, gy = y / h - oy, gz = z / h - oz;
    const double cx = std::clamp(gx, 0.0, static_cast<double>(sx - 1));
    const double cy = std::clamp(gy, 0.0, static_cast<double>(sy - 1));
    const double cz = std::clamp(gz, 0.0, static_cast<double>(sz - 1));
    const int i0 = std::min(static_cast<int>(cx), sx - 2 >= 0 ? sx - 2 : 0);
    const int j0 = std::min(static_cast<int>(cy), sy - 2 >= 0 ? sy - 2 : 0);
    const int k0 = std::min(static_cast<int>(cz), sz - 2 >= 0 ? sz - 2 : 0);
    const double fx = cx - i0, fy = cy - j0, fz = cz - k0;
    auto at = [&](int i, int j, int k) {
        i = std::min(i, sx - 1);
        j = std::min(j, sy - 1);
        k = std::min(k, sz - 1);
        return f[i + static_cast<std::size_t>(sx) *
                         (j + static_cast<std::size_t>(sy) * k)];
    };
    double c00 = at(i0, j0, k0) * (1 - fx) + at(i0 + 1, j0, k0) * fx;
    double c10 = at(i0, j0 + 1, k0) * (1 - fx) + at(i0 + 1, j0 + 1, k0) * fx;
    double c01 = at(i0, j0, k0 + 1) * (1 - fx) + at(i0 + 1, j0, k0 + 1) * fx;
    double c11 =
        at(i0, j0 + 1, k0 + 1) * (1 - fx) + at(i0 + 1, j0 + 1, k0 + 1) * fx;
    double c0 = c00 * (1 - fy) + c10 * fy;
    double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
}
} // namespace detail

inline void velocity_at(const MacGrid& g, double x, double y, double z,
                        double h, double& vx, double& vy, double& vz) {
    const VoxelDomain& d = g.domain;
    vx = detail::trilerp(g.u, d.nx + 1, d.ny, d.nz, 0.0, 0.5, 0.5, h, x, y, z);
    vy = detail::trilerp(g.v, d.nx, d.ny + 1, d.nz, 0.5, 0.0, 0.5, h, x, y, z);
    vz = detail::trilerp(g.w, d.nx, d.ny, d.nz + 1, 0.5, 0.5, 0.0, h, x, y, z);
}

/// Backward semi-Lagrangian advection of velocity and density; backtraces
/// are clamped to the domain.
inline void advect(MacGrid& g, double dt) {
    const VoxelDomain& d = g.domain;
    const double h = d.dx;
    const MacGrid old = g;
    auto trace_sample = [&](double x, double y, double z,
                            const std::vector<double>& f, int sx, int sy,
                            int sz, double ox, double oy, double oz) {
        double vx, vy, vz;
        velocity_at(old, x, y, z, h, vx, vy, vz);
        const double bx = x - dt * vx, by = y - dt * vy, bz = z - dt * vz;
        return detail::trilerp(f, sx, sy, sz, ox, oy, oz, h, bx, by, bz);
    };
#pragma omp parallel for schedule(static)
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i <= d.nx; ++i)
                g.u[g.uidx(i, j, k)] = trace_sample(
                    i * h, (j + 0.5) * h, (k + 0.5) * h, old.u, d.nx + 1, d.ny,
                    d.nz, 0.0, 0.5, 0.5);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j <= d.ny; ++j)
            for (int i = 0; i < d.nx; ++i)
                g.v[g.vidx(i, j, k)] = trace_sample(
                    (i + 0.5) * h, j * h, (k + 0.5) * h, old.v, d.nx, d.ny + 1,
                    d.nz, 0.5, 0.0, 0.5);
#pragma omp parallel for schedule(static)
    for (int k = 0; k <= d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i)
                g.w[g.widx(i, j, k)] = trace_sample(
                    (i + 0.5) * h, (j + 0.5) * h, k * h, old.w, d.nx, d.ny,
                    d.nz + 1, 0.5, 0.5, 0.0);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i)
                g.density[d.index(i, j, k)] = trace_sample(
                    (i + 0.5) * h, (j + 0.5) * h, (k + 0.5) * h, old.density,
                    d.nx, d.ny, d.nz, 0.5, 0.5, 0.5);
}

/// Buoyancy: vertical faces gain dt * beta * (face-averaged density).
inline void apply_forces(MacGrid& g, double dt, const SimConfig& cfg) {
    const VoxelDomain& d = g.domain;
    for (int k = 0; k < d.nz; ++k)
        for (int j = 1; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                const double rho_face = 0.5 * (g.density[d.index(i, j - 1, k)] +
                                               g.density[d.index(i, j, k)]);
                g.v[g.vidx(i, j, k)] += dt * cfg.buoyancy * rho_face;
            }
}

/// Dimensionless right-hand side: b_i = -(raw MAC face-difference
/// divergence) on Fluid cells, zero on Boundary cells, mean-projected for
/// compatibility. The prescribed boundary-face velocities (inlet, walls,
/// obstacle motion) enter through the face differences themselves.
inline std::vector<double> build_rhs(const MacGrid& g) {
    const VoxelDomain& d = g.domain;
    std::vector<double> b(d.size(), 0.0);
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                const int c = d.index(i, j, k);
                if (d.labels[c] == CellLabel::Boundary) continue;
                const double div = g.u[g.uidx(i + 1, j, k)] - g.u[g.uidx(i, j, k)] +
                                   g.v[g.vidx(i, j + 1, k)] - g.v[g.vidx(i, j, k)] +
                                   g.w[g.widx(i, j, k + 1)] - g.w[g.widx(i, j, k)];
                b[c] = -div;
            }
    remove_fluid_mean(b, d);
    return b;
}

/// Max |divergence| over Fluid cells, for projection diagnostics.
inline double max_divergence(const MacGrid& g) {
    const VoxelDomain& d = g.domain;
    double mx = 0.0;
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                const int c = d.index(i, j, k);
                if (d.labels[c] == CellLabel::Boundary) continue;
                const double div = g.u[g.uidx(i + 1, j, k)] - g.u[g.uidx(i, j, k)] +
                                   g.v[g.vidx(i, j + 1, k)] - g.v[g.vidx(i, j, k)] +
                                   g.w[g.widx(i, j, k + 1)] - g.w[g.widx(i, j, k)];
                mx = std::max(mx, std::abs(div));
            }
    return mx;
}

/// Solver plug-in for the projection: gets (A, b) and returns a report.
using PressureSolver = std::function<SolveReport(
    const SparseMatrix&, const std::vector<double>&, const VoxelDomain&)>;

/// Pressure projection: assemble the dimensionless Poisson system for the
/// current labels, solve, and subtract the (dimensionless) pressure
/// gradient from the Fluid-Fluid faces. Boundary faces are re-prescribed.
inline SolveReport pressure_project(MacGrid& g, double t, const SimConfig& cfg,
                                    const PressureSolver& solver) {
    const VoxelDomain& d = g.domain;
    const SparseMatrix a = assemble_poisson(d);
    const std::vector<double> b = build_rhs(g);
    SolveReport rep = solver(a, b, d);
    std::vector<double> p = rep.x;
    remove_fluid_mean(p, d);

    auto fluid = [&](int i, int j, int k) { return d.is_fluid(i, j, k); };
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 1; i < d.nx; ++i)
                if (fluid(i - 1, j, k) && fluid(i, j, k))
                    g.u[g.uidx(i, j, k)] -=
                        p[d.index(i, j, k)] - p[d.index(i - 1, j, k)];
    for (int k = 0; k < d.nz; ++k)
        for (int j = 1; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i)
                if (fluid(i, j - 1, k) && fluid(i, j, k))
                    g.v[g.vidx(i, j, k)] -=
                        p[d.index(i, j, k)] - p[d.index(i, j - 1, k)];
    for (int k = 1; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i)
                if (fluid(i, j, k - 1) && fluid(i, j, k))
                    g.w[g.widx(i, j, k)] -=
                        p[d.index(i, j, k)] - p[d.index(i, j, k - 1)];
    enforce_boundary_faces(g, t, cfg);
    return rep;
}

// Snapshot: "DCDF" + three u32 dims (16-byte header), then f32 density.
inline void save_snapshot(const MacGrid& g, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.write("DCDF", 4);
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(g.domain.nx),
                                   static_cast<std::uint32_t>(g.domain.ny),
                                   static_cast<std::uint32_t>(g.domain.nz)};
    os.write(reinterpret_cast<const char*>(dims), 12);
    std::vector<float> buf(g.density.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
        buf[i] = static_cast<float>(g.density[i]);
    os.write(reinterpret_cast<const char*>(buf.data()), 4l * buf.size());
}

struct FrameResult {
    int frame = 0;
    SolveReport report;
    double div_before = 0.0;
    double div_after = 0.0;
};

/// Step the smoke simulation `frames` times: advect, buoyancy, obstacle
/// update, pressure projection. The density source is the inlet disk (the
/// bottom two cell layers inside the inlet radius are refilled each frame).
inline std::vector<FrameResult> run_simulation(
    const SimConfig& cfg, const PressureSolver& solver,
    const std::function<void(int, const MacGrid&)>& frame_sink = {}) {
    cfg.validate();
    VoxelDomain base(cfg.grid_n, cfg.grid_n, cfg.grid_n, 1.0 / cfg.grid_n);
    MacGrid grid(update_obstacle(base, 0.0, cfg.obstacle));
    enforce_boundary_faces(grid, 0.0, cfg);
    std::vector<FrameResult> results;
    if (frame_sink) frame_sink(0, grid);
    for (int f = 1; f <= cfg.frames; ++f) {
        const double t = f * cfg.dt;
        advect(grid, cfg.dt);
        apply_forces(grid, cfg.dt, cfg);
        // Seed smoke at the inlet.
        const double h = 1.0 / cfg.grid_n;
        for (int k = 0; k < cfg.grid_n; ++k)
            for (int j = 0; j < std::min(2, cfg.grid_n); ++j)
                for (int i = 0; i < cfg.grid_n; ++i) {
                    const double x = (i + 0.5) * h - 0.5,
                                 z = (k + 0.5) * h - 0.5;
                    if (x * x + z * z <= cfg.inlet_radius * cfg.inlet_radius &&
                        grid.domain.is_fluid(i, j, k))
                        grid.density[grid.domain.index(i, j, k)] = 1.0;
                }
        // Time-dependent geometry: relabel, then re-prescribe faces.
        VoxelDomain labels = update_obstacle(base, t, cfg.obstacle);
        grid.domain = labels;
        enforce_boundary_faces(grid, t, cfg);

        FrameResult fr;
        fr.frame = f;
        fr.div_before = max_divergence(grid);
        fr.report = pressure_project(grid, t, cfg, solver);
        fr.div_after = max_divergence(grid);
        results.push_back(std::move(fr));
        if (frame_sink) frame_sink(f, grid);
    }
    return results;
}

} // namespace dcdm

#endif
