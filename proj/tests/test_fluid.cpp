#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "dcdm/fluid.hpp"
#include "dcdm/rng.hpp"

using namespace dcdm;

namespace {

PressureSolver cg_solver(double tol = 1e-10) {
    return [tol](const SparseMatrix& a, const std::vector<double>& b,
                 const VoxelDomain&) {
        return cg(a, b, std::vector<double>(a.n, 0.0),
                  SolverConfig{tol, 5000, OrthoPolicy::full()});
    };
}

PressureSolver icpcg_solver(double tol = 1e-10) {
    return [tol](const SparseMatrix& a, const std::vector<double>& b,
                 const VoxelDomain&) {
        const SparseMatrix l = ic0_factor(a, 1e-6);
        return pcg(a, b, std::vector<double>(a.n, 0.0), l,
                   SolverConfig{tol, 5000, OrthoPolicy::full()});
    };
}

MacGrid random_grid(int n, std::uint64_t seed) {
    MacGrid g(VoxelDomain::full_cube(n, 1.0 / n));
    auto eng = make_engine(seed, "test/grid");
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& x : g.u) x = gauss(eng);
    for (double& x : g.v) x = gauss(eng);
    for (double& x : g.w) x = gauss(eng);
    return g;
}

} // namespace

TEST(Advect, ZeroVelocityIsIdentity) {
    MacGrid g(VoxelDomain::full_cube(8, 1.0 / 8.0));
    auto eng = make_engine(1, "test/density");
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (double& x : g.density) x = uni(eng);
    const std::vector<double> before = g.density;
    advect(g, 0.05);
    for (std::size_t i = 0; i < before.size(); ++i)
        EXPECT_NEAR(g.density[i], before[i], 1e-14);
}

TEST(Advect, UniformFieldsStayUniform) {
    MacGrid g(VoxelDomain::full_cube(8, 1.0 / 8.0));
    std::fill(g.u.begin(), g.u.end(), 0.3);
    std::fill(g.v.begin(), g.v.end(), -0.2);
    std::fill(g.w.begin(), g.w.end(), 0.1);
    std::fill(g.density.begin(), g.density.end(), 0.5);
    advect(g, 0.02);
    for (double x : g.u) EXPECT_NEAR(x, 0.3, 1e-13);
    for (double x : g.v) EXPECT_NEAR(x, -0.2, 1e-13);
    for (double x : g.w) EXPECT_NEAR(x, 0.1, 1e-13);
    for (double x : g.density) EXPECT_NEAR(x, 0.5, 1e-13);
}

TEST(Advect, LinearRampShiftsByVelocity) {
    const int n = 16;
    const double h = 1.0 / n;
    MacGrid g(VoxelDomain::full_cube(n, h));
    const double u0 = 0.5;
    std::fill(g.u.begin(), g.u.end(), u0);
    // density = x at cell centers
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                g.density[g.domain.index(i, j, k)] = (i + 0.5) * h;
    const double dt = 0.04;  // backtrace stays well inside the grid
    advect(g, dt);
    // Interior cells see density(x - u0*dt) = x - u0*dt exactly (trilinear
    // interpolation is exact on linear fields away from the clamp).
    const int i = n / 2, j = n / 2, k = n / 2;
    EXPECT_NEAR(g.density[g.domain.index(i, j, k)], (i + 0.5) * h - u0 * dt,
                1e-13);
}

TEST(Advect, InterpolationPreservesBounds) {
    MacGrid g = random_grid(8, 3);
    auto eng = make_engine(4, "test/density");
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (double& x : g.density) x = uni(eng);
    advect(g, 0.05);
    for (double x : g.density) {
        EXPECT_GE(x, -1e-12);
        EXPECT_LE(x, 1.0 + 1e-12);
    }
}

TEST(Buoyancy, SingleCellLiftsAdjacentFaces) {
    const int n = 8;
    MacGrid g(VoxelDomain::full_cube(n, 1.0 / n));
    const int i = 3, j = 3, k = 3;
    g.density[g.domain.index(i, j, k)] = 1.0;
    SimConfig cfg;
    cfg.grid_n = n;
    cfg.buoyancy = 2.0;
    const double dt = 0.1;
    apply_forces(g, dt, cfg);
    // The two vertical faces of the cell each average density over one
    // filled and one empty neighbor: dv = dt * beta * 0.5.
    EXPECT_NEAR(g.v[g.vidx(i, j, k)], dt * 2.0 * 0.5, 1e-14);
    EXPECT_NEAR(g.v[g.vidx(i, j + 1, k)], dt * 2.0 * 0.5, 1e-14);
    // A distant face is untouched.
    EXPECT_EQ(g.v[g.vidx(0, 1, 0)], 0.0);
}

TEST(Rhs, DivergenceFreeFieldGivesZero) {
    MacGrid g(VoxelDomain::full_cube(4, 0.25));
    std::fill(g.u.begin(), g.u.end(), 0.7);  // uniform flow: zero divergence
    const std::vector<double> b = build_rhs(g);
    for (double x : b) EXPECT_NEAR(x, 0.0, 1e-14);
}

TEST(Rhs, SingleFaceInflow) {
    const int n = 2;
    MacGrid g(VoxelDomain::full_cube(n, 0.5));
    // Interior u face between cells (0,0,0) and (1,0,0), flow in +x.
    g.u[g.uidx(1, 0, 0)] = 1.0;
    const std::vector<double> b = build_rhs(g);
    // Raw divergences: +1 at (0,0,0), -1 at (1,0,0); mean is zero already.
    EXPECT_NEAR(b[g.domain.index(0, 0, 0)], -1.0, 1e-14);
    EXPECT_NEAR(b[g.domain.index(1, 0, 0)], 1.0, 1e-14);
    double sum = 0.0;
    for (double x : b) sum += x;
    EXPECT_NEAR(sum, 0.0, 1e-13);
}

TEST(Rhs, AlwaysCompatible) {
    MacGrid g = random_grid(6, 7);
    const std::vector<double> b = build_rhs(g);
    double sum = 0.0;
    for (double x : b) sum += x;
    EXPECT_NEAR(sum, 0.0, 1e-10);
}

TEST(Projection, RemovesDivergence) {
    const int n = 8;
    MacGrid g = random_grid(n, 9);
    SimConfig cfg;
    cfg.grid_n = n;
    enforce_boundary_faces(g, 0.0, cfg);
    const double before = max_divergence(g);
    ASSERT_GT(before, 1e-3);
    pressure_project(g, 0.0, cfg, cg_solver(1e-12));
    EXPECT_LE(max_divergence(g), before * 1e-6);
}

TEST(Projection, SecondProjectionIsNoOp) {
    const int n = 8;
    MacGrid g = random_grid(n, 10);
    SimConfig cfg;
    cfg.grid_n = n;
    enforce_boundary_faces(g, 0.0, cfg);
    pressure_project(g, 0.0, cfg, cg_solver(1e-12));
    const MacGrid once = g;
    const SolveReport rep = pressure_project(g, 0.0, cfg, cg_solver(1e-12));
    // The second solve starts essentially converged.
    EXPECT_LE(rep.residual_history.front(), 1e-8);
    for (std::size_t i = 0; i < g.u.size(); ++i)
        EXPECT_NEAR(g.u[i], once.u[i], 1e-8);
}

TEST(Projection, SphereObstacleKeepsReduction) {
    const int n = 8;
    SimConfig cfg;
    cfg.grid_n = n;
    cfg.obstacle.kind = ObstacleSpec::Kind::Sphere;
    cfg.obstacle.radius = 0.2;
    VoxelDomain base(n, n, n, 1.0 / n);
    MacGrid g(update_obstacle(base, 0.0, cfg.obstacle));
    auto eng = make_engine(11, "test/grid");
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& x : g.u) x = gauss(eng);
    for (double& x : g.v) x = gauss(eng);
    for (double& x : g.w) x = gauss(eng);
    enforce_boundary_faces(g, 0.0, cfg);
    const double before = max_divergence(g);
    ASSERT_GT(before, 1e-3);
    pressure_project(g, 0.0, cfg, cg_solver(1e-12));
    EXPECT_LE(max_divergence(g), before * 1e-6);
}

TEST(Obstacle, SphereVoxelizationCountIsTimeInvariant) {
    VoxelDomain base(16, 16, 16, 1.0 / 16);
    ObstacleSpec obs;
    obs.kind = ObstacleSpec::Kind::Sphere;
    obs.radius = 0.25;
    const VoxelDomain d0 = update_obstacle(base, 0.0, obs);
    const VoxelDomain d1 = update_obstacle(base, 1.0, obs);
    EXPECT_EQ(d0.labels, d1.labels);
    EXPECT_LT(d0.fluid_count(), d0.size());
}

TEST(Obstacle, RotatingBoxLabelsChangeOverTime) {
    VoxelDomain base(16, 16, 16, 1.0 / 16);
    ObstacleSpec obs;
    obs.kind = ObstacleSpec::Kind::RotatingBox;
    obs.half_width = 0.2;
    obs.omega = 2.0;
    const VoxelDomain d0 = update_obstacle(base, 0.0, obs);
    const VoxelDomain d1 = update_obstacle(base, 0.3, obs);
    EXPECT_NE(d0.labels, d1.labels);
}

TEST(Obstacle, ZeroOmegaBoxIsStatic) {
    VoxelDomain base(16, 16, 16, 1.0 / 16);
    ObstacleSpec obs;
    obs.kind = ObstacleSpec::Kind::RotatingBox;
    obs.half_width = 0.2;
    obs.omega = 0.0;
    const VoxelDomain d0 = update_obstacle(base, 0.0, obs);
    const VoxelDomain d1 = update_obstacle(base, 0.7, obs);
    EXPECT_EQ(d0.labels, d1.labels);
}

TEST(Obstacle, RigidVelocityOfRotatingBox) {
    ObstacleSpec obs;
    obs.kind = ObstacleSpec::Kind::RotatingBox;
    obs.omega = 3.0;
    obs.cx = obs.cz = 0.5;
    double ox, oy, oz;
    obstacle_velocity(obs, 0.5, 0.5, 0.7, 0.0, ox, oy, oz);
    EXPECT_NEAR(ox, 3.0 * 0.2, 1e-14);
    EXPECT_NEAR(oy, 0.0, 1e-14);
    EXPECT_NEAR(oz, 0.0, 1e-14);
    obstacle_velocity(obs, 0.8, 0.4, 0.5, 0.0, ox, oy, oz);
    EXPECT_NEAR(ox, 0.0, 1e-14);
    EXPECT_NEAR(oz, -3.0 * 0.3, 1e-14);
}

TEST(Simulation, ZeroFramesReturnsEmpty) {
    SimConfig cfg;
    cfg.grid_n = 8;
    cfg.frames = 0;
    const auto results = run_simulation(cfg, cg_solver());
    EXPECT_TRUE(results.empty());
}

TEST(Simulation, OddGridRejected) {
    SimConfig cfg;
    cfg.grid_n = 9;
    EXPECT_THROW(run_simulation(cfg, cg_solver()), std::invalid_argument);
}

TEST(Simulation, PlumeDivergenceReductionEachFrame) {
    SimConfig cfg;
    cfg.grid_n = 8;
    cfg.frames = 5;
    cfg.obstacle.kind = ObstacleSpec::Kind::Sphere;
    cfg.obstacle.cy = 0.6;
    cfg.obstacle.radius = 0.2;
    const auto results = run_simulation(cfg, cg_solver(1e-10));
    ASSERT_EQ(results.size(), 5u);
    for (const auto& fr : results) {
        EXPECT_TRUE(fr.report.converged) << "frame " << fr.frame;
        if (fr.div_before > 1e-8)
            EXPECT_LE(fr.div_after, fr.div_before / 1e4)
                << "frame " << fr.frame;
    }
}

TEST(Simulation, SolversProduceSameFields) {
    SimConfig cfg;
    cfg.grid_n = 8;
    cfg.frames = 3;
    MacGrid last_cg(VoxelDomain::full_cube(8, 1.0 / 8.0));
    MacGrid last_ic = last_cg;
    run_simulation(cfg, cg_solver(1e-10),
                   [&](int, const MacGrid& g) { last_cg = g; });
    run_simulation(cfg, icpcg_solver(1e-10),
                   [&](int, const MacGrid& g) { last_ic = g; });
    for (std::size_t i = 0; i < last_cg.u.size(); ++i)
        EXPECT_NEAR(last_cg.u[i], last_ic.u[i], 1e-6);
    for (std::size_t i = 0; i < last_cg.v.size(); ++i)
        EXPECT_NEAR(last_cg.v[i], last_ic.v[i], 1e-6);
    for (std::size_t i = 0; i < last_cg.density.size(); ++i)
        EXPECT_NEAR(last_cg.density[i], last_ic.density[i], 1e-6);
}

TEST(Snapshot, HeaderAndPayloadSize) {
    MacGrid g(VoxelDomain::full_cube(4, 0.25));
    const auto path = std::filesystem::temp_directory_path() / "dcdm_f.dcdf";
    save_snapshot(g, path.string());
    std::ifstream is(path, std::ios::binary);
    char magic[4];
    is.read(magic, 4);
    EXPECT_EQ(std::string(magic, 4), "DCDF");
    is.seekg(0, std::ios::end);
    EXPECT_EQ(static_cast<std::size_t>(is.tellg()), 16u + 4u * 64u);
    std::filesystem::remove(path);
}
