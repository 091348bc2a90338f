#ifndef DCDM_BENCH_HPP
#define DCDM_BENCH_HPP

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcdm/fluid.hpp"
#include "dcdm/lanczos.hpp"
#include "dcdm/network.hpp"
#include "dcdm/poisson.hpp"
#include "dcdm/solvers.hpp"
#include "dcdm/training.hpp"

namespace dcdm {

/// Ritz vectors with clearly positive Ritz values, for use as a deflation
/// space (the near-null constant mode would make W'AW singular).
inline std::vector<std::vector<double>> deflation_basis(
    const SparseMatrix& a, const VoxelDomain& domain, int k,
    std::uint64_t seed) {
    const int m = std::min<int>(4 * k + 8, a.n - 1);
    const LanczosResult lan = lanczos(a, m, seed, &domain);
    const RitzBasis basis = ritz_vectors(lan);
    const double tol = 1e-8 * basis.lambdas.back();
    std::vector<std::vector<double>> w;
    for (int i = 0; i < basis.m() && static_cast<int>(w.size()) < k; ++i)
        if (basis.lambdas[i] > tol) w.push_back(basis.q[i]);
    return w;
}

struct BenchSpec {
    int grid_n = 16;
    enum class Domain { FullCube, Sphere, Box, Mask } domain = Domain::FullCube;
    std::string mask_path;
    std::vector<std::string> solvers;  // subset of {cg, icpcg, dpcg, dcdm}
    double rel_tol = 1e-4;
    int max_iter = 5000;
    enum class RhsSource { Random, SimFrame, Dataset } rhs = RhsSource::Random;
    std::string dataset_path;
    std::uint64_t seed = 0;
    std::string model_path;          // required for dcdm
    OrthoPolicy ortho = OrthoPolicy::full();
    int deflation_k = 8;
};

struct BenchEntry {
    std::string solver;
    int iterations = 0;
    double seconds = 0.0;
    bool converged = false;
    std::vector<double> residual_history;
};

struct BenchReport {
    std::vector<BenchEntry> entries;
};

inline VoxelDomain bench_domain(const BenchSpec& spec) {
    VoxelDomain base(spec.grid_n, spec.grid_n, spec.grid_n, 1.0 / spec.grid_n);
    ObstacleSpec obs;
    switch (spec.domain) {
        case BenchSpec::Domain::FullCube: obs.kind = ObstacleSpec::Kind::None; break;
        case BenchSpec::Domain::Sphere: obs.kind = ObstacleSpec::Kind::Sphere; break;
        case BenchSpec::Domain::Box:
            obs.kind = ObstacleSpec::Kind::RotatingBox;
            obs.omega = 0.0;
            break;
        case BenchSpec::Domain::Mask:
            obs.kind = ObstacleSpec::Kind::StaticMask;
            obs.mask_path = spec.mask_path;
            break;
    }
    return update_obstacle(base, 0.0, obs);
}

inline std::vector<double> bench_rhs(const BenchSpec& spec,
                                     const VoxelDomain& domain,
                                     const SparseMatrix& a) {
    if (spec.rhs == BenchSpec::RhsSource::Random) {
        auto eng = make_engine(spec.seed, "bench/rhs");
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<double> b(a.n, 0.0);
        for (int i = 0; i < a.n; ++i)
            if (domain.labels[i] == CellLabel::Fluid) b[i] = gauss(eng);
        remove_fluid_mean(b, domain);
        const double nrm = norm2(b);
        for (double& v : b) v /= nrm;
        return b;
    }
    if (spec.rhs == BenchSpec::RhsSource::Dataset) {
        const TrainingSet set = load_training_set(spec.dataset_path);
        auto eng = make_engine(spec.seed, "bench/dataset-pick");
        std::uniform_int_distribution<std::size_t> pick(0, set.vectors.size() - 1);
        std::vector<double> b = set.vectors[pick(eng)];
        if (static_cast<int>(b.size()) != a.n)
            throw std::runtime_error("dataset vector length does not match grid");
        return b;
    }
    // SimFrame: run a short plume on this domain and take the last frame's rhs.
    SimConfig sim;
    sim.grid_n = spec.grid_n;
    sim.frames = 5;
    sim.solver_cfg.rel_tol = spec.rel_tol;
    if (spec.domain == BenchSpec::Domain::Sphere)
        sim.obstacle.kind = ObstacleSpec::Kind::Sphere;
    else if (spec.domain == BenchSpec::Domain::Box) {
        sim.obstacle.kind = ObstacleSpec::Kind::RotatingBox;
        sim.obstacle.omega = 0.0;
    } else if (spec.domain == BenchSpec::Domain::Mask) {
        sim.obstacle.kind = ObstacleSpec::Kind::StaticMask;
        sim.obstacle.mask_path = spec.mask_path;
    }
    PressureSolver cg_solver = [&](const SparseMatrix& aa,
                                   const std::vector<double>& bb,
                                   const VoxelDomain&) {
        return cg(aa, bb, std::vector<double>(aa.n, 0.0), sim.solver_cfg);
    };
    std::vector<double> rhs;
    MacGrid last(domain);
    auto sink = [&](int, const MacGrid& g) { last = g; };
    run_simulation(sim, cg_solver, sink);
    return build_rhs(last);
}

inline BenchReport run_bench(const BenchSpec& spec) {
    if (spec.solvers.empty()) throw std::invalid_argument("empty solver list");
    const VoxelDomain domain = bench_domain(spec);
    const SparseMatrix a = assemble_poisson(domain);
    const std::vector<double> b = bench_rhs(spec, domain, a);
    const std::vector<double> x0(a.n, 0.0);
    SolverConfig cfg{spec.rel_tol, spec.max_iter, spec.ortho};

    BenchReport report;
    for (const std::string& name : spec.solvers) {
        const auto t0 = std::chrono::steady_clock::now();
        SolveReport rep;
        if (name == "cg") {
            rep = cg(a, b, x0, cfg);
        } else if (name == "icpcg") {
            const SparseMatrix l = ic0_factor(a, 1e-6);
            rep = pcg(a, b, x0, l, cfg);
        } else if (name == "dpcg") {
            const auto w = deflation_basis(a, domain, spec.deflation_k, spec.seed);
            rep = deflated_pcg(a, b, w, cfg);
        } else if (name == "dcdm") {
            if (spec.model_path.empty())
                throw std::invalid_argument("dcdm requires a model path");
            const ModelWeights model = load_weights<float>(spec.model_path);
            rep = dcdm(a, b, x0, as_oracle(model, domain), cfg);
        } else {
            throw std::invalid_argument("unknown solver: " + name);
        }
        const auto t1 = std::chrono::steady_clock::now();
        BenchEntry e;
        e.solver = name;
        e.iterations = rep.iterations;
        e.seconds = std::chrono::duration<double>(t1 - t0).count();
        e.converged = rep.converged;
        e.residual_history = rep.residual_history;
        report.entries.push_back(std::move(e));
    }
    return report;
}

} // namespace dcdm

#endif
