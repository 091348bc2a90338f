// Command-line entry point: dataset generation, training, solver
// benchmarking, and smoke simulation. Exit codes: 0 success, 2 usage
// error, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dcdm/dcdm.hpp"

namespace fs = std::filesystem;

namespace {

void echo_config(const CLI::App& app, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream os(dir / "effective_config.txt");
    os << app.config_to_str(true, false);
}

int cmd_gen_dataset(int grid, int m, int count, int theta, std::uint64_t seed,
                    const std::string& out, const std::string& checkpoint) {
    if (grid % 2) throw std::invalid_argument("grid must be even (pooling constraint)");
    const dcdm::VoxelDomain domain = dcdm::VoxelDomain::full_cube(grid, 1.0 / grid);
    const dcdm::SparseMatrix a = dcdm::assemble_poisson(domain);
    if (m <= 0) m = std::min<int>(static_cast<int>(domain.fluid_count()) / 2, 1024);
    if (theta < 0) theta = m / 20;

    std::function<void(const dcdm::LanczosResult&)> ckpt;
    if (!checkpoint.empty()) {
        ckpt = [&](const dcdm::LanczosResult& lr) {
            std::ofstream os(checkpoint, std::ios::binary);
            const std::uint32_t cols = static_cast<std::uint32_t>(lr.q.size());
            const std::uint32_t n = static_cast<std::uint32_t>(lr.q.front().size());
            os.write("DCDL", 4);
            os.write(reinterpret_cast<const char*>(&cols), 4);
            os.write(reinterpret_cast<const char*>(&n), 4);
            for (const auto& col : lr.q)
                os.write(reinterpret_cast<const char*>(col.data()), 8l * n);
            os.write(reinterpret_cast<const char*>(lr.alpha.data()),
                     8l * lr.alpha.size());
            os.write(reinterpret_cast<const char*>(lr.beta.data()),
                     8l * lr.beta.size());
        };
    }

    std::cout << "gen-dataset: grid=" << grid << "^3 m=" << m
              << " count=" << count << " theta=" << theta << " seed=" << seed
              << "\n";
    const dcdm::LanczosResult lan = dcdm::lanczos(a, m, seed, &domain, 64, ckpt);
    if (lan.breakdown_at)
        std::cout << "lanczos: early breakdown at column " << *lan.breakdown_at
                  << ", continuing with " << lan.m() << " columns\n";
    const dcdm::RitzBasis basis = dcdm::ritz_vectors(lan);
    dcdm::TrainingSet set = dcdm::sample_training_vectors(basis, count, theta, seed);
    set.nx = set.ny = set.nz = grid;
    dcdm::save_training_set(set, out);
    std::cout << "wrote " << set.vectors.size() << " vectors to " << out << "\n";
    return 0;
}

int cmd_train(const std::string& dataset_path, int grid, int epochs, double lr,
              int batch, std::uint64_t seed, const std::string& out) {
    const dcdm::TrainingSet set = dcdm::load_training_set(dataset_path);
    if (set.nx && set.nx != grid)
        throw std::invalid_argument("dataset grid does not match --grid");
    const dcdm::VoxelDomain domain = dcdm::VoxelDomain::full_cube(grid, 1.0 / grid);
    const dcdm::SparseMatrix a = dcdm::assemble_poisson(domain);

    dcdm::TrainConfig cfg;
    cfg.learning_rate = lr;
    cfg.epochs = epochs;
    cfg.batch_size = batch;
    cfg.seed = seed;
    dcdm::ModelWeights w0 = dcdm::make_model<float>(grid, seed);
    auto [weights, hist] = dcdm::train(w0, set, a, grid, grid, grid, cfg);
    dcdm::save_weights(weights, out);

    const fs::path csv = fs::path(out).replace_extension(".loss.csv");
    std::ofstream os(csv);
    os << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < hist.train_loss.size(); ++e)
        os << e << "," << hist.train_loss[e] << "," << hist.val_loss[e] << "\n";
    std::cout << "trained " << hist.train_loss.size() << " epochs; best epoch "
              << hist.best_epoch << "; weights -> " << out << "; losses -> "
              << csv.string() << "\n";
    if (hist.aborted) std::cout << "training aborted early (divergence or collapse)\n";
    return 0;
}

int cmd_bench(const dcdm::BenchSpec& spec, const std::string& out_dir) {
    const dcdm::BenchReport report = dcdm::run_bench(spec);
    fs::create_directories(out_dir);
    std::ofstream summary(fs::path(out_dir) / "bench.csv");
    summary << "solver,iterations,seconds,converged\n";
    std::printf("%-8s %10s %10s %10s\n", "solver", "n_r", "t_r (s)", "converged");
    for (const auto& e : report.entries) {
        std::printf("%-8s %10d %10.3f %10s\n", e.solver.c_str(), e.iterations,
                    e.seconds, e.converged ? "yes" : "no");
        summary << e.solver << "," << e.iterations << "," << e.seconds << ","
                << (e.converged ? 1 : 0) << "\n";
        dcdm::SolveReport rep;
        rep.residual_history = e.residual_history;
        rep.iterations = e.iterations;
        rep.converged = e.converged;
        rep.write_csv((fs::path(out_dir) / (e.solver + "_residuals.csv")).string());
    }
    return 0;
}

int cmd_simulate(dcdm::SimConfig& sim, const std::string& model_path,
                 const std::string& out_dir) {
    sim.validate();
    fs::create_directories(out_dir);

    std::optional<dcdm::ModelWeights> model;
    if (sim.solver == dcdm::SolverKind::Dcdm) {
        if (model_path.empty())
            throw std::invalid_argument("--solver dcdm requires --model");
        model = dcdm::load_weights<float>(model_path);
        const std::string warn = dcdm::tier_mismatch_warning(*model, sim.grid_n);
        if (!warn.empty()) std::cerr << "warning: " << warn << "\n";
    }

    dcdm::PressureSolver solver = [&](const dcdm::SparseMatrix& a,
                                      const std::vector<double>& b,
                                      const dcdm::VoxelDomain& dom) {
        const std::vector<double> x0(a.n, 0.0);
        switch (sim.solver) {
            case dcdm::SolverKind::Cg:
                return dcdm::cg(a, b, x0, sim.solver_cfg);
            case dcdm::SolverKind::Icpcg:
                return dcdm::pcg(a, b, x0, dcdm::ic0_factor(a, 1e-6), sim.solver_cfg);
            case dcdm::SolverKind::Dpcg:
                return dcdm::deflated_pcg(
                    a, b, dcdm::deflation_basis(a, dom, 8, sim.seed), sim.solver_cfg);
            case dcdm::SolverKind::Dcdm:
                return dcdm::dcdm(a, b, x0, dcdm::as_oracle(*model, dom), sim.solver_cfg);
        }
        throw std::logic_error("unreachable");
    };

    std::ofstream residuals(fs::path(out_dir) / "residuals.csv");
    residuals << "frame,iterations,first_residual,last_residual,converged\n";
    auto sink = [&](int frame, const dcdm::MacGrid& g) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04d.dcdf", frame);
        dcdm::save_snapshot(g, (fs::path(out_dir) / name).string());
    };
    const auto results = dcdm::run_simulation(sim, solver, sink);
    for (const auto& fr : results) {
        residuals << fr.frame << "," << fr.report.iterations << ","
                  << fr.report.residual_history.front() << ","
                  << fr.report.residual_history.back() << ","
                  << (fr.report.converged ? 1 : 0) << "\n";
    }
    std::cout << "simulated " << results.size() << " frames -> " << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep conjugate direction method toolkit"};
    app.set_config("--config", "", "flat key=value config file; flags override");
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "master 64-bit seed")->capture_default_str();

    // gen-dataset
    auto* gen = app.add_subcommand("gen-dataset", "generate Ritz-based training vectors");
    int g_grid = 16, g_m = -1, g_count = 2000, g_theta = -1;
    std::string g_out = "dataset.dcds", g_ckpt;
    gen->add_option("--grid", g_grid, "grid resolution per axis (even)")->capture_default_str();
    gen->add_option("--m", g_m, "Lanczos/Ritz basis size (default n_fluid/2 capped at 1024)");
    gen->add_option("--count", g_count, "number of training vectors")->capture_default_str();
    gen->add_option("--theta", g_theta, "boosted-band extension (default m/20)");
    gen->add_option("--out", g_out, "output dataset file")->capture_default_str();
    gen->add_option("--checkpoint", g_ckpt, "Lanczos checkpoint file (written every 64 columns)");

    // train
    auto* tr = app.add_subcommand("train", "train the direction network");
    std::string t_dataset, t_out = "model.dcdw";
    int t_grid = 16, t_epochs = 20, t_batch = 16;
    double t_lr = 1e-4;
    tr->add_option("--dataset", t_dataset, "DCDS dataset file")->required();
    tr->add_option("--grid", t_grid, "grid resolution per axis")->capture_default_str();
    tr->add_option("--epochs", t_epochs, "training epochs")->capture_default_str();
    tr->add_option("--lr", t_lr, "ADAM learning rate")->capture_default_str();
    tr->add_option("--batch", t_batch, "mini-batch size")->capture_default_str();
    tr->add_option("--out", t_out, "output weight file")->capture_default_str();

    // bench
    auto* be = app.add_subcommand("bench", "compare solvers on one system");
    dcdm::BenchSpec spec;
    std::string b_domain = "full", b_solvers = "cg", b_rhs = "random",
                b_out = "bench_out";
    int b_window = 0;
    be->add_option("--grid", spec.grid_n, "grid resolution per axis")->capture_default_str();
    be->add_option("--domain", b_domain, "full|sphere|box|mask:FILE")->capture_default_str();
    be->add_option("--solvers", b_solvers, "comma-separated: cg,icpcg,dpcg,dcdm")->capture_default_str();
    be->add_option("--tol", spec.rel_tol, "relative residual tolerance")->capture_default_str();
    be->add_option("--max-iter", spec.max_iter, "iteration cap")->capture_default_str();
    be->add_option("--rhs", b_rhs, "random|sim|dataset:FILE")->capture_default_str();
    be->add_option("--model", spec.model_path, "DCDW weights (required for dcdm)");
    be->add_option("--window", b_window, "A-orthogonalization window (0 = full)")->capture_default_str();
    be->add_option("--out", b_out, "output directory")->capture_default_str();

    // simulate
    auto* si = app.add_subcommand("simulate", "run the smoke simulation");
    dcdm::SimConfig sim;
    std::string s_solver = "cg", s_obstacle = "none", s_model, s_out = "sim_out";
    si->add_option("--grid", sim.grid_n, "grid resolution per axis (even)")->capture_default_str();
    si->add_option("--frames", sim.frames, "number of frames")->capture_default_str();
    si->add_option("--dt", sim.dt, "time step (s)")->capture_default_str();
    si->add_option("--solver", s_solver, "cg|icpcg|dpcg|dcdm")->capture_default_str();
    si->add_option("--model", s_model, "DCDW weights for dcdm");
    si->add_option("--obstacle", s_obstacle, "none|sphere|box|mask:FILE")->capture_default_str();
    si->add_option("--tol", sim.solver_cfg.rel_tol, "solver tolerance")->capture_default_str();
    si->add_option("--buoyancy", sim.buoyancy, "buoyancy coefficient")->capture_default_str();
    si->add_option("--out", s_out, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            echo_config(app, fs::path(g_out).parent_path().empty()
                                 ? fs::path(".")
                                 : fs::path(g_out).parent_path());
            return cmd_gen_dataset(g_grid, g_m, g_count, g_theta, seed, g_out, g_ckpt);
        }
        if (tr->parsed()) {
            echo_config(app, fs::path(t_out).parent_path().empty()
                                 ? fs::path(".")
                                 : fs::path(t_out).parent_path());
            return cmd_train(t_dataset, t_grid, t_epochs, t_lr, t_batch, seed, t_out);
        }
        if (be->parsed()) {
            spec.seed = seed;
            if (b_domain == "full") spec.domain = dcdm::BenchSpec::Domain::FullCube;
            else if (b_domain == "sphere") spec.domain = dcdm::BenchSpec::Domain::Sphere;
            else if (b_domain == "box") spec.domain = dcdm::BenchSpec::Domain::Box;
            else if (b_domain.rfind("mask:", 0) == 0) {
                spec.domain = dcdm::BenchSpec::Domain::Mask;
                spec.mask_path = b_domain.substr(5);
            } else throw std::invalid_argument("unknown domain: " + b_domain);
            if (b_rhs == "random") spec.rhs = dcdm::BenchSpec::RhsSource::Random;
            else if (b_rhs == "sim") spec.rhs = dcdm::BenchSpec::RhsSource::SimFrame;
            else if (b_rhs.rfind("dataset:", 0) == 0) {
                spec.rhs = dcdm::BenchSpec::RhsSource::Dataset;
                spec.dataset_path = b_rhs.substr(8);
            } else throw std::invalid_argument("unknown rhs source: " + b_rhs);
            spec.ortho = b_window > 0 ? dcdm::OrthoPolicy::window(b_window)
                                      : dcdm::OrthoPolicy::full();
            std::stringstream ss(b_solvers);
            std::string item;
            spec.solvers.clear();
            while (std::getline(ss, item, ','))
                if (!item.empty()) spec.solvers.push_back(item);
            echo_config(app, b_out);
            return cmd_bench(spec, b_out);
        }
        if (si->parsed()) {
            sim.seed = seed;
            if (s_solver == "cg") sim.solver = dcdm::SolverKind::Cg;
            else if (s_solver == "icpcg") sim.solver = dcdm::SolverKind::Icpcg;
            else if (s_solver == "dpcg") sim.solver = dcdm::SolverKind::Dpcg;
            else if (s_solver == "dcdm") sim.solver = dcdm::SolverKind::Dcdm;
            else throw std::invalid_argument("unknown solver: " + s_solver);
            if (s_obstacle == "none") sim.obstacle.kind = dcdm::ObstacleSpec::Kind::None;
            else if (s_obstacle == "sphere") sim.obstacle.kind = dcdm::ObstacleSpec::Kind::Sphere;
            else if (s_obstacle == "box") sim.obstacle.kind = dcdm::ObstacleSpec::Kind::RotatingBox;
            else if (s_obstacle.rfind("mask:", 0) == 0) {
                sim.obstacle.kind = dcdm::ObstacleSpec::Kind::StaticMask;
                sim.obstacle.mask_path = s_obstacle.substr(5);
            } else throw std::invalid_argument("unknown obstacle: " + s_obstacle);
            echo_config(app, s_out);
            return cmd_simulate(sim, s_model, s_out);
        }
    } catch (const dcdm::DegenerateDirection& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const dcdm::FactorBreakdown& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const dcdm::DeflationBreakdown& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const dcdm::NoPositiveSpectrum& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const dcdm::CollapsedOutput& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
