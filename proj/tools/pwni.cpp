// Command-line front end: run, compare, multiscale-check, calibrate-bg.

#include "pwni/circuit_oracle.hpp"
#include "pwni/io.hpp"
#include "pwni/metrics.hpp"
#include "pwni/timestepper.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

using namespace pwni;

struct GlobalOptions {
    std::string output_dir;
    double cadence = -1.0;
    std::string snapshots;
    unsigned threads = 0;
    long seed = 0;
    bool lenient = false;
};

RunConfig load(const std::string& path, const GlobalOptions& g) {
    RunConfig cfg = load_config(path, g.lenient ? ParseMode::lenient : ParseMode::strict);
    for (const auto& w : cfg.warnings) {
        std::cerr << "warning: " << w << '\n';
    }
    if (!g.output_dir.empty()) {
        cfg.output_dir = g.output_dir;
    }
    if (g.cadence >= 0.0) {
        cfg.outputs.cadence = g.cadence;
    }
    if (!g.snapshots.empty()) {
        cfg.outputs.snapshots = g.snapshots == "on";
    }
    if (g.threads > 0) {
        cfg.setup.kernel.threads = g.threads;
    }
    std::filesystem::create_directories(cfg.output_dir);
    return cfg;
}

void print_losses(const char* label, const LossSummary& l) {
    std::printf("%s losses [J]: superconductor %.6e  contact %.6e  joint %.6e  closed-loop %.6e  total %.6e\n",
                label, l.superconductor, l.contact, l.joint, l.closed_loop, l.total());
}

void print_stats(const char* label, const RunStats& s) {
    std::printf("%s: %d steps, %d Newton iterations (max %d per step), %d substeps, "
                "max KCL residual %.3e A, wall %.2f s\n",
                label, s.steps, s.newton_iterations, s.max_newton_iterations, s.substeps,
                s.max_kcl_residual, s.wall_seconds);
}

int cmd_run(const std::string& path, const GlobalOptions& g) {
    const RunConfig cfg = load(path, g);
    const PcrModel model(cfg.setup);
    TimeSeriesRecord rec;
    try {
        rec = run(model, cfg.outputs);
    } catch (const NonConvergence& e) {
        const auto dump = cfg.output_dir / (cfg.name + "_abort.snap");
        write_snapshots(dump, state_dump(e.last_state, model.mesh().hash()));
        std::fprintf(stderr, "last converged state at t = %.6g s written to %s\n", e.last_state.time, dump.c_str());
        throw;
    }
    const auto csv = cfg.output_dir / (cfg.name + ".csv");
    write_csv(csv, rec);
    std::printf("wrote %s (%zu rows, %zu columns)\n", csv.c_str(), rec.rows.size(), rec.columns.size());
    if (cfg.outputs.snapshots) {
        const auto snap = cfg.output_dir / (cfg.name + ".snap");
        write_snapshots(snap, {rec.mesh_hash, rec.snapshots});
        std::printf("wrote %s (%zu frames)\n", snap.c_str(), rec.snapshots.size());
    }
    print_stats("solver", rec.stats);
    print_losses("integrated", integrate_losses(rec));
    return 0;
}

int cmd_compare(const std::string& path, const GlobalOptions& g) {
    const RunConfig cfg = load(path, g);
    const PcrModel model(cfg.setup);
    OutputConfig outputs = cfg.outputs;
    outputs.cadence = 0.0;
    const TimeSeriesRecord rec = run(model, outputs);
    const OracleNetwork net = build_oracle_network(cfg.setup.coil, cfg.oracle);
    const double dt = cfg.oracle_dt > 0.0 ? cfg.oracle_dt : cfg.setup.solver.dt;
    const auto trace = transient_solve(net, cfg.setup.scenario, dt);

    const int p = cfg.setup.coil.n_parallel;
    std::vector<std::string> cols{"t_s", "V_coil_solver_V", "V_coil_oracle_V"};
    for (int k = 1; k <= p; ++k) {
        for (const char* side : {"in", "out"}) {
            cols.push_back("I_" + std::string(side) + "_" + std::to_string(k) + "_solver_A");
            cols.push_back("I_" + std::string(side) + "_" + std::to_string(k) + "_oracle_A");
        }
    }
    // Pair every oracle sample with the solver row at the same time.
    const auto ts = rec.series("t_s");
    std::vector<std::vector<double>> rows;
    double max_dev = 0.0;
    double sum_sq = 0.0;
    std::size_t n_dev = 0;
    double i_scale = 1.0;
    for (const auto& s : trace) {
        i_scale = std::max(i_scale, std::abs(s.state.i_coil));
    }
    std::size_t r = 0;
    for (const auto& s : trace) {
        while (r + 1 < ts.size() && ts[r] < s.time - 1.0e-9) {
            ++r;
        }
        if (std::abs(ts[r] - s.time) > 1.0e-9) {
            continue;
        }
        const auto& row = rec.rows[r];
        std::vector<double> out{s.time, row[rec.column("V_coil_V")], s.state.v_coil};
        for (int k = 0; k < p; ++k) {
            const double sin = row[rec.column("I_in_" + std::to_string(k + 1) + "_A")];
            const double sout = row[rec.column("I_out_" + std::to_string(k + 1) + "_A")];
            const double oin = s.state.i_in[static_cast<std::size_t>(k)];
            const double oout = s.state.i_out[static_cast<std::size_t>(k)];
            out.insert(out.end(), {sin, oin, sout, oout});
            for (double d : {sin - oin, sout - oout}) {
                max_dev = std::max(max_dev, std::abs(d));
                sum_sq += d * d;
                ++n_dev;
            }
        }
        rows.push_back(std::move(out));
    }
    const auto csv = cfg.output_dir / (cfg.name + "_compare.csv");
    std::ofstream os(csv, std::ios::binary);
    write_csv(os, cols, rows);
    const double rms = n_dev ? std::sqrt(sum_sq / static_cast<double>(n_dev)) : 0.0;
    std::printf("wrote %s (%zu rows)\n", csv.c_str(), rows.size());
    std::printf("terminal current deviation: max %.6e A (%.4f%% of peak), rms %.6e A (%.4f%% of peak)\n",
                max_dev, 100.0 * max_dev / i_scale, rms, 100.0 * rms / i_scale);
    const double i_final = source_current(cfg.setup.scenario.profile, cfg.setup.scenario.t_end);
    if (!cfg.setup.scenario.closed_loop && i_final != 0.0) {
        const OracleSolution ss = steady_split(net, i_final);
        for (int k = 0; k < p; ++k) {
            std::printf("steady split tape %d: in %.6f A  out %.6f A\n", k + 1,
                        ss.i_in[static_cast<std::size_t>(k)], ss.i_out[static_cast<std::size_t>(k)]);
        }
    }
    const auto taus = decay_time_constants(net, false);
    if (!taus.empty()) {
        std::printf("slowest charging time constant: %.6f s\n", taus.front());
    }
    return 0;
}

int cmd_multiscale(const std::string& path, const GlobalOptions& g) {
    RunConfig cfg = load(path, g);
    if (!cfg.setup.multiscale) {
        throw SpecError("multiscale-check needs a multiscale section");
    }
    OutputConfig outputs = cfg.outputs;
    outputs.snapshots = true;
    ModelSetup full_setup = cfg.setup;
    full_setup.multiscale.reset();
    const PcrModel full(full_setup);
    const PcrModel ms(cfg.setup);
    const TimeSeriesRecord rf = run(full, outputs);
    const TimeSeriesRecord rm = run(ms, outputs);

    // J is compared on the multi-scale elements; coarse strips see the
    // overlap mean of the full model's finer elements.
    std::vector<std::vector<double>> ref;
    std::vector<std::vector<double>> cand;
    for (std::size_t k = 0; k < rf.snapshots.size() && k < rm.snapshots.size(); ++k) {
        ref.push_back(project_elements(full.mesh(), rf.snapshots[k].j, ms.mesh()));
        cand.push_back(rm.snapshots[k].j);
    }
    const LossSummary lf = integrate_losses(rf);
    const LossSummary lm = integrate_losses(rm);
    const double err = (lm.total() - lf.total()) / lf.total();
    const double r2 = compute_r_squared(ref, cand);
    const double speedup = rf.stats.wall_seconds / rm.stats.wall_seconds;

    write_csv(cfg.output_dir / (cfg.name + "_full.csv"), rf);
    write_csv(cfg.output_dir / (cfg.name + "_multiscale.csv"), rm);
    std::ofstream os(cfg.output_dir / (cfg.name + "_metrics.csv"), std::ios::binary);
    write_csv(os, {"loss_full_J", "loss_multiscale_J", "loss_rel_error", "r_squared", "wall_full_s",
                   "wall_multiscale_s", "speedup", "analyzed_turns"},
              {{lf.total(), lm.total(), err, r2, rf.stats.wall_seconds, rm.stats.wall_seconds, speedup,
                static_cast<double>(ms.layout().n_analyzed())}});
    print_losses("full", lf);
    print_losses("multi-scale", lm);
    std::printf("loss relative error %.4f%%, R^2 of J %.5f, %d analyzed turns of %d\n", 100.0 * err, r2,
                ms.layout().n_analyzed(), cfg.setup.coil.n_turns);
    std::printf("wall time full %.2f s, multi-scale %.2f s, speedup %.2fx\n", rf.stats.wall_seconds,
                rm.stats.wall_seconds, speedup);
    return 0;
}

int cmd_calibrate(const std::string& path, const GlobalOptions& g) {
    const RunConfig cfg = load(path, g);
    const auto& bg = cfg.setup.scenario.background;
    if (!bg) {
        throw SpecError("calibrate-bg needs scenario.background");
    }
    const CoilSpec& c = cfg.setup.coil;
    const double r = 0.5 * (c.inner_radius + c.outer_radius());
    const FieldSample f = background_unit_field(*bg, r, c.axial_center);
    std::printf("background pair: radius %.6g m, offset %.6g m, turns %.6g\n", bg->radius, bg->offset, bg->turns);
    std::printf("peak B_r at r = %.6g m, z = %.6g m: %.6e T (amplitude %.6g A, %.6g Hz)\n", r, c.axial_center,
                std::abs(bg->amplitude * f.br), bg->amplitude, bg->frequency);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parallel-wound no-insulation coil simulator"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("--output-dir", g.output_dir, "Directory for CSV and snapshot output");
    app.add_option("--cadence", g.cadence, "Output cadence in seconds (0 = every step)");
    app.add_option("--snapshots", g.snapshots, "Write J snapshots")->check(CLI::IsMember({"on", "off"}));
    app.add_option("--threads", g.threads, "Threads for kernel assembly");
    app.add_option("--seed", g.seed, "Reserved; the solver is deterministic");
    auto* strict = app.add_flag("--strict", "Unknown config keys are errors (default)");
    app.add_flag("--lenient", g.lenient, "Unknown config keys are warnings")->excludes(strict);
    app.fallthrough();

    std::string config;
    auto* run_cmd = app.add_subcommand("run", "Run a scenario and write its time series");
    auto* compare_cmd = app.add_subcommand("compare", "Run the solver and the circuit oracle side by side");
    auto* ms_cmd = app.add_subcommand("multiscale-check", "Compare the multi-scale model with the full model");
    auto* cal_cmd = app.add_subcommand("calibrate-bg", "Report the calibrated background excitation");
    for (auto* sub : {run_cmd, compare_cmd, ms_cmd, cal_cmd}) {
        sub->add_option("config", config, "Configuration file")->required()->check(CLI::ExistingFile);
    }

    CLI11_PARSE(app, argc, argv);
    try {
        if (run_cmd->parsed()) {
            return cmd_run(config, g);
        }
        if (compare_cmd->parsed()) {
            return cmd_compare(config, g);
        }
        if (ms_cmd->parsed()) {
            return cmd_multiscale(config, g);
        }
        return cmd_calibrate(config, g);
    } catch (const NonConvergence& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
