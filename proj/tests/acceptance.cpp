// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// Usage: pwni_acceptance [criterion ...]   (default: all of 1-9)

#include "pwni/circuit_oracle.hpp"
#include "pwni/field_kernel.hpp"
#include "pwni/io.hpp"
#include "pwni/metrics.hpp"
#include "pwni/timestepper.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace pwni;

std::filesystem::path config_path(const std::string& name) {
    return std::filesystem::path(PWNI_CONFIG_DIR) / name;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::vector<double> window(const TimeSeriesRecord& r, const std::string& col, double t0, double t1) {
    const auto t = r.series("t_s");
    const auto y = r.series(col);
    std::vector<double> out;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] >= t0 - 1e-9 && t[k] <= t1 + 1e-9) {
            out.push_back(y[k]);
        }
    }
    return out;
}

double value_at(const TimeSeriesRecord& r, const std::string& col, double t) {
    const auto ts = r.series("t_s");
    const auto it = std::min_element(ts.begin(), ts.end(),
                                     [t](double a, double b) { return std::abs(a - t) < std::abs(b - t); });
    return r.rows[static_cast<std::size_t>(it - ts.begin())][r.column(col)];
}

std::string strip_col(const char* prefix, int turn, int tape, const char* unit) {
    return std::string(prefix) + "_t" + std::to_string(turn) + "_k" + std::to_string(tape) + "_" + unit;
}

/// Shared runs, computed on first use.
class Runs {
public:
    const RunConfig& table1() {
        if (!t1_) {
            t1_cfg_ = load_config(config_path("table1.cfg"));
            t1_model_ = std::make_unique<PcrModel>(t1_cfg_.setup);
            t1_ = run(*t1_model_, t1_cfg_.outputs);
            note_kcl("table1", *t1_);
        }
        return t1_cfg_;
    }
    const TimeSeriesRecord& table1_record() {
        table1();
        return *t1_;
    }
    const PcrModel& table1_model() {
        table1();
        return *t1_model_;
    }

    struct Multiscale {
        RunConfig cfg;
        TimeSeriesRecord full;
        TimeSeriesRecord ms;
        double r2 = 0.0;
        int analyzed = 0;
    };
    const Multiscale& desk() {
        if (!desk_) {
            Multiscale d;
            d.cfg = load_config(config_path("table3_desk.cfg"));
            OutputConfig o = d.cfg.outputs;
            o.snapshots = true;
            ModelSetup fs = d.cfg.setup;
            fs.multiscale.reset();
            const PcrModel full(fs);
            const PcrModel ms(d.cfg.setup);
            d.full = run(full, o);
            d.ms = run(ms, o);
            std::vector<std::vector<double>> ref;
            std::vector<std::vector<double>> cand;
            for (std::size_t k = 0; k < d.full.snapshots.size() && k < d.ms.snapshots.size(); ++k) {
                ref.push_back(project_elements(full.mesh(), d.full.snapshots[k].j, ms.mesh()));
                cand.push_back(d.ms.snapshots[k].j);
            }
            d.r2 = compute_r_squared(ref, cand);
            d.analyzed = ms.layout().n_analyzed();
            note_kcl("table3 desk full", d.full);
            note_kcl("table3 desk multi-scale", d.ms);
            desk_ = std::move(d);
        }
        return *desk_;
    }

    struct Decay {
        RunConfig cfg;
        std::unique_ptr<PcrModel> model;
        TimeSeriesRecord rec;
        SimState at_t0;
        bool have_t0 = false;
    };
    Decay& decay() {
        if (!decay_) {
            Decay d;
            d.cfg = load_config(config_path("freedecay_30turn.cfg"));
            d.model = std::make_unique<PcrModel>(d.cfg.setup);
            const double t0 = d.cfg.setup.scenario.closed_loop->t0;
            d.rec = run(*d.model, d.cfg.outputs, std::nullopt, [&](const SimState& s) {
                if (std::abs(s.time - t0) < 1e-12) {
                    d.at_t0 = s;
                    d.have_t0 = true;
                }
            });
            note_kcl("freedecay_30turn", d.rec);
            decay_ = std::move(d);
        }
        return *decay_;
    }

    struct Ac {
        RunConfig cfg;
        TimeSeriesRecord on;
        TimeSeriesRecord off;
    };
    const Ac& ac() {
        if (!ac_) {
            Ac a;
            a.cfg = load_config(config_path("ac_disturbance.cfg"));
            const double t_on = a.cfg.setup.scenario.background->t_start;
            const PcrModel on(a.cfg.setup);
            SimState before;
            a.on = run(on, a.cfg.outputs, std::nullopt, [&](const SimState& s) {
                if (std::abs(s.time - t_on) < 1e-12) {
                    before = s;
                }
            });
            // Without excitation the history up to t_start is the same, so the
            // reference continues from the shared state.
            ModelSetup quiet = a.cfg.setup;
            quiet.scenario.background.reset();
            const PcrModel off(quiet, on.kernels());
            a.off = run(off, a.cfg.outputs, before);
            note_kcl("ac_disturbance", a.on);
            note_kcl("ac_disturbance (no excitation)", a.off);
            ac_ = std::move(a);
        }
        return *ac_;
    }

    void note_kcl(const std::string& name, const TimeSeriesRecord& r) { kcl_[name] = r.stats.max_kcl_ratio; }
    const std::map<std::string, double>& kcl() const { return kcl_; }

private:
    RunConfig t1_cfg_;
    std::unique_ptr<PcrModel> t1_model_;
    std::optional<TimeSeriesRecord> t1_;
    std::optional<Multiscale> desk_;
    std::optional<Decay> decay_;
    std::optional<Ac> ac_;
    std::map<std::string, double> kcl_;
};

Outcome criterion1(Runs& runs) {
    const RunConfig& cfg = runs.table1();
    const TimeSeriesRecord& r = runs.table1_record();
    const auto& pts = cfg.setup.scenario.profile.points;
    const double rate = (pts[1].second - pts[0].second) / (pts[1].first - pts[0].first);
    const double t_ramp = pts[1].first;
    const auto v = window(r, "V_coil_V", 0.9 * t_ramp, t_ramp);
    const double plateau = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    const double l = effective_inductance(runs.table1_model().mesh(), runs.table1_model().kernels());
    const bool ok = rel(plateau, 1.35e-3) <= 0.10 && rel(l, 193e-6) <= 0.10 && rel(plateau, l * rate) <= 0.03 &&
                    r.stats.wall_seconds < 600.0;
    return {ok, fmt("plateau %.4f mV (target 1.35 mV +-10%%), L %.2f uH (193 uH +-10%%), L*dI/dt %.4f mV "
                    "(plateau off by %.2f%%, limit 3%%), run %.0f s",
                    plateau * 1e3, l * 1e6, l * rate * 1e3, 100 * rel(plateau, l * rate), r.stats.wall_seconds)};
}

Outcome criterion2(Runs& runs) {
    const RunConfig& cfg = runs.table1();
    const TimeSeriesRecord& r = runs.table1_record();
    const OracleNetwork net = build_oracle_network(cfg.setup.coil, cfg.oracle);
    const double tau = decay_time_constants(net, false).front();
    const auto& pts = cfg.setup.scenario.profile.points;
    const double hold = cfg.setup.scenario.t_end - pts[1].first;
    const double i_op = pts[1].second;
    const OracleSolution ss = steady_split(net, i_op);
    const double t_end = cfg.setup.scenario.t_end;
    double worst = 0.0;
    std::string cols;
    for (int k = 0; k < cfg.setup.coil.n_parallel; ++k) {
        const double in = value_at(r, "I_in_" + std::to_string(k + 1) + "_A", t_end);
        const double out = value_at(r, "I_out_" + std::to_string(k + 1) + "_A", t_end);
        worst = std::max({worst, rel(in, ss.i_in[static_cast<std::size_t>(k)]),
                          rel(out, ss.i_out[static_cast<std::size_t>(k)])});
        cols += fmt(" tape %d in %.3f/%.3f out %.3f/%.3f A;", k + 1, in, ss.i_in[static_cast<std::size_t>(k)], out,
                    ss.i_out[static_cast<std::size_t>(k)]);
    }
    return {worst <= 0.005 && hold >= 5.0 * tau,
            fmt("hold %.1f s = %.1f tau,%s worst deviation %.3f%% (limit 0.5%%)", hold, hold / tau, cols.c_str(),
                100 * worst)};
}

Outcome criterion3(Runs& runs) {
    runs.table1();
    runs.desk();
    runs.decay();
    runs.ac();
    const RunConfig t2 = load_config(config_path("table2_threetape.cfg"));
    runs.note_kcl("table2_threetape", run(PcrModel(t2.setup), t2.outputs));
    double worst = 0.0;
    std::string detail;
    for (const auto& [name, v] : runs.kcl()) {
        worst = std::max(worst, v);
        detail += fmt("%s %.1e; ", name.c_str(), v);
    }
    return {worst <= 1e-9, "max residual / max(1 A, I_op): " + detail + "limit 1e-9"};
}

ModelSetup limit_setup(int n_parallel) {
    ModelSetup s;
    CoilSpec& c = s.coil;
    c.n_parallel = n_parallel;
    c.inner_radius = 0.03;
    c.tape_width = 4.0e-3;
    c.tape_thickness = 0.095e-3;
    c.material.jc0 = jc0_from_tape_ic(233.0, c.tape_width, c.tape_thickness);
    c.joints.input.assign(static_cast<std::size_t>(n_parallel), 300e-9);
    c.joints.output.assign(static_cast<std::size_t>(n_parallel), 300e-9);
    s.elements_per_width = 8;
    return s;
}

Outcome criterion4() {
    // (a) insulated tapes that share one radius, equal joints.
    ModelSetup a = limit_setup(2);
    a.coil.n_turns = 4;
    a.coil.radial_pitch = 1e-9;
    a.scenario.profile = ramp_and_hold(50.0, 100.0, 1.0);
    a.scenario.t_end = 3.0;
    a.solver.dt = a.solver.dt_max = 0.02;
    const TimeSeriesRecord ra = run(PcrModel(a), {});
    double imbalance = 0.0;
    for (const auto& [x, y] : std::vector<std::pair<std::string, std::string>>{
             {"I_in_1_A", "I_in_2_A"}, {"I_out_1_A", "I_out_2_A"}}) {
        const auto u = ra.series(x);
        const auto v = ra.series(y);
        for (std::size_t k = 0; k < u.size(); ++k) {
            imbalance = std::max(imbalance, std::abs(u[k] - v[k]));
        }
    }
    for (int i = 1; i <= a.coil.n_turns; ++i) {
        const auto u = ra.series(strip_col("I_az", i, 1, "A"));
        const auto v = ra.series(strip_col("I_az", i, 2, "A"));
        for (std::size_t k = 0; k < u.size(); ++k) {
            imbalance = std::max(imbalance, std::abs(u[k] - v[k]));
        }
    }
    const bool ok_a = imbalance <= 1e-6 * 100.0;

    // (b) single tape NI coil: field lag after the ramp.
    ModelSetup b = limit_setup(1);
    b.coil.n_turns = 10;
    b.coil.radial_pitch = 1.9e-4;
    b.coil.contact_resistivity = 5e-9;
    const OracleNetwork net = build_oracle_network(b.coil);
    const double tau_oracle = decay_time_constants(net, false).front();
    const double t_ramp = 1.0;
    b.scenario.profile = ramp_and_hold(20.0, 20.0, 12.0 * tau_oracle);
    b.scenario.t_end = t_ramp + 12.0 * tau_oracle;
    b.solver.dt = b.solver.dt_max = tau_oracle / 200.0;
    const TimeSeriesRecord rb = run(PcrModel(b), {});
    const auto t = window(rb, "t_s", t_ramp, t_ramp + 4.0 * tau_oracle);
    const auto flux = window(rb, "flux_Wb", t_ramp, t_ramp + 4.0 * tau_oracle);
    const double final_flux = rb.series("flux_Wb").back();
    std::vector<double> lag;
    for (double f : flux) {
        lag.push_back(final_flux - f);
    }
    const double tau = fit_decay_time_constant(t, lag);
    const bool ok_b = rel(tau, tau_oracle) <= 0.05;
    return {ok_a && ok_b, fmt("(a) max tape imbalance %.2e A (limit 1e-4 A) %s; (b) charging tau %.4f s vs oracle %.4f s "
                              "(%.2f%%, limit 5%%) %s",
                              imbalance, ok_a ? "ok" : "FAIL", tau, tau_oracle, 100 * rel(tau, tau_oracle),
                              ok_b ? "ok" : "FAIL")};
}

Outcome criterion5(Runs& runs) {
    const auto& d = runs.desk();
    const double lf = integrate_losses(d.full).superconductor;
    const double lm = integrate_losses(d.ms).superconductor;
    const double err = std::abs(lm - lf) / lf;
    const double speedup = d.full.stats.wall_seconds / d.ms.stats.wall_seconds;
    return {err <= 0.02 && d.r2 >= 0.95 && speedup >= 2.0,
            fmt("%d turns, %d analyzed: loss %.5f J vs %.5f J (%.2f%%, limit 2%%), R^2 %.4f (limit 0.95), "
                "speedup %.2fx (limit 2x)",
                d.cfg.setup.coil.n_turns, d.analyzed, lm, lf, 100 * err, d.r2, speedup)};
}

Outcome criterion6(Runs& runs) {
    const auto& d = runs.desk();
    const auto t = d.full.series("t_s");
    const auto p = d.full.series("P_sc_W");
    const auto peaks = local_maxima(p);
    const auto& pts = d.cfg.setup.scenario.profile.points;
    // Ramp-up ends at the first peak of the drive, discharge at its return to zero.
    double t_up = 0.0;
    double t_down = 0.0;
    for (std::size_t k = 1; k < pts.size(); ++k) {
        if (pts[k].second > pts[k - 1].second && t_up == 0.0) {
            t_up = pts[k].first;
        }
        if (pts[k].second < pts[k - 1].second) {
            t_down = pts[k].first;
        }
    }
    const double tol = 2.0 * d.cfg.outputs.cadence + 1e-9;
    bool ok = peaks.size() == 2;
    std::string where;
    for (std::size_t i : peaks) {
        where += fmt(" %.2f s (%.4g W)", t[i], p[i]);
    }
    if (ok) {
        ok = std::abs(t[peaks[0]] - t_up) <= tol && std::abs(t[peaks[1]] - t_down) <= tol && p[peaks[1]] > p[peaks[0]];
    }
    const RunConfig full = load_config(config_path("table3_cycle.cfg"));
    const std::size_t n_full = static_cast<std::size_t>(full.setup.coil.n_parallel * full.setup.coil.n_turns *
                                                        full.setup.elements_per_width);
    const bool fits = kernel_memory_estimate(n_full, full.setup.kernel.field_points) <= full.setup.kernel.memory_cap_bytes;
    std::string total = fits ? "full coil fits the memory cap but was not run"
                             : fmt("full %zu-element coil exceeds the %.1f GB cap, total-loss check not applicable",
                                   n_full, full.setup.kernel.memory_cap_bytes / 1e9);
    return {ok && !fits, fmt("%zu maxima at%s; expected ramp end %.2f s and discharge end %.2f s with the later one "
                             "larger; %s",
                             peaks.size(), where.c_str(), t_up, t_down, total.c_str())};
}

Outcome criterion7(Runs& runs) {
    auto& d = runs.decay();
    const PcrModel& m = *d.model;
    const auto& cl = *d.cfg.setup.scenario.closed_loop;
    if (!d.have_t0) {
        return {false, "switching time was not a step boundary"};
    }
    const double phi0 = m.derive(d.at_t0).flux;
    std::vector<double> jumps;
    for (double dt : {1e-2, 1e-3, 1e-4}) {
        SimState s = d.at_t0;
        s.jc = m.next_jc(s);
        jumps.push_back(std::abs(m.derive(m.step(s, dt)).flux - phi0) / std::abs(phi0));
    }
    const bool ok_flux = jumps.back() <= 1e-4 && std::is_sorted(jumps.rbegin(), jumps.rend());

    const OracleNetwork net = build_oracle_network(d.cfg.setup.coil, d.cfg.oracle);
    const double tau_oracle = decay_time_constants(net, true, cl.r_cl).front();
    const double t_end = d.cfg.setup.scenario.t_end;
    const auto t = window(d.rec, "t_s", cl.t0 + 1.0, t_end);
    const auto i = window(d.rec, "I_coil_A", cl.t0 + 1.0, t_end);
    const double tau = fit_decay_time_constant(t, i);
    const bool ok_tau = rel(tau, tau_oracle) <= 0.05;

    const int n = d.cfg.setup.coil.n_turns;
    auto diff = [&](int turn, double time) {
        return value_at(d.rec, strip_col("I_az", turn, 1, "A"), time) - value_at(d.rec, strip_col("I_az", turn, 2, "A"), time);
    };
    const bool ok_rev = diff(1, t_end) > 0.0 && diff(n, t_end) < 0.0;
    return {ok_flux && ok_tau && ok_rev,
            fmt("flux jump at switching %.1e/%.1e/%.1e for dt 1e-2/1e-3/1e-4 s (limit 1e-4) %s; decay tau %.2f s vs "
                "oracle %.2f s (%.2f%%, limit 5%%) %s; A-B turn 1 %.3f -> %.3f A, turn %d %.3f -> %.3f A %s",
                jumps[0], jumps[1], jumps[2], ok_flux ? "ok" : "FAIL", tau, tau_oracle, 100 * rel(tau, tau_oracle),
                ok_tau ? "ok" : "FAIL", diff(1, cl.t0), diff(1, t_end), n, diff(n, cl.t0), diff(n, t_end),
                ok_rev ? "ok" : "FAIL")};
}

/// Residual after subtracting the centered running mean over `width` samples.
/// One excitation period wide, it removes the slow drift and keeps every harmonic.
std::vector<double> remove_running_mean(const std::vector<double>& y, std::size_t width) {
    std::vector<double> out;
    const std::size_t half = width / 2;
    for (std::size_t k = half; k + width - half <= y.size(); ++k) {
        const auto first = y.begin() + static_cast<std::ptrdiff_t>(k - half);
        const double mean = std::accumulate(first, first + static_cast<std::ptrdiff_t>(width), 0.0) / static_cast<double>(width);
        out.push_back(y[k] - mean);
    }
    return out;
}

Outcome criterion8(Runs& runs) {
    const auto& a = runs.ac();
    const auto& bg = *a.cfg.setup.scenario.background;
    const double t0 = bg.t_start;
    const double t_end = a.cfg.setup.scenario.t_end;
    const double drop_on = value_at(a.on, "I_coil_A", t0) - value_at(a.on, "I_coil_A", t_end);
    const double drop_off = value_at(a.off, "I_coil_A", t0) - value_at(a.off, "I_coil_A", t_end);
    const bool ok_a = drop_on > drop_off;

    // The first excitation period carries the onset transient; the spectrum is taken after it.
    const double t_steady = t0 + 1.0 / bg.frequency;
    const auto da = window(a.on, strip_col("I_az", 1, 1, "A"), t_steady, t_end);
    const auto db = window(a.on, strip_col("I_az", 1, 2, "A"), t_steady, t_end);
    std::vector<double> diff(da.size());
    for (std::size_t k = 0; k < da.size(); ++k) {
        diff[k] = da[k] - db[k];
    }
    const auto period = static_cast<std::size_t>(std::lround(1.0 / (bg.frequency * a.cfg.outputs.cadence)));
    const double f = dominant_frequency(remove_running_mean(diff, period), a.cfg.outputs.cadence);
    const bool ok_b = std::abs(f - 2.0 * bg.frequency) <= 0.1 * bg.frequency;

    const int n = a.cfg.setup.coil.n_turns;
    auto peak_rdyn = [&](int turn, int tape) {
        const auto p = window(a.on, strip_col("P_sc", turn, tape, "W"), t0, t0 + 1.0 / bg.frequency);
        const auto i = window(a.on, strip_col("I_az", turn, tape, "A"), t0, t0 + 1.0 / bg.frequency);
        double peak = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            peak = std::max(peak, p[k] / (i[k] * i[k]));
        }
        return peak;
    };
    const double r1a = peak_rdyn(1, 1);
    const double r1b = peak_rdyn(1, 2);
    const double rna = peak_rdyn(n, 1);
    const double rnb = peak_rdyn(n, 2);
    const bool ok_c = r1a > r1b && rnb > rna;
    return {ok_a && ok_b && ok_c,
            fmt("(a) current drop %.4f A with excitation vs %.4f A without %s; (b) dominant frequency %.3f Hz "
                "(expected %.1f Hz) %s; (c) peak R_dyn turn 1 A/B %.3e/%.3e, turn %d A/B %.3e/%.3e Ohm %s",
                drop_on, drop_off, ok_a ? "ok" : "FAIL", f, 2.0 * bg.frequency, ok_b ? "ok" : "FAIL", r1a, r1b, n,
                rna, rnb, ok_c ? "ok" : "FAIL")};
}

double max_rel_column_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double worst = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
        const double scale = std::max(a.col(c).cwiseAbs().maxCoeff(), b.col(c).cwiseAbs().maxCoeff());
        if (scale > 0.0) {
            worst = std::max(worst, (a.col(c) - b.col(c)).cwiseAbs().maxCoeff() / scale);
        }
    }
    return worst;
}

ModelSetup hygiene_setup(int n_turns) {
    ModelSetup s = limit_setup(2);
    s.coil.n_turns = n_turns;
    s.coil.radial_pitch = 1.9e-4;
    s.coil.joints.input = {250e-9, 237e-9};
    s.coil.joints.output = {584e-9, 220e-9};
    s.coil.contact_resistivity = 5e-10;
    s.elements_per_width = 6;
    s.scenario.profile = {{{0, 0}, {1, 60}, {2, 60}, {2.5, 0}, {6, 0}}};
    s.scenario.t_end = 6.0;
    s.solver.dt = s.solver.dt_max = 0.005;
    return s;
}

Outcome criterion9() {
    // Jacobian on an iterate away from convergence, open and closed loop, full and multi-scale.
    double jac = 0.0;
    for (int variant = 0; variant < 3; ++variant) {
        ModelSetup s = hygiene_setup(variant == 2 ? 7 : 3);
        s.solver.dt = s.solver.dt_max = 0.05;
        if (variant == 1) {
            s.scenario.closed_loop = ClosedLoopConfig{1.5, 2e-6};
        }
        if (variant == 2) {
            MultiscaleConfig ms;
            ms.boundary_turns = 2;
            ms.interior_stride = 3;
            ms.coarse_elements = 3;
            s.multiscale = ms;
        }
        const PcrModel m(s);
        SimState prev = m.initial_state();
        while (prev.time < 1.6 - 1e-9) {
            SimState next = m.step(prev, 0.05);
            next.jc = m.next_jc(next);
            prev = next;
        }
        Eigen::VectorXd x = prev.x;
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            x[k] *= 1.0 + 0.01 * std::sin(1.7 * static_cast<double>(k));
        }
        const auto sys = m.assemble_global_residual(x, prev, 0.05);
        jac = std::max(jac, max_rel_column_error(sys.jacobian, m.finite_difference_jacobian(x, prev, 0.05)));
    }
    const bool ok_jac = jac <= 1e-5;

    // Divergence of B from the analytic loop field at probe points around a loop.
    double div = 0.0;
    for (double r : {0.01, 0.03, 0.049, 0.06, 0.1}) {
        for (double z : {-0.02, 0.003, 0.01}) {
            const double h = 1e-6;
            const auto f_rp = loop_field(0.05, 0.0, r + h, z);
            const auto f_rm = loop_field(0.05, 0.0, r - h, z);
            const auto f_zp = loop_field(0.05, 0.0, r, z + h);
            const auto f_zm = loop_field(0.05, 0.0, r, z - h);
            const auto f = loop_field(0.05, 0.0, r, z);
            const double d = ((r + h) * f_rp.br - (r - h) * f_rm.br) / (2 * h * r) + (f_zp.bz - f_zm.bz) / (2 * h);
            const double scale = std::hypot(f.br, f.bz) / std::hypot(r - 0.05, z);
            div = std::max(div, std::abs(d) / scale);
        }
    }
    const bool ok_div = div <= 1e-3;

    // Energy over a closed cycle.
    const ModelSetup es = hygiene_setup(3);
    const TimeSeriesRecord er = run(PcrModel(es), {});
    const auto last = er.rows.back();
    const double lost = last[er.column("E_sc_J")] + last[er.column("E_ct_J")] + last[er.column("E_joint_J")];
    const double imbalance = std::abs(last[er.column("E_source_J")] - lost - last[er.column("W_mag_J")]) / lost;
    const bool ok_energy = imbalance <= 0.01;

    // Determinism and the all-analyzed multi-scale identity, compared as CSV bytes.
    auto csv = [](const TimeSeriesRecord& r) {
        std::ostringstream os;
        write_csv(os, r.columns, r.rows);
        return os.str();
    };
    ModelSetup ds = hygiene_setup(5);
    ds.solver.dt = ds.solver.dt_max = 0.05;
    const std::string a = csv(run(PcrModel(ds), {}));
    const std::string b = csv(run(PcrModel(ds), {}));
    MultiscaleConfig all;
    all.boundary_turns = 3;
    all.interior_stride = 1;
    all.coarse_elements = 2;
    ds.multiscale = all;
    const std::string c = csv(run(PcrModel(ds), {}));
    const bool ok_det = a == b;
    const bool ok_ms = a == c;
    return {ok_jac && ok_div && ok_energy && ok_det && ok_ms,
            fmt("Jacobian %.1e (limit 1e-5) %s; div B %.1e (limit 1e-3) %s; energy %.3f%% (limit 1%%) %s; "
                "reruns %s; all-analyzed multi-scale %s",
                jac, ok_jac ? "ok" : "FAIL", div, ok_div ? "ok" : "FAIL", 100 * imbalance,
                ok_energy ? "ok" : "FAIL", ok_det ? "identical" : "DIFFER", ok_ms ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int k = 1; k < argc; ++k) {
        wanted.insert(std::atoi(argv[k]));
    }
    if (wanted.empty()) {
        for (int k = 1; k <= 9; ++k) {
            wanted.insert(k);
        }
    }
    Runs runs;
    bool all = true;
    for (int k : wanted) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            switch (k) {
            case 1: o = criterion1(runs); break;
            case 2: o = criterion2(runs); break;
            case 3: o = criterion3(runs); break;
            case 4: o = criterion4(); break;
            case 5: o = criterion5(runs); break;
            case 6: o = criterion6(runs); break;
            case 7: o = criterion7(runs); break;
            case 8: o = criterion8(runs); break;
            case 9: o = criterion9(); break;
            default: o = {false, "no such criterion"};
            }
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %d: %s  %s  [%.0f s]\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
