#include "support.hpp"

#include "pwni/metrics.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace pwni;
using Catch::Approx;

namespace {

double max_rel_column_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double worst = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
        const double scale = std::max(a.col(c).cwiseAbs().maxCoeff(), b.col(c).cwiseAbs().maxCoeff());
        if (scale == 0.0) {
            continue;
        }
        worst = std::max(worst, (a.col(c) - b.col(c)).cwiseAbs().maxCoeff() / scale);
    }
    return worst;
}

SimState advance(const PcrModel& m, double t) {
    SimState s = m.initial_state();
    while (s.time < t - 1e-12) {
        SimState next = m.step_to(s, std::min(t, s.time + m.setup().solver.dt));
        next.jc = m.next_jc(next);
        s = next;
    }
    return s;
}

}  // namespace

TEST_CASE("zero drive gives identically zero outputs", "[stepper]") {
    ModelSetup s = test::small_setup();
    s.scenario.profile = {{{0.0, 0.0}, {1.0, 0.0}}};
    s.scenario.t_end = 0.5;
    const PcrModel m(s);
    const SimState z = m.initial_state();
    const auto sys = m.assemble_global_residual(z.x, z, 0.1);
    CHECK(sys.residual.cwiseAbs().maxCoeff() == 0.0);
    const TimeSeriesRecord rec = run(m, {});
    for (const auto& row : rec.rows) {
        for (std::size_t c = 1; c < row.size(); ++c) {
            if (rec.columns[c] == "newton_iters") {
                continue;
            }
            CHECK(row[c] == 0.0);
        }
    }
}

TEST_CASE("unknown count", "[stepper]") {
    const ModelSetup s = test::small_setup(3, 4);
    const PcrModel m(s);
    // 24 T values, 6 voltages, 1 inlet current.
    CHECK(m.n_unknowns() == 24 + 6 + 1);
    ModelSetup c = s;
    c.scenario.closed_loop = ClosedLoopConfig{1.0, 1e-6};
    CHECK(PcrModel(c).n_unknowns() == 24 + 6 + 1 + 1);
}

TEST_CASE("analytic Jacobian matches finite differences", "[stepper]") {
    ModelSetup s = test::small_setup(3, 4);
    s.scenario.closed_loop = ClosedLoopConfig{1.0, 2e-6};
    s.coil.joints.closed_loop_delta = -1e-7;
    const PcrModel m(s);
    SimState prev = advance(m, 0.95);
    // A perturbed iterate away from the converged point, in both modes.
    for (double dt : {0.05, 0.1}) {
        Eigen::VectorXd x = prev.x;
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            x[k] *= 1.0 + 0.01 * std::sin(1.3 * static_cast<double>(k));
        }
        const auto sys = m.assemble_global_residual(x, prev, dt);
        const Eigen::MatrixXd fd = m.finite_difference_jacobian(x, prev, dt);
        CHECK(max_rel_column_error(sys.jacobian, fd) <= 1e-5);
    }
    SimState closed = advance(m, 1.1);
    REQUIRE(closed.closed);
    const auto sys = m.assemble_global_residual(closed.x, closed, 0.05);
    CHECK(max_rel_column_error(sys.jacobian, m.finite_difference_jacobian(closed.x, closed, 0.05)) <= 1e-5);
}

TEST_CASE("multi-scale Jacobian matches finite differences", "[stepper]") {
    for (PenaltyMode mode : {PenaltyMode::edge, PenaltyMode::distributed}) {
        ModelSetup s = test::small_setup(7, 4);
        MultiscaleConfig ms;
        ms.boundary_turns = 2;
        ms.interior_stride = 3;
        ms.coarse_elements = 2;
        ms.mode = mode;
        s.multiscale = ms;
        const PcrModel m(s);
        REQUIRE(m.layout().n_analyzed() < 7);
        const SimState prev = advance(m, 0.6);
        const auto sys = m.assemble_global_residual(prev.x, prev, 0.05);
        CHECK(max_rel_column_error(sys.jacobian, m.finite_difference_jacobian(prev.x, prev, 0.05)) <= 1e-5);
    }
}

TEST_CASE("transport row of a single insulated strip", "[stepper]") {
    ModelSetup s = test::small_setup(1, 2);
    s.coil.n_parallel = 1;
    s.coil.joints.input = {1e-7};
    s.coil.joints.output = {1e-7};
    s.coil.contact_resistivity = std::numeric_limits<double>::infinity();
    const PcrModel m(s);
    REQUIRE(m.n_unknowns() == 3);
    const SimState z = m.initial_state();
    Eigen::VectorXd x(3);
    x << 2e5, 7e5, 1e-4;
    const auto sys = m.assemble_global_residual(x, z, 0.1);
    const double i_src = source_current(s.scenario.profile, 0.1);
    CHECK(sys.residual[2] == Approx(s.coil.tape_thickness * 7e5 - i_src).epsilon(1e-12));
    // The Jacobian row of the transport constraint touches only the strip current.
    CHECK(sys.jacobian(2, 1) == Approx(s.coil.tape_thickness));
    CHECK(sys.jacobian(2, 0) == 0.0);
    CHECK(sys.jacobian(2, 2) == 0.0);
}

TEST_CASE("steps converge quickly and keep Kirchhoff residuals tiny", "[stepper]") {
    const ModelSetup s = test::small_setup(4, 6);
    const PcrModel m(s);
    OutputConfig o;
    const TimeSeriesRecord rec = run(m, o);
    CHECK(rec.stats.max_newton_iterations <= 8);
    CHECK(rec.stats.max_kcl_ratio <= 1e-9);
    for (double v : rec.series("kcl_residual_A")) {
        CHECK(v <= 1e-9 * 20.0);
    }
    const auto t = rec.series("t_s");
    CHECK(std::is_sorted(t.begin(), t.end()));
    CHECK(t.back() == Approx(s.scenario.t_end));
}

TEST_CASE("the switching time is a step boundary", "[stepper]") {
    ModelSetup s = test::small_setup();
    s.scenario.closed_loop = ClosedLoopConfig{2.137, 1e-6};
    s.scenario.t_end = 2.3;
    const PcrModel m(s);
    const TimeSeriesRecord rec = run(m, {});
    const auto t = rec.series("t_s");
    CHECK(std::find(t.begin(), t.end(), 2.137) != t.end());
}

TEST_CASE("reruns are bitwise identical", "[stepper][property]") {
    const ModelSetup s = test::small_setup();
    OutputConfig o;
    o.snapshots = true;
    const TimeSeriesRecord a = run(PcrModel(s), o);
    const TimeSeriesRecord b = run(PcrModel(s), o);
    CHECK(a.rows == b.rows);
    REQUIRE(a.snapshots.size() == b.snapshots.size());
    for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
        CHECK(a.snapshots[k].j == b.snapshots[k].j);
    }
}

TEST_CASE("multi-scale with every turn analyzed equals the full model", "[stepper][property]") {
    ModelSetup s = test::small_setup(5, 4);
    const TimeSeriesRecord full = run(PcrModel(s), {});
    MultiscaleConfig ms;
    ms.boundary_turns = 3;
    ms.interior_stride = 1;
    ms.coarse_elements = 2;
    s.multiscale = ms;
    const PcrModel m(s);
    REQUIRE(m.layout().full());
    const TimeSeriesRecord all = run(m, {});
    CHECK(all.columns == full.columns);
    CHECK(all.rows == full.rows);
}

TEST_CASE("negated drive negates the response", "[stepper][property]") {
    ModelSetup s = test::small_setup();
    const TimeSeriesRecord pos = run(PcrModel(s), {});
    for (auto& p : s.scenario.profile.points) {
        p.second = -p.second;
    }
    const TimeSeriesRecord neg = run(PcrModel(s), {});
    REQUIRE(pos.rows.size() == neg.rows.size());
    for (const char* col : {"I_in_1_A", "I_out_2_A", "V_coil_V", "Bz_center_T", "I_tt_t1_k1_A"}) {
        const auto a = pos.series(col);
        const auto b = neg.series(col);
        const double scale = std::max(1e-30, *std::max_element(a.begin(), a.end(), [](double x, double y) { return std::abs(x) < std::abs(y); }));
        for (std::size_t k = 0; k < a.size(); ++k) {
            CHECK(std::abs(a[k] + b[k]) <= 1e-9 * std::abs(scale));
        }
    }
    CHECK(integrate_losses(pos).total() == Approx(integrate_losses(neg).total()).epsilon(1e-9));
}

TEST_CASE("backward Euler converges at first order", "[stepper]") {
    ModelSetup s = test::small_setup(3, 4);
    s.scenario.profile = ramp_and_hold(40.0, 40.0, 1.0);
    s.scenario.t_end = 1.2;
    auto at = [&](double dt) {
        ModelSetup c = s;
        c.solver.dt = dt;
        c.solver.dt_max = dt;
        OutputConfig o;
        o.cadence = 0.2;
        const TimeSeriesRecord r = run(PcrModel(c), o);
        const auto t = r.series("t_s");
        const auto i = r.series("I_in_1_A");
        const auto k = static_cast<std::size_t>(std::find_if(t.begin(), t.end(), [](double v) { return std::abs(v - 1.2) < 1e-9; }) - t.begin());
        return i.at(k);
    };
    const double a = at(0.02);
    const double b = at(0.01);
    const double c = at(0.005);
    const double order = std::log2(std::abs(a - b) / std::abs(b - c));
    CHECK(order >= 0.9);
}

TEST_CASE("energy balance closes at the rate of the time discretization", "[stepper]") {
    auto imbalance = [](double dt) {
        ModelSetup s = test::small_setup(3, 6);
        s.scenario.profile = {{{0, 0}, {1, 20}, {2, 20}, {2.5, 0}, {6, 0}}};
        s.scenario.t_end = 6.0;
        s.solver.dt = dt;
        s.solver.dt_max = dt;
        const TimeSeriesRecord rec = run(PcrModel(s), {});
        const auto last = rec.rows.back();
        const double lost = last[rec.column("E_sc_J")] + last[rec.column("E_ct_J")] + last[rec.column("E_joint_J")];
        return std::pair{last[rec.column("E_source_J")] - lost - last[rec.column("W_mag_J")], lost};
    };
    const auto coarse = imbalance(0.01).first;
    const auto [fine, lost] = imbalance(0.005);
    // Backward Euler dissipates O(dt) of the stored energy on its own.
    CHECK(std::abs(fine) <= 0.01 * lost);
    CHECK(coarse / fine == Approx(2.0).epsilon(0.2));
}
