#include "pwni/timestepper.hpp"

#include "pwni/ta_core.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace pwni {

void validate_solver(const SolverConfig& cfg) {
    if (!(cfg.dt > 0.0)) {
        throw SpecError("solver.dt > 0");
    }
    if (!(cfg.dt_min > 0.0 && cfg.dt_min <= cfg.dt && cfg.dt <= cfg.dt_max)) {
        throw SpecError("solver.dt_min <= solver.dt <= solver.dt_max");
    }
    if (!(cfg.newton_tol > 0.0)) {
        throw SpecError("solver.newton_tol > 0");
    }
    if (!(cfg.kcl_tol > 0.0)) {
        throw SpecError("solver.kcl_tol > 0");
    }
    if (cfg.max_newton_iters < 1) {
        throw SpecError("solver.max_newton_iters >= 1");
    }
}

PcrModel::PcrModel(ModelSetup setup) : setup_(std::move(setup)) {
    validate_spec(setup_.coil);
    if (setup_.multiscale) {
        layout_ = build_turn_layout(setup_.coil, select_analyzed(*setup_.multiscale, setup_.coil.n_turns));
    } else {
        layout_ = full_layout(setup_.coil.n_turns);
    }
    const int coarse = setup_.multiscale ? setup_.multiscale->coarse_elements : setup_.elements_per_width;
    mesh_ = build_mesh(setup_.coil, elements_per_turn(layout_, setup_.elements_per_width, coarse));
    kernels_ = cached_kernels(mesh_, setup_.kernel);
    init();
}

PcrModel::PcrModel(ModelSetup setup, KernelSet kernels)
    : setup_(std::move(setup)), kernels_(std::move(kernels)) {
    validate_spec(setup_.coil);
    if (setup_.multiscale) {
        layout_ = build_turn_layout(setup_.coil, select_analyzed(*setup_.multiscale, setup_.coil.n_turns));
    } else {
        layout_ = full_layout(setup_.coil.n_turns);
    }
    const int coarse = setup_.multiscale ? setup_.multiscale->coarse_elements : setup_.elements_per_width;
    mesh_ = build_mesh(setup_.coil, elements_per_turn(layout_, setup_.elements_per_width, coarse));
    if (kernels_.mesh_hash != mesh_.hash()) {
        throw SpecError("kernels were assembled for a different mesh");
    }
    init();
}

void PcrModel::init() {
    validate_scenario(setup_.scenario);
    validate_solver(setup_.solver);
    const CoilSpec& spec = setup_.coil;
    const int p = spec.n_parallel;
    contact_ = contact_conductances(spec);

    n_el_ = static_cast<int>(mesh_.n_elements());
    n_strips_ = static_cast<int>(mesh_.strips.size());
    const int m = layout_.n_analyzed();
    u_offset_ = n_el_;
    iin_offset_ = n_el_ + p * m;
    n_global_ = p * m + (p - 1);
    n_unknowns_ = iin_offset_ + (p - 1);
    if (setup_.scenario.closed_loop) {
        icoil_index_ = n_unknowns_;
        ++n_unknowns_;
        ++n_global_;
    }

    strip_analyzed_.resize(static_cast<std::size_t>(n_strips_));
    for (int s = 0; s < n_strips_; ++s) {
        strip_analyzed_[static_cast<std::size_t>(s)] =
            layout_.turns[static_cast<std::size_t>(mesh_.strips[static_cast<std::size_t>(s)].turn)].analyzed;
    }

    two_pi_r_.resize(n_el_);
    double r_mean = 0.0;
    for (int e = 0; e < n_el_; ++e) {
        two_pi_r_[e] = 2.0 * kPi * mesh_.elem_r[static_cast<std::size_t>(e)];
        r_mean += mesh_.elem_r[static_cast<std::size_t>(e)];
    }
    r_mean /= std::max(n_el_, 1);
    v_ref_ = 2.0 * kPi * r_mean * spec.material.e0;

    // Ring inductance C = diag(2 pi r) A, then C * D with D: T -> element currents.
    const double d = spec.tape_thickness;
    wcd_.resize(n_el_, n_el_);
    for (const Strip& st : mesh_.strips) {
        const auto first = static_cast<Eigen::Index>(st.first_element);
        const auto ne = static_cast<Eigen::Index>(st.n_elements());
        for (Eigen::Index n = 1; n <= ne; ++n) {
            const Eigen::Index col = first + n - 1;
            if (n < ne) {
                wcd_.col(col) = d * (kernels_.a_map.col(first + n - 1) - kernels_.a_map.col(first + n));
            } else {
                wcd_.col(col) = d * kernels_.a_map.col(first + n - 1);
            }
        }
    }
    for (Eigen::Index i = 0; i < n_el_; ++i) {
        wcd_.row(i) *= two_pi_r_[i];
    }
    // Row transform of non-analyzed strips: differences of adjacent rows.
    for (int s = 0; s < n_strips_; ++s) {
        if (strip_analyzed_[static_cast<std::size_t>(s)]) {
            continue;
        }
        const Strip& st = mesh_.strips[static_cast<std::size_t>(s)];
        const auto first = static_cast<Eigen::Index>(st.first_element);
        const auto ne = static_cast<Eigen::Index>(st.n_elements());
        for (Eigen::Index e = 0; e + 1 < ne; ++e) {
            wcd_.row(first + e) -= wcd_.row(first + e + 1);
        }
    }

    strip_beta_.assign(static_cast<std::size_t>(n_strips_), 0.0);
    if (setup_.multiscale) {
        for (int s = 0; s < n_strips_; ++s) {
            const Strip& st = mesh_.strips[static_cast<std::size_t>(s)];
            double diag = 0.0;
            for (std::size_t e = st.first_element; e < st.first_element + st.n_elements(); ++e) {
                const auto ie = static_cast<Eigen::Index>(e);
                diag = std::max(diag, two_pi_r_[ie] * kernels_.a_map(ie, ie));
            }
            strip_beta_[static_cast<std::size_t>(s)] = setup_.multiscale->penalty * diag / setup_.solver.dt;
        }
    }

    bg_unit_a_ = Eigen::VectorXd::Zero(n_el_);
    bg_unit_br_ = Eigen::VectorXd::Zero(n_el_);
    bg_unit_bz_ = Eigen::VectorXd::Zero(n_el_);
    if (setup_.scenario.background) {
        for (int e = 0; e < n_el_; ++e) {
            const FieldSample f = background_unit_field(*setup_.scenario.background,
                                                        mesh_.elem_r[static_cast<std::size_t>(e)],
                                                        mesh_.elem_z[static_cast<std::size_t>(e)]);
            bg_unit_a_[e] = f.a_phi;
            bg_unit_br_[e] = f.br;
            bg_unit_bz_[e] = f.bz;
        }
    }
}

int PcrModel::strip_current_index(std::size_t strip) const {
    const Strip& st = mesh_.strips[strip];
    return static_cast<int>(st.first_element + st.n_elements() - 1);
}

SimState PcrModel::initial_state() const {
    SimState s;
    s.time = 0.0;
    s.x = Eigen::VectorXd::Zero(n_unknowns_);
    s.jc = Eigen::VectorXd::Constant(n_el_, setup_.coil.material.jc0);
    if (setup_.solver.field_dependent_jc) {
        s.jc = next_jc(s);
    }
    return s;
}

bool PcrModel::step_closed(const SimState& prev) const {
    const auto& cl = setup_.scenario.closed_loop;
    return cl && prev.time >= cl->t0;
}

Eigen::VectorXd PcrModel::element_currents(const Eigen::VectorXd& x) const {
    const double d = setup_.coil.tape_thickness;
    Eigen::VectorXd i(n_el_);
    for (const Strip& st : mesh_.strips) {
        const auto first = static_cast<Eigen::Index>(st.first_element);
        const auto ne = static_cast<Eigen::Index>(st.n_elements());
        double t_prev = 0.0;
        for (Eigen::Index e = 0; e < ne; ++e) {
            const double t_next = x[first + e];
            i[first + e] = d * (t_next - t_prev);
            t_prev = t_next;
        }
    }
    return i;
}

Eigen::VectorXd PcrModel::background_potential(double t) const {
    if (!setup_.scenario.background) {
        return Eigen::VectorXd::Zero(n_el_);
    }
    return background_current(*setup_.scenario.background, t) * bg_unit_a_;
}

Eigen::VectorXd PcrModel::next_jc(const SimState& s) const {
    const MaterialParams& mat = setup_.coil.material;
    if (!setup_.solver.field_dependent_jc) {
        return Eigen::VectorXd::Constant(n_el_, mat.jc0);
    }
    const Eigen::VectorXd i = element_currents(s.x);
    const Eigen::VectorXd br = kernels_.br_map * i;
    const Eigen::VectorXd bz = kernels_.bz_map * i;
    double ibg = 0.0;
    if (setup_.scenario.background) {
        ibg = background_current(*setup_.scenario.background, s.time);
    }
    const int fp = kernels_.field_points;
    Eigen::VectorXd jc(n_el_);
    for (Eigen::Index e = 0; e < n_el_; ++e) {
        double acc = 0.0;
        for (int q = 0; q < fp; ++q) {
            const Eigen::Index row = e * fp + q;
            acc += jc_kim(bz[row] + ibg * bg_unit_bz_[e], br[row] + ibg * bg_unit_br_[e], mat);
        }
        jc[e] = acc / fp;
    }
    return jc;
}

std::vector<LinearForm> PcrModel::strip_voltage_forms() const {
    const int p = setup_.coil.n_parallel;
    std::vector<LinearForm> u(static_cast<std::size_t>(n_strips_));
    for (int i = 0; i < setup_.coil.n_turns; ++i) {
        const TurnRole& role = layout_.turns[static_cast<std::size_t>(i)];
        for (int k = 0; k < p; ++k) {
            auto& f = u[static_cast<std::size_t>(i * p + k)];
            if (role.analyzed) {
                f = LinearForm::unknown(u_offset_ + role.slot * p + k);
            } else {
                const auto& w = role.weights[static_cast<std::size_t>(k)];
                const int sl = layout_.turns[static_cast<std::size_t>(role.left)].slot;
                const int sr = layout_.turns[static_cast<std::size_t>(role.right)].slot;
                f = LinearForm::unknown(u_offset_ + sl * p + k, w.first) +
                    LinearForm::unknown(u_offset_ + sr * p + k, w.second);
            }
        }
    }
    return u;
}

std::vector<LinearForm> PcrModel::strip_current_forms() const {
    std::vector<LinearForm> out;
    out.reserve(static_cast<std::size_t>(n_strips_));
    for (int s = 0; s < n_strips_; ++s) {
        out.push_back(LinearForm::unknown(strip_current_index(static_cast<std::size_t>(s)),
                                          setup_.coil.tape_thickness));
    }
    return out;
}

LinearForm PcrModel::op_current_form(double t) const {
    if (icoil_index_ >= 0) {
        return LinearForm::unknown(icoil_index_);
    }
    return {source_current(setup_.scenario.profile, t)};
}

std::vector<LinearForm> PcrModel::inlet_forms(const LinearForm& i_op) const {
    const int p = setup_.coil.n_parallel;
    std::vector<LinearForm> out;
    LinearForm last = i_op;
    for (int k = 0; k + 1 < p; ++k) {
        out.push_back(LinearForm::unknown(iin_offset_ + k));
        last -= out.back();
    }
    out.push_back(last);
    return out;
}

PcrModel::GlobalRows PcrModel::global_rows(double t, bool closed) const {
    const CoilSpec& spec = setup_.coil;
    const int p = spec.n_parallel;
    const int n = spec.n_turns;
    const JointResistances joints = joints_at(spec.joints, closed);

    const std::vector<LinearForm> u = strip_voltage_forms();
    const std::vector<LinearForm> i_az = strip_current_forms();
    const LinearForm i_op = op_current_form(t);
    const std::vector<LinearForm> i_in = inlet_forms(i_op);
    const RadialCurrents<LinearForm> rad = evaluate_chain(p, n, u, i_in, joints.input, contact_);

    GlobalRows g;
    g.rows.reserve(static_cast<std::size_t>(n_global_));
    // Current balance of every analyzed strip, summed over the turns since the
    // previous analyzed turn of the same tape.
    const auto& analyzed = layout_.analyzed;
    for (std::size_t a = 0; a < analyzed.size(); ++a) {
        const int turn = analyzed[a];
        const int prev_turn = a == 0 ? -1 : analyzed[a - 1];
        for (int k = 0; k < p; ++k) {
            LinearForm row = prev_turn < 0 ? i_in[static_cast<std::size_t>(k)]
                                           : i_az[static_cast<std::size_t>(prev_turn * p + k)];
            for (int mt = prev_turn + 1; mt <= turn; ++mt) {
                row += radial_inflow(p, n, k, mt, rad);
            }
            row -= i_az[static_cast<std::size_t>(turn * p + k)];
            g.rows.push_back(std::move(row));
            g.kind.push_back(RowKind::node);
        }
    }
    LinearForm transport = -i_op;
    for (int k = 0; k < p; ++k) {
        transport += i_az[static_cast<std::size_t>((n - 1) * p + k)];
    }
    g.rows.back() = transport;

    for (auto& c : output_closures(p, n, i_az, rad.dv, joints.output)) {
        g.rows.push_back(std::move(c));
        g.kind.push_back(RowKind::closure);
    }

    if (icoil_index_ >= 0) {
        const ClosedLoopConfig& cl = *setup_.scenario.closed_loop;
        if (closed) {
            LinearForm v = i_in[0] * joints.input[0] + i_az[static_cast<std::size_t>((n - 1) * p)] * joints.output[0];
            for (int i = 0; i < n; ++i) {
                v += u[static_cast<std::size_t>(i * p)];
            }
            g.rows.push_back(v + i_op * cl.r_cl);
            g.kind.push_back(RowKind::mode_voltage);
        } else {
            g.rows.push_back(i_op - LinearForm(source_current(setup_.scenario.profile, t)));
            g.kind.push_back(RowKind::mode_current);
        }
    }
    return g;
}

double PcrModel::amp_scale(const SimState& prev, double t) const {
    double ref = std::max(1.0, std::abs(source_current(setup_.scenario.profile, t)));
    if (icoil_index_ >= 0) {
        ref = std::max(ref, std::abs(prev.x[icoil_index_]));
    }
    return ref;
}

PcrModel::System PcrModel::assemble(const Eigen::VectorXd& x, const SimState& prev, double t,
                                    const Eigen::VectorXd& jc, const GlobalRows& globals,
                                    bool want_jacobian) const {
    const CoilSpec& spec = setup_.coil;
    const MaterialParams& mat = spec.material;
    const double d = spec.tape_thickness;
    const int p = spec.n_parallel;
    const double dt = t - prev.time;

    System sys;
    sys.residual.resize(n_unknowns_);
    const Eigen::VectorXd i_el = element_currents(x);

    // Resistive part and background drive, before the row transform.
    Eigen::VectorXd local(n_el_);
    Eigen::VectorXd slope(n_el_);
    const bool background = setup_.scenario.background.has_value();
    double dibg = 0.0;
    if (background) {
        dibg = (background_current(*setup_.scenario.background, t) -
                background_current(*setup_.scenario.background, prev.time)) / dt;
    }
    for (Eigen::Index e = 0; e < n_el_; ++e) {
        const auto ue = static_cast<std::size_t>(e);
        const double area = mesh_.elem_dz[ue] * d;
        const double j = i_el[e] / area;
        local[e] = two_pi_r_[e] * (ej_power_law(j, jc[e], mat) + dibg * bg_unit_a_[e]);
        slope[e] = two_pi_r_[e] * ej_power_law_slope(j, jc[e], mat) / mesh_.elem_dz[ue];
    }

    sys.residual.head(n_el_).noalias() = wcd_ * (x.head(n_el_) - prev.x.head(n_el_)) / dt;
    if (want_jacobian) {
        sys.jacobian = Eigen::MatrixXd::Zero(n_unknowns_, n_unknowns_);
        sys.jacobian.topLeftCorner(n_el_, n_el_) = wcd_ / dt;
    }

    for (int s = 0; s < n_strips_; ++s) {
        const Strip& st = mesh_.strips[static_cast<std::size_t>(s)];
        const auto first = static_cast<Eigen::Index>(st.first_element);
        const auto ne = static_cast<Eigen::Index>(st.n_elements());
        const bool analyzed = strip_analyzed_[static_cast<std::size_t>(s)];
        // d(local_e)/dT: +slope at T_{e+1} (column first+e), -slope at T_e (column first+e-1).
        auto add_local_row = [&](Eigen::Index row, Eigen::Index e, double sign) {
            sys.residual[row] += sign * local[first + e];
            if (want_jacobian) {
                sys.jacobian(row, first + e) += sign * slope[first + e];
                if (e > 0) {
                    sys.jacobian(row, first + e - 1) -= sign * slope[first + e];
                }
            }
        };
        if (analyzed) {
            const int slot = layout_.turns[static_cast<std::size_t>(st.turn)].slot;
            const int ucol = u_offset_ + slot * p + st.tape;
            for (Eigen::Index e = 0; e < ne; ++e) {
                add_local_row(first + e, e, 1.0);
                sys.residual[first + e] -= x[ucol];
                if (want_jacobian) {
                    sys.jacobian(first + e, ucol) -= 1.0;
                }
            }
            continue;
        }
        for (Eigen::Index e = 0; e < ne; ++e) {
            add_local_row(first + e, e, 1.0);
            if (e + 1 < ne) {
                add_local_row(first + e, e + 1, -1.0);
            }
        }
        // Penalty toward the interpolated strip current.
        const TurnRole& role = layout_.turns[static_cast<std::size_t>(st.turn)];
        const auto& w = role.weights[static_cast<std::size_t>(st.tape)];
        const int il = strip_current_index(mesh_.strip_index(role.left, st.tape));
        const int ir = strip_current_index(mesh_.strip_index(role.right, st.tape));
        const double target = w.first * d * x[il] + w.second * d * x[ir];
        const double beta = strip_beta_[static_cast<std::size_t>(s)];
        if (setup_.multiscale->mode == PenaltyMode::edge) {
            const Eigen::Index row = first + ne - 1;
            sys.residual[row] += beta * (d * x[first + ne - 1] - target);
            if (want_jacobian) {
                sys.jacobian(row, first + ne - 1) += beta * d;
                sys.jacobian(row, il) -= beta * w.first * d;
                sys.jacobian(row, ir) -= beta * w.second * d;
            }
        } else {
            // Consistent mass matrix on nodes 0..ne with T_0 = 0; row e belongs to node e+1.
            const double scale = beta * d / st.width();
            auto t_node = [&](Eigen::Index node) { return node == 0 ? 0.0 : x[first + node - 1]; };
            for (Eigen::Index node = 1; node <= ne; ++node) {
                const Eigen::Index row = first + node - 1;
                double acc = 0.0;
                double mass_sum = 0.0;
                for (Eigen::Index nb = node - 1; nb <= std::min(node + 1, ne); ++nb) {
                    double mnm = 0.0;
                    if (nb == node) {
                        const double hl = st.z[static_cast<std::size_t>(node)] - st.z[static_cast<std::size_t>(node - 1)];
                        const double hr = node < ne ? st.z[static_cast<std::size_t>(node + 1)] - st.z[static_cast<std::size_t>(node)] : 0.0;
                        mnm = (hl + hr) / 3.0;
                    } else {
                        const Eigen::Index lo = std::min(nb, node);
                        mnm = (st.z[static_cast<std::size_t>(lo + 1)] - st.z[static_cast<std::size_t>(lo)]) / 6.0;
                    }
                    acc += mnm * t_node(nb);
                    mass_sum += mnm;
                    if (want_jacobian && nb > 0) {
                        sys.jacobian(row, first + nb - 1) += scale * mnm;
                    }
                }
                sys.residual[row] += scale * (acc - mass_sum * target / d);
                if (want_jacobian) {
                    sys.jacobian(row, il) -= scale * mass_sum * w.first;
                    sys.jacobian(row, ir) -= scale * mass_sum * w.second;
                }
            }
        }
    }

    for (std::size_t r = 0; r < globals.rows.size(); ++r) {
        const auto row = static_cast<Eigen::Index>(n_el_ + static_cast<int>(r));
        const LinearForm& f = globals.rows[r];
        sys.residual[row] = f.eval(x);
        if (want_jacobian) {
            for (const auto& [col, a] : f.terms()) {
                sys.jacobian(row, col) += a;
            }
        }
    }
    return sys;
}

PcrModel::System PcrModel::assemble_global_residual(const Eigen::VectorXd& x, const SimState& prev,
                                                    double dt, bool want_jacobian) const {
    if (x.size() != n_unknowns_ || prev.x.size() != n_unknowns_) {
        throw SpecError("state dimension does not match the model layout");
    }
    const double t = prev.time + dt;
    const GlobalRows g = global_rows(t, step_closed(prev));
    return assemble(x, prev, t, next_jc(prev), g, want_jacobian);
}

Eigen::MatrixXd PcrModel::finite_difference_jacobian(const Eigen::VectorXd& x, const SimState& prev,
                                                     double dt, double rel_step) const {
    const double t = prev.time + dt;
    const GlobalRows g = global_rows(t, step_closed(prev));
    const Eigen::VectorXd jc = next_jc(prev);
    Eigen::MatrixXd fd(n_unknowns_, n_unknowns_);
    for (Eigen::Index c = 0; c < n_unknowns_; ++c) {
        const double h = rel_step * std::max(std::abs(x[c]), 1.0e-3);
        Eigen::VectorXd xp = x;
        Eigen::VectorXd xm = x;
        xp[c] += h;
        xm[c] -= h;
        fd.col(c) = (assemble(xp, prev, t, jc, g, false).residual -
                     assemble(xm, prev, t, jc, g, false).residual) / (2.0 * h);
    }
    return fd;
}

bool PcrModel::newton(SimState& next, const SimState& prev, double t, int& iterations) const {
    const GlobalRows g = global_rows(t, step_closed(prev));
    const Eigen::VectorXd jc = next_jc(prev);
    const double amp = amp_scale(prev, t);
    const double d = setup_.coil.tape_thickness;

    Eigen::VectorXd row_scale(n_unknowns_);
    row_scale.head(n_el_).setConstant(1.0 / v_ref_);
    for (std::size_t r = 0; r < g.rows.size(); ++r) {
        const bool current = g.kind[r] == RowKind::node || g.kind[r] == RowKind::mode_current;
        row_scale[n_el_ + static_cast<Eigen::Index>(r)] = current ? 1.0 / amp : 1.0 / v_ref_;
    }
    Eigen::VectorXd col_scale(n_unknowns_);
    col_scale.head(n_el_).setConstant(amp / d);
    col_scale.segment(u_offset_, iin_offset_ - u_offset_).setConstant(v_ref_);
    col_scale.tail(n_unknowns_ - iin_offset_).setConstant(amp);

    auto converged = [&](const Eigen::VectorXd& r) {
        const Eigen::VectorXd sr = r.cwiseProduct(row_scale);
        double volt = sr.head(n_el_).cwiseAbs().maxCoeff();
        double cur = 0.0;
        for (std::size_t k = 0; k < g.rows.size(); ++k) {
            const double v = std::abs(sr[n_el_ + static_cast<Eigen::Index>(k)]);
            if (g.kind[k] == RowKind::node || g.kind[k] == RowKind::mode_current) {
                cur = std::max(cur, v);
            } else {
                volt = std::max(volt, v);
            }
        }
        return volt <= setup_.solver.newton_tol && cur <= setup_.solver.kcl_tol;
    };

    Eigen::VectorXd x = prev.x;
    System sys = assemble(x, prev, t, jc, g, true);
    for (int it = 0; it <= setup_.solver.max_newton_iters; ++it) {
        if (!sys.residual.allFinite()) {
            return false;
        }
        if (converged(sys.residual)) {
            iterations = it;
            next.x = std::move(x);
            next.jc = jc;
            next.time = t;
            next.closed = step_closed(prev);
            return true;
        }
        if (it == setup_.solver.max_newton_iters) {
            break;
        }
        const Eigen::MatrixXd scaled = row_scale.asDiagonal() * sys.jacobian * col_scale.asDiagonal();
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(scaled);
        const Eigen::VectorXd rhs = -sys.residual.cwiseProduct(row_scale);
        Eigen::VectorXd dy = lu.solve(rhs);
        // One step of iterative refinement keeps the linear rows at round-off.
        dy += lu.solve(rhs - scaled * dy);
        const Eigen::VectorXd dx = dy.cwiseProduct(col_scale);
        if (!dx.allFinite()) {
            return false;
        }
        const double phi0 = sys.residual.cwiseProduct(row_scale).norm();
        double lambda = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 12; ++halving) {
            Eigen::VectorXd x_try = x + lambda * dx;
            System trial = assemble(x_try, prev, t, jc, g, false);
            const double phi = trial.residual.cwiseProduct(row_scale).norm();
            if (std::isfinite(phi) && (phi < phi0 || converged(trial.residual))) {
                x = std::move(x_try);
                sys.residual = std::move(trial.residual);
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            return false;
        }
        sys = assemble(x, prev, t, jc, g, true);
    }
    return false;
}

SimState PcrModel::step(const SimState& prev, double dt, StepStats* stats) const {
    if (!(dt > 0.0)) {
        throw SpecError("dt > 0");
    }
    return step_to(prev, prev.time + dt, stats);
}

SimState PcrModel::step_to(const SimState& prev, double t_target, StepStats* stats) const {
    if (!(t_target > prev.time)) {
        throw SpecError("step target after the current time");
    }
    const double span = t_target - prev.time;
    SimState cur = prev;
    double h = span;
    int total_iters = 0;
    int substeps = 0;
    while (cur.time < t_target) {
        double t_next = cur.time + h;
        if (t_next >= t_target || t_target - t_next < 1.0e-9 * span) {
            t_next = t_target;
        }
        SimState next;
        int iters = 0;
        if (newton(next, cur, t_next, iters)) {
            cur = std::move(next);
            total_iters += iters;
            ++substeps;
            continue;
        }
        h = 0.5 * (t_next - cur.time);
        if (h < setup_.solver.dt_min) {
            std::ostringstream msg;
            msg << "Newton failed to converge at t = " << cur.time << " s with dt below dt_min = "
                << setup_.solver.dt_min << " s";
            throw NonConvergence(msg.str(), cur);
        }
    }
    if (stats != nullptr) {
        stats->newton_iterations = total_iters;
        stats->substeps = substeps;
        stats->kcl_residual = derive(cur).kcl_residual;
    }
    return cur;
}

Derived PcrModel::derive(const SimState& s) const {
    const CoilSpec& spec = setup_.coil;
    const MaterialParams& mat = spec.material;
    const int p = spec.n_parallel;
    const int n = spec.n_turns;
    const double d = spec.tape_thickness;
    Derived out;
    out.i_el = element_currents(s.x);
    out.j_el.resize(n_el_);
    out.e_el.resize(n_el_);
    out.p_sc_strip.assign(static_cast<std::size_t>(n_strips_), 0.0);
    for (Eigen::Index e = 0; e < n_el_; ++e) {
        const auto ue = static_cast<std::size_t>(e);
        out.j_el[e] = out.i_el[e] / (mesh_.elem_dz[ue] * d);
        out.e_el[e] = ej_power_law(out.j_el[e], s.jc[e], mat);
        const double pe = out.e_el[e] * out.i_el[e] * two_pi_r_[e];
        out.p_sc += pe;
        out.p_sc_strip[static_cast<std::size_t>(mesh_.elem_strip[ue])] += pe;
    }

    for (const auto& f : strip_voltage_forms()) {
        out.u.push_back(f.eval(s.x));
    }
    for (const auto& f : strip_current_forms()) {
        out.i_az.push_back(f.eval(s.x));
    }
    out.i_source = source_current(setup_.scenario.profile, s.time);
    out.i_coil = icoil_index_ >= 0 ? s.x[icoil_index_] : out.i_source;
    for (const auto& f : inlet_forms(op_current_form(s.time))) {
        out.i_in.push_back(f.eval(s.x));
    }
    for (int k = 0; k < p; ++k) {
        out.i_out.push_back(out.i_az[static_cast<std::size_t>((n - 1) * p + k)]);
    }
    const JointResistances joints = joints_at(spec.joints, s.closed);
    out.radial = evaluate_chain(p, n, out.u, out.i_in, joints.input, contact_);

    std::vector<double> u0;
    for (int i = 0; i < n; ++i) {
        u0.push_back(out.u[static_cast<std::size_t>(i * p)]);
    }
    out.v_coil = coil_voltage(u0, out.i_in[0], out.i_out[0], joints);

    const RadialDrives<double> drives = radial_drive_voltages(p, n, out.radial.dv, out.u);
    for (std::size_t i = 0; i < drives.intra.size(); ++i) {
        out.p_ct += out.radial.intra[i] * drives.intra[i];
    }
    for (std::size_t i = 0; i < drives.inter.size(); ++i) {
        out.p_ct += out.radial.inter[i] * drives.inter[i];
    }
    for (int k = 0; k < p; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        out.p_joint += out.i_in[uk] * out.i_in[uk] * joints.input[uk] +
                       out.i_out[uk] * out.i_out[uk] * joints.output[uk];
    }
    if (s.closed) {
        out.p_rcl = out.i_coil * out.i_coil * setup_.scenario.closed_loop->r_cl;
    }

    const Eigen::VectorXd a_self = kernels_.a_map * out.i_el;
    out.w_mag = 0.5 * (two_pi_r_.cwiseProduct(out.i_el)).dot(a_self);
    const Eigen::VectorXd a_total = a_self + background_potential(s.time);
    out.bz_center = kernels_.center_bz.dot(out.i_el);

    std::vector<double> flux_tape(static_cast<std::size_t>(p), 0.0);
    for (const Strip& st : mesh_.strips) {
        double acc = 0.0;
        for (std::size_t e = st.first_element; e < st.first_element + st.n_elements(); ++e) {
            acc += mesh_.elem_dz[e] * a_total[static_cast<Eigen::Index>(e)];
        }
        flux_tape[static_cast<std::size_t>(st.tape)] += 2.0 * kPi * st.radius * acc / st.width();
    }
    for (double f : flux_tape) {
        out.flux += f / p;
    }

    const GlobalRows g = global_rows(s.time, s.closed);
    for (std::size_t r = 0; r < g.rows.size(); ++r) {
        if (g.kind[r] == RowKind::node) {
            out.kcl_residual = std::max(out.kcl_residual, std::abs(g.rows[r].eval(s.x)));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::size_t TimeSeriesRecord::column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) {
        throw std::out_of_range("no column " + name);
    }
    return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> TimeSeriesRecord::series(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        out.push_back(r[c]);
    }
    return out;
}

std::vector<std::string> record_columns(const PcrModel& model, const OutputConfig& outputs) {
    const CoilSpec& spec = model.setup().coil;
    const int p = spec.n_parallel;
    const int n = spec.n_turns;
    std::vector<std::string> c{"t_s", "I_source_A", "I_coil_A", "V_coil_V"};
    for (int k = 1; k <= p; ++k) {
        c.push_back("I_in_" + std::to_string(k) + "_A");
    }
    for (int k = 1; k <= p; ++k) {
        c.push_back("I_out_" + std::to_string(k) + "_A");
    }
    for (const char* name : {"Bz_center_T", "P_sc_W", "P_ct_W", "P_joint_W", "P_rcl_W", "E_source_J",
                             "E_sc_J", "E_ct_J", "E_joint_J", "E_rcl_J", "W_mag_J", "flux_Wb",
                             "kcl_residual_A", "newton_iters"}) {
        c.emplace_back(name);
    }
    for (int i = 1; i <= n; ++i) {
        for (int k = 1; k <= p; ++k) {
            c.push_back("I_az_t" + std::to_string(i) + "_k" + std::to_string(k) + "_A");
        }
    }
    for (int i = 1; i <= n; ++i) {
        for (int k = 1; k <= p; ++k) {
            c.push_back("U_t" + std::to_string(i) + "_k" + std::to_string(k) + "_V");
        }
    }
    for (int i = 1; i <= n; ++i) {
        for (int k = 1; k < p; ++k) {
            c.push_back("I_tt_t" + std::to_string(i) + "_k" + std::to_string(k) + "_A");
        }
    }
    for (int i = 1; i < n; ++i) {
        c.push_back("I_turn_t" + std::to_string(i) + "_A");
    }
    for (int k = 1; k < p; ++k) {
        for (int j = 0; j <= n; ++j) {
            c.push_back("dV_k" + std::to_string(k) + "_j" + std::to_string(j) + "_V");
        }
    }
    if (outputs.strip_losses) {
        for (int i = 1; i <= n; ++i) {
            for (int k = 1; k <= p; ++k) {
                c.push_back("P_sc_t" + std::to_string(i) + "_k" + std::to_string(k) + "_W");
            }
        }
    }
    return c;
}

namespace {

struct Energy {
    double source = 0.0;
    double sc = 0.0;
    double ct = 0.0;
    double joint = 0.0;
    double rcl = 0.0;
};

std::vector<double> make_row(const Derived& d, double t, const Energy& en, int newton_iters,
                             const OutputConfig& outputs) {
    std::vector<double> r{t, d.i_source, d.i_coil, d.v_coil};
    r.insert(r.end(), d.i_in.begin(), d.i_in.end());
    r.insert(r.end(), d.i_out.begin(), d.i_out.end());
    for (double v : {d.bz_center, d.p_sc, d.p_ct, d.p_joint, d.p_rcl, en.source, en.sc, en.ct, en.joint,
                     en.rcl, d.w_mag, d.flux, d.kcl_residual, static_cast<double>(newton_iters)}) {
        r.push_back(v);
    }
    r.insert(r.end(), d.i_az.begin(), d.i_az.end());
    r.insert(r.end(), d.u.begin(), d.u.end());
    r.insert(r.end(), d.radial.intra.begin(), d.radial.intra.end());
    r.insert(r.end(), d.radial.inter.begin(), d.radial.inter.end());
    r.insert(r.end(), d.radial.dv.begin(), d.radial.dv.end());
    if (outputs.strip_losses) {
        r.insert(r.end(), d.p_sc_strip.begin(), d.p_sc_strip.end());
    }
    return r;
}

}  // namespace

TimeSeriesRecord run(const PcrModel& model, const OutputConfig& outputs,
                     const std::optional<SimState>& start,
                     const std::function<void(const SimState&)>& on_step) {
    const auto wall0 = std::chrono::steady_clock::now();
    const Scenario& sc = model.setup().scenario;
    const double dt = model.setup().solver.dt;

    TimeSeriesRecord rec;
    rec.columns = record_columns(model, outputs);
    rec.mesh_hash = model.mesh().hash();
    SimState s = start ? *start : model.initial_state();

    Energy en;
    const double eps_t = 1.0e-9 * dt;
    double next_out = s.time;
    double next_snap = s.time;
    auto emit = [&](const Derived& d, int iters, bool force) {
        if (force || outputs.cadence <= 0.0 || s.time >= next_out - eps_t) {
            rec.rows.push_back(make_row(d, s.time, en, iters, outputs));
            if (outputs.cadence > 0.0) {
                next_out = (std::floor((s.time + eps_t) / outputs.cadence) + 1.0) * outputs.cadence;
            }
            if (outputs.snapshots && (outputs.snapshot_cadence <= 0.0 || s.time >= next_snap - eps_t)) {
                rec.snapshots.push_back({s.time, std::vector<double>(d.j_el.data(), d.j_el.data() + d.j_el.size())});
                if (outputs.snapshot_cadence > 0.0) {
                    next_snap = (std::floor((s.time + eps_t) / outputs.snapshot_cadence) + 1.0) *
                                outputs.snapshot_cadence;
                }
            }
        }
    };
    {
        const Derived d0 = model.derive(s);
        emit(d0, 0, true);
    }

    std::vector<double> stops;
    for (double b : scenario_breakpoints(sc)) {
        if (b > s.time + eps_t) {
            stops.push_back(b);
        }
    }
    for (double b : stops) {
        const double t_a = s.time;
        const int n_steps = std::max(1, static_cast<int>(std::ceil((b - t_a) / dt - 1.0e-9)));
        for (int m = 1; m <= n_steps; ++m) {
            const double t_target = m == n_steps ? b : t_a + (b - t_a) * m / n_steps;
            StepStats st;
            const double t_prev = s.time;
            s = model.step_to(s, t_target, &st);
            const double h = s.time - t_prev;
            const Derived d = model.derive(s);
            if (!s.closed) {
                en.source += d.v_coil * d.i_coil * h;
            }
            en.sc += d.p_sc * h;
            en.ct += d.p_ct * h;
            en.joint += d.p_joint * h;
            en.rcl += d.p_rcl * h;

            ++rec.stats.steps;
            rec.stats.newton_iterations += st.newton_iterations;
            rec.stats.max_newton_iterations = std::max(rec.stats.max_newton_iterations, st.newton_iterations);
            rec.stats.substeps += st.substeps;
            rec.stats.max_kcl_residual = std::max(rec.stats.max_kcl_residual, d.kcl_residual);
            rec.stats.max_kcl_ratio =
                std::max(rec.stats.max_kcl_ratio, d.kcl_residual / std::max(1.0, std::abs(d.i_coil)));
            if (on_step) {
                on_step(s);
            }
            emit(d, st.newton_iterations, m == n_steps && b == stops.back());
        }
    }
    rec.stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return rec;
}

}  // namespace pwni
