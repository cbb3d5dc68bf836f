#include "pwni/circuit_oracle.hpp"

#include "pwni/field_kernel.hpp"
#include "pwni/ta_core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace pwni {

OracleNetwork build_oracle_network(const CoilSpec& spec, const OracleOptions& opts) {
    validate_spec(spec);
    if (opts.filaments_per_strip < 1) {
        throw SpecError("oracle.filaments_per_strip >= 1");
    }
    OracleNetwork net;
    net.n_parallel = spec.n_parallel;
    net.n_turns = spec.n_turns;
    net.contact = contact_conductances(spec);
    net.joints = spec.joints;
    net.power_law = opts.power_law;
    net.material = spec.material;
    net.tape_width = spec.tape_width;
    net.tape_thickness = spec.tape_thickness;

    const int ns = spec.n_strips();
    const int nf = opts.filaments_per_strip;
    const double h = spec.tape_width / nf;
    const double d = spec.tape_thickness;
    const double near = 4.0 * std::max(h, d);
    for (int i = 0; i < spec.n_turns; ++i) {
        for (int k = 0; k < spec.n_parallel; ++k) {
            net.strip_radius.push_back(spec.tape_radius(i, k));
        }
    }
    std::vector<double> zf(static_cast<std::size_t>(nf));
    for (int f = 0; f < nf; ++f) {
        zf[static_cast<std::size_t>(f)] = spec.axial_center - 0.5 * spec.tape_width + (f + 0.5) * h;
    }

    // Equal current share per filament, so the strip-to-strip inductance is the
    // mean filament mutual.
    net.inductance.resize(ns, ns);
    for (int s = 0; s < ns; ++s) {
        const double rs = net.strip_radius[static_cast<std::size_t>(s)];
        for (int t = s; t < ns; ++t) {
            const double rt = net.strip_radius[static_cast<std::size_t>(t)];
            double acc = 0.0;
            for (int f = 0; f < nf; ++f) {
                for (int g = 0; g < nf; ++g) {
                    const double z1 = zf[static_cast<std::size_t>(f)];
                    const double z2 = zf[static_cast<std::size_t>(g)];
                    const Rect a{rs - 0.5 * d, rs + 0.5 * d, z1 - 0.5 * h, z1 + 0.5 * h};
                    if (s == t && f == g) {
                        acc += kMu0 * rs * (std::log(8.0 * rs) - rect_log_gmd(a, a) - 2.0);
                        continue;
                    }
                    const double dr = rt - rs;
                    const double dz = z2 - z1;
                    const double dist = std::hypot(dr, dz);
                    if (dist < near) {
                        // Filament pair at the cross-section GMD along the centroid direction.
                        const Rect b{rt - 0.5 * d, rt + 0.5 * d, z2 - 0.5 * h, z2 + 0.5 * h};
                        const double gmd = std::exp(rect_log_gmd(a, b));
                        acc += loop_mutual(rs, z1, rs + gmd * dr / dist, z1 + gmd * dz / dist);
                    } else {
                        acc += loop_mutual(rs, z1, rt, z2);
                    }
                }
            }
            net.inductance(s, t) = acc / (static_cast<double>(nf) * nf);
            net.inductance(t, s) = net.inductance(s, t);
        }
    }
    return net;
}

double oracle_effective_inductance(const OracleNetwork& net) {
    const double p = net.n_parallel;
    return net.inductance.sum() / (p * p);
}

namespace {

// Unknown vector: node potentials (tape k, position j = 0..N) at k*(N+1)+j,
// then the source node, then the strip currents.
struct Layout {
    int p;
    int n;
    [[nodiscard]] int node(int k, int j) const { return k * (n + 1) + j; }
    [[nodiscard]] int source() const { return p * (n + 1); }
    [[nodiscard]] int current(int i, int k) const { return p * (n + 1) + 1 + i * p + k; }
    [[nodiscard]] int size() const { return p * (n + 1) + 1 + p * n; }
};

enum class SourceMode { driven, closed };

// Linear part K and the inductive part M of  M y' + K y = s.
struct LinearNetwork {
    Eigen::MatrixXd k;
    Eigen::MatrixXd m;
};

LinearNetwork linear_network(const OracleNetwork& net, const JointResistances& joints, SourceMode mode,
                             double r_cl, bool dc) {
    const Layout lay{net.n_parallel, net.n_turns};
    const int p = lay.p;
    const int n = lay.n;
    LinearNetwork out;
    out.k = Eigen::MatrixXd::Zero(lay.size(), lay.size());
    out.m = Eigen::MatrixXd::Zero(lay.size(), lay.size());
    auto& k = out.k;

    // KCL rows hold the net current leaving each node.
    for (int kk = 0; kk < p; ++kk) {
        for (int j = 0; j <= n; ++j) {
            const int row = lay.node(kk, j);
            if (j < n) {
                k(row, lay.current(j, kk)) += 1.0;
            }
            if (j > 0) {
                k(row, lay.current(j - 1, kk)) -= 1.0;
            }
        }
        const double gin = 1.0 / joints.input[static_cast<std::size_t>(kk)];
        const double gout = 1.0 / joints.output[static_cast<std::size_t>(kk)];
        const int first = lay.node(kk, 0);
        const int last = lay.node(kk, n);
        k(first, first) += gin;
        k(first, lay.source()) -= gin;
        k(last, last) += gout;
        k(lay.source(), lay.source()) += gin;
        k(lay.source(), first) -= gin;
    }
    // Radial path from node a (tape ka) to node b (tape kb), driven by the mean
    // potential of the two strips.
    auto radial = [&](double g, int ka, int ja, int kb, int jb) {
        if (g == 0.0) {
            return;
        }
        const int a = lay.node(ka, ja);
        const int b = lay.node(kb, jb);
        const int drive[4] = {lay.node(ka, ja), lay.node(ka, ja + 1), lay.node(kb, jb), lay.node(kb, jb + 1)};
        const double coeff[4] = {0.5 * g, 0.5 * g, -0.5 * g, -0.5 * g};
        for (int q = 0; q < 4; ++q) {
            k(a, drive[q]) += coeff[q];
            k(b, drive[q]) -= coeff[q];
        }
    };
    for (int i = 0; i < n; ++i) {
        for (int kk = 0; kk + 1 < p; ++kk) {
            radial(net.contact.intra[static_cast<std::size_t>(i * (p - 1) + kk)], kk, i, kk + 1, i);
        }
        if (i + 1 < n) {
            radial(net.contact.inter[static_cast<std::size_t>(i)], p - 1, i, 0, i + 1);
        }
    }
    if (mode == SourceMode::closed) {
        // R_cl * (current into the joints) + V_source = 0.
        k.row(lay.source()) *= r_cl;
        k(lay.source(), lay.source()) += 1.0;
    }
    // Branch rows: L I' + R I - (phi_start - phi_end) = 0.
    for (int i = 0; i < n; ++i) {
        for (int kk = 0; kk < p; ++kk) {
            const int row = lay.current(i, kk);
            k(row, lay.node(kk, i)) -= 1.0;
            k(row, lay.node(kk, i + 1)) += 1.0;
            if (!dc) {
                for (int i2 = 0; i2 < n; ++i2) {
                    for (int k2 = 0; k2 < p; ++k2) {
                        out.m(row, lay.current(i2, k2)) = net.inductance(i * p + kk, i2 * p + k2);
                    }
                }
            }
        }
    }
    return out;
}

// Scales each row to unit max-norm; the same scaling is applied to M.
Eigen::VectorXd row_equilibrate(LinearNetwork& sys) {
    Eigen::VectorXd scale(sys.k.rows());
    for (Eigen::Index r = 0; r < sys.k.rows(); ++r) {
        const double m = std::max(sys.k.row(r).cwiseAbs().maxCoeff(), sys.m.row(r).cwiseAbs().maxCoeff());
        scale[r] = m > 0.0 ? 1.0 / m : 1.0;
        sys.k.row(r) *= scale[r];
        sys.m.row(r) *= scale[r];
    }
    return scale;
}

OracleSolution unpack(const OracleNetwork& net, const Eigen::VectorXd& y, const JointResistances& joints) {
    const Layout lay{net.n_parallel, net.n_turns};
    OracleSolution s;
    s.v_coil = y[lay.source()];
    for (int k = 0; k < lay.p; ++k) {
        const double iin = (y[lay.source()] - y[lay.node(k, 0)]) / joints.input[static_cast<std::size_t>(k)];
        s.i_in.push_back(iin);
        s.i_out.push_back(y[lay.node(k, lay.n)] / joints.output[static_cast<std::size_t>(k)]);
        s.i_coil += iin;
    }
    for (int i = 0; i < lay.n; ++i) {
        for (int k = 0; k < lay.p; ++k) {
            s.i_strip.push_back(y[lay.current(i, k)]);
        }
    }
    return s;
}

}  // namespace

OracleSolution steady_split(const OracleNetwork& net, double i_op) {
    const Layout lay{net.n_parallel, net.n_turns};
    LinearNetwork sys = linear_network(net, net.joints, SourceMode::driven, 0.0, true);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(lay.size());
    rhs[lay.source()] = i_op;
    const Eigen::VectorXd scale = row_equilibrate(sys);
    rhs = rhs.cwiseProduct(scale);
    const Eigen::VectorXd y = sys.k.fullPivLu().solve(rhs);
    return unpack(net, y, net.joints);
}

std::vector<OracleSample> transient_solve(const OracleNetwork& net, const Scenario& scenario, double dt) {
    validate_scenario(scenario);
    if (!(dt > 0.0)) {
        throw SpecError("dt > 0");
    }
    const Layout lay{net.n_parallel, net.n_turns};
    const double area = net.tape_width * net.tape_thickness;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(lay.size());
    std::vector<OracleSample> out;
    out.push_back({0.0, unpack(net, y, net.joints)});

    double t = 0.0;
    for (double stop : scenario_breakpoints(scenario)) {
        if (stop <= t) {
            continue;
        }
        const double t_a = t;
        const int n_steps = std::max(1, static_cast<int>(std::ceil((stop - t_a) / dt - 1.0e-9)));
        for (int m = 1; m <= n_steps; ++m) {
            const double t_next = m == n_steps ? stop : t_a + (stop - t_a) * m / n_steps;
            const double h = t_next - t;
            const bool closed = scenario.closed_loop && t >= scenario.closed_loop->t0;
            const JointResistances joints = joints_at(net.joints, closed);
            LinearNetwork sys = linear_network(net, joints, closed ? SourceMode::closed : SourceMode::driven,
                                               closed ? scenario.closed_loop->r_cl : 0.0, false);
            Eigen::VectorXd rhs = sys.m * y / h;
            if (!closed) {
                rhs[lay.source()] += source_current(scenario.profile, t_next);
            }
            Eigen::MatrixXd a = sys.m / h + sys.k;
            Eigen::VectorXd x = y;
            // Newton on the lumped power law; a single linear solve otherwise.
            for (int it = 0; it < 50; ++it) {
                Eigen::VectorXd res = a * x - rhs;
                Eigen::MatrixXd jac = a;
                if (net.power_law) {
                    for (int i = 0; i < lay.n; ++i) {
                        for (int k = 0; k < lay.p; ++k) {
                            const int c = lay.current(i, k);
                            const double len = 2.0 * kPi * net.strip_radius[static_cast<std::size_t>(i * lay.p + k)];
                            const double jv = x[c] / area;
                            res[c] += len * ej_power_law(jv, net.material.jc0, net.material);
                            jac(c, c) += len * ej_power_law_slope(jv, net.material.jc0, net.material) / area;
                        }
                    }
                }
                LinearNetwork scaled{jac, Eigen::MatrixXd::Zero(jac.rows(), jac.cols())};
                const Eigen::VectorXd sc = row_equilibrate(scaled);
                const Eigen::VectorXd r_scaled = res.cwiseProduct(sc);
                const Eigen::VectorXd dx = scaled.k.partialPivLu().solve(-r_scaled);
                x += dx;
                if (!net.power_law || dx.cwiseAbs().maxCoeff() <= 1.0e-12 * std::max(1.0, x.cwiseAbs().maxCoeff())) {
                    break;
                }
            }
            y = x;
            t = t_next;
            OracleSample sample{t, unpack(net, y, joints)};
            if (!closed) {
                sample.state.i_coil = source_current(scenario.profile, t);
            }
            out.push_back(std::move(sample));
        }
    }
    return out;
}

std::vector<double> decay_time_constants(const OracleNetwork& net, bool closed, double r_cl) {
    const JointResistances joints = joints_at(net.joints, closed);
    LinearNetwork sys = linear_network(net, joints, closed ? SourceMode::closed : SourceMode::driven, r_cl, false);
    row_equilibrate(sys);
    // K v = (1/tau) M v; the algebraic rows give infinite eigenvalues.
    const double m_scale = sys.k.cwiseAbs().maxCoeff() / sys.m.cwiseAbs().maxCoeff();
    Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> ges(sys.k, m_scale * sys.m, false);
    std::vector<double> taus;
    const auto& alphas = ges.alphas();
    const auto& betas = ges.betas();
    for (Eigen::Index i = 0; i < alphas.size(); ++i) {
        const double a = alphas[i].real();
        const double b = betas[i];
        if (std::abs(b) <= 1.0e-12 * std::abs(alphas[i])) {
            continue;
        }
        const double lambda = m_scale * a / b;
        if (lambda > 0.0) {
            taus.push_back(1.0 / lambda);
        }
    }
    std::sort(taus.rbegin(), taus.rend());
    return taus;
}

}  // namespace pwni
