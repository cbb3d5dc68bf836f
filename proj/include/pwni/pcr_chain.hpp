#pragma once

#include "pwni/coil.hpp"
#include "pwni/linear_form.hpp"

#include <vector>

namespace pwni {

// Indexing used throughout the chain (all zero based):
//   strip (tape k, turn i)        -> i * P + k
//   chain value dV[k][j], j=0..N  -> k * (N + 1) + j, j = 0 is the inlet and
//                                    j = i + 1 is the end of turn i
//   intra-turn path (k|k+1, i)    -> i * (P - 1) + k
//   inter-turn path (i -> i + 1)  -> i
//
// dV[k][j] is the potential of tape k minus that of tape k+1. U is the voltage
// drop of a strip along the current direction over one turn.

/// Counts of the global scalar unknowns for one coil.
struct ChainLayout {
    int n_parallel = 1;
    int n_turns = 1;
    bool closed_loop = false;

    /// Terminal voltages, P-1 free inlet currents, and the coil current when
    /// the closed-loop constraint is active.
    [[nodiscard]] int n_global() const {
        return n_parallel * n_turns + (n_parallel - 1) + (closed_loop ? 1 : 0);
    }
    [[nodiscard]] int n_intra() const { return (n_parallel - 1) * n_turns; }
    [[nodiscard]] int n_inter() const { return n_turns - 1; }
};

/// Constraint layout of an n-tape winding. Throws for n_parallel < 1.
ChainLayout generalize_chain(int n_parallel, int n_turns, bool closed_loop = false);

/// Contact conductances (S) of every radial path; all zero for an insulated coil.
struct ContactConductance {
    std::vector<double> intra;  ///< 2 pi r w / rho with r of the inner tape
    std::vector<double> inter;  ///< 2 pi r w / rho with r of the outermost tape of turn i
};

ContactConductance contact_conductances(const CoilSpec& spec);

template <class S>
struct RadialDrives {
    std::vector<S> intra;
    std::vector<S> inter;
};

template <class S>
struct RadialCurrents {
    std::vector<S> intra;  ///< positive from inner to outer tape
    std::vector<S> inter;  ///< positive from the outer tape of turn i to tape 0 of turn i+1
    std::vector<S> dv;     ///< chain values
};

/// Inter-tape potential differences along the winding.
/// `u` has P*N entries, `i_in` and `r_in` have P entries.
template <class S>
std::vector<S> dv_chain(int n_parallel, int n_turns, const std::vector<S>& u,
                        const std::vector<S>& i_in, const std::vector<double>& r_in) {
    const int p = n_parallel;
    const int n = n_turns;
    std::vector<S> dv(static_cast<std::size_t>((p - 1) * (n + 1)), S(0.0));
    for (int k = 0; k + 1 < p; ++k) {
        auto at = [&](int j) -> S& { return dv[static_cast<std::size_t>(k * (n + 1) + j)]; };
        at(0) = i_in[static_cast<std::size_t>(k + 1)] * r_in[static_cast<std::size_t>(k + 1)] -
                i_in[static_cast<std::size_t>(k)] * r_in[static_cast<std::size_t>(k)];
        for (int i = 0; i < n; ++i) {
            const S& ua = u[static_cast<std::size_t>(i * p + k)];
            const S& ub = u[static_cast<std::size_t>(i * p + k + 1)];
            at(i + 1) = at(i) - (ua - ub);
        }
    }
    return dv;
}

/// Drive voltages of the intra-turn paths (mean chain value over the turn) and
/// of the inter-turn paths (mean potential of the outer tape of turn i minus
/// that of tape 0 of turn i+1).
template <class S>
RadialDrives<S> radial_drive_voltages(int n_parallel, int n_turns, const std::vector<S>& dv,
                                      const std::vector<S>& u) {
    const int p = n_parallel;
    const int n = n_turns;
    RadialDrives<S> out;
    out.intra.assign(static_cast<std::size_t>((p - 1) * n), S(0.0));
    out.inter.assign(static_cast<std::size_t>(std::max(n - 1, 0)), S(0.0));
    auto chain = [&](int k, int j) -> const S& { return dv[static_cast<std::size_t>(k * (n + 1) + j)]; };
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k + 1 < p; ++k) {
            out.intra[static_cast<std::size_t>(i * (p - 1) + k)] = 0.5 * (chain(k, i + 1) + chain(k, i));
        }
    }
    for (int i = 0; i + 1 < n; ++i) {
        S across(0.0);
        for (int k = 0; k + 1 < p; ++k) {
            across += chain(k, i + 1);
        }
        out.inter[static_cast<std::size_t>(i)] =
            -across + 0.5 * (u[static_cast<std::size_t>((i + 1) * p)] +
                             u[static_cast<std::size_t>(i * p + p - 1)]);
    }
    return out;
}

template <class S>
RadialCurrents<S> radial_currents(const RadialDrives<S>& drives, const ContactConductance& g,
                                  std::vector<S> dv = {}) {
    RadialCurrents<S> out;
    out.intra.reserve(drives.intra.size());
    out.inter.reserve(drives.inter.size());
    for (std::size_t i = 0; i < drives.intra.size(); ++i) {
        out.intra.push_back(drives.intra[i] * g.intra[i]);
    }
    for (std::size_t i = 0; i < drives.inter.size(); ++i) {
        out.inter.push_back(drives.inter[i] * g.inter[i]);
    }
    out.dv = std::move(dv);
    return out;
}

/// Net radial inflow into strip (tape k, turn i); all radial paths of a turn
/// leave and enter at the start of that turn.
template <class S>
S radial_inflow(int n_parallel, int n_turns, int k, int i, const RadialCurrents<S>& rad) {
    const int p = n_parallel;
    S in(0.0);
    if (k > 0) {
        in += rad.intra[static_cast<std::size_t>(i * (p - 1) + k - 1)];
    }
    if (k + 1 < p) {
        in -= rad.intra[static_cast<std::size_t>(i * (p - 1) + k)];
    }
    if (k == 0 && i > 0) {
        in += rad.inter[static_cast<std::size_t>(i - 1)];
    }
    if (k + 1 == p && i + 1 < n_turns) {
        in -= rad.inter[static_cast<std::size_t>(i)];
    }
    return in;
}

/// Kirchhoff current residual of every strip: inflow minus azimuthal current.
template <class S>
std::vector<S> kcl_residuals(int n_parallel, int n_turns, const std::vector<S>& i_az,
                             const RadialCurrents<S>& rad, const std::vector<S>& i_in) {
    const int p = n_parallel;
    std::vector<S> res;
    res.reserve(static_cast<std::size_t>(p * n_turns));
    for (int i = 0; i < n_turns; ++i) {
        for (int k = 0; k < p; ++k) {
            const S& upstream = i == 0 ? i_in[static_cast<std::size_t>(k)]
                                       : i_az[static_cast<std::size_t>((i - 1) * p + k)];
            res.push_back(upstream + radial_inflow(p, n_turns, k, i, rad) -
                          i_az[static_cast<std::size_t>(i * p + k)]);
        }
    }
    return res;
}

/// Output-joint closures: dV at the end of the winding equals the joint drop
/// difference of the adjacent tapes.
template <class S>
std::vector<S> output_closures(int n_parallel, int n_turns, const std::vector<S>& i_az,
                               const std::vector<S>& dv, const std::vector<double>& r_out) {
    const int p = n_parallel;
    const int n = n_turns;
    std::vector<S> res;
    for (int k = 0; k + 1 < p; ++k) {
        const S& ia = i_az[static_cast<std::size_t>((n - 1) * p + k)];
        const S& ib = i_az[static_cast<std::size_t>((n - 1) * p + k + 1)];
        res.push_back(dv[static_cast<std::size_t>(k * (n + 1) + n)] -
                      (ia * r_out[static_cast<std::size_t>(k)] - ib * r_out[static_cast<std::size_t>(k + 1)]));
    }
    return res;
}

/// Full node-constraint block: the KCL rows with the row of the last strip
/// replaced by the transport constraint sum_k I_{k,N} = I_op, followed by the
/// P-1 output closures.
template <class S>
std::vector<S> node_constraints(int n_parallel, int n_turns, const std::vector<S>& i_az,
                                const RadialCurrents<S>& rad, const std::vector<S>& i_in,
                                const std::vector<double>& r_out, const S& i_op) {
    std::vector<S> res = kcl_residuals(n_parallel, n_turns, i_az, rad, i_in);
    S transport = -i_op;
    for (int k = 0; k < n_parallel; ++k) {
        transport += i_az[static_cast<std::size_t>((n_turns - 1) * n_parallel + k)];
    }
    res.back() = transport;
    for (auto& c : output_closures(n_parallel, n_turns, i_az, rad.dv, r_out)) {
        res.push_back(std::move(c));
    }
    return res;
}

/// Chain evaluation from terminal voltages and inlet currents to radial currents.
template <class S>
RadialCurrents<S> evaluate_chain(int n_parallel, int n_turns, const std::vector<S>& u,
                                 const std::vector<S>& i_in, const std::vector<double>& r_in,
                                 const ContactConductance& g) {
    std::vector<S> dv = dv_chain(n_parallel, n_turns, u, i_in, r_in);
    const RadialDrives<S> drives = radial_drive_voltages(n_parallel, n_turns, dv, u);
    return radial_currents(drives, g, std::move(dv));
}

}  // namespace pwni
