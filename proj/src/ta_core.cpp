#include "pwni/ta_core.hpp"

#include <cmath>

namespace pwni {

double jc_kim(double b_par, double b_perp, const MaterialParams& mat) {
    const double b = std::hypot(mat.kim_m * b_par, b_perp);
    return mat.jc0 / std::pow(1.0 + b / mat.kim_b0, mat.kim_alpha);
}

double ej_power_law(double j, double jc, const MaterialParams& mat) {
    const double x = j / jc;
    return mat.e0 * std::pow(std::abs(x), mat.n_value - 1.0) * x;
}

double ej_power_law_slope(double j, double jc, const MaterialParams& mat) {
    const double x = std::abs(j / jc);
    return mat.e0 * mat.n_value * std::pow(x, mat.n_value - 1.0) / jc;
}

std::vector<double> element_current_density(const StripState& s, const std::vector<double>& z) {
    if (s.t_nodes.size() != z.size() || z.size() < 2) {
        throw SpecError("strip state and node coordinates differ in size");
    }
    std::vector<double> j(z.size() - 1);
    for (std::size_t e = 0; e + 1 < z.size(); ++e) {
        j[e] = (s.t_nodes[e + 1] - s.t_nodes[e]) / (z[e + 1] - z[e]);
    }
    return j;
}

double tape_current(const StripState& s, double d_tape) {
    return d_tape * (s.t_nodes.back() - s.t_nodes.front());
}

Eigen::VectorXd strip_residual(const StripState& s, const std::vector<double>& z,
                               const std::vector<double>& dbr_dt,
                               const std::array<double, 2>& da_dt_edges, double r,
                               const MaterialParams& mat, const std::vector<double>& jc) {
    const std::vector<double> j = element_current_density(s, z);
    const std::size_t ne = j.size();
    const bool gauss = dbr_dt.size() == 2 * ne;
    if (!gauss && dbr_dt.size() != ne) {
        throw SpecError("dbr_dt needs one or two values per element");
    }
    if (jc.size() != ne) {
        throw SpecError("jc needs one value per element");
    }
    Eigen::VectorXd res = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ne + 1));
    for (std::size_t e = 0; e < ne; ++e) {
        const double h = z[e + 1] - z[e];
        const double ee = ej_power_law(j[e], jc[e], mat);
        // Basis derivatives: -1/h on the left node, +1/h on the right.
        res[static_cast<Eigen::Index>(e)] -= ee;
        res[static_cast<Eigen::Index>(e + 1)] += ee;
        double left = 0.0;
        double right = 0.0;
        if (gauss) {
            const double g = 0.5 / std::sqrt(3.0);
            const double b0 = dbr_dt[2 * e];
            const double b1 = dbr_dt[2 * e + 1];
            left = 0.5 * h * (b0 * (0.5 + g) + b1 * (0.5 - g));
            right = 0.5 * h * (b0 * (0.5 - g) + b1 * (0.5 + g));
        } else {
            left = right = 0.5 * h * dbr_dt[e];
        }
        res[static_cast<Eigen::Index>(e)] += left;
        res[static_cast<Eigen::Index>(e + 1)] += right;
    }
    const double e_drive = s.u / (2.0 * kPi * r);
    res[0] += -da_dt_edges[0] + e_drive;
    res[static_cast<Eigen::Index>(ne)] -= -da_dt_edges[1] + e_drive;
    return res;
}

Eigen::MatrixXd strip_residual_jacobian(const StripState& s, const std::vector<double>& z,
                                        const MaterialParams& mat, const std::vector<double>& jc) {
    const std::vector<double> j = element_current_density(s, z);
    const auto n = static_cast<Eigen::Index>(z.size());
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index e = 0; e + 1 < n; ++e) {
        const auto ue = static_cast<std::size_t>(e);
        const double h = z[ue + 1] - z[ue];
        const double k = ej_power_law_slope(j[ue], jc[ue], mat) / h;
        // E_e depends on T[e+1] - T[e]; it enters rows e (-) and e+1 (+).
        jac(e, e) += k;
        jac(e, e + 1) -= k;
        jac(e + 1, e) -= k;
        jac(e + 1, e + 1) += k;
    }
    return jac;
}

}  // namespace pwni
