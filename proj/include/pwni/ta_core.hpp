#pragma once

#include "pwni/coil.hpp"

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace pwni {

/// Field-dependent critical current density (anisotropic Kim form).
double jc_kim(double b_par, double b_perp, const MaterialParams& mat);

/// Power-law electric field E(J) for a given Jc. Odd in J.
double ej_power_law(double j, double jc, const MaterialParams& mat);

/// dE/dJ of the power law.
double ej_power_law_slope(double j, double jc, const MaterialParams& mat);

/// Nodal current vector potential of one strip plus its terminal voltage.
///
/// U is the voltage drop along the positive azimuthal direction over one turn,
/// so inside the strip E = -dA/dt + U / (2 pi r).
struct StripState {
    std::vector<double> t_nodes;  ///< A/m
    double u = 0.0;               ///< V
};

/// J on each element: (T[e+1] - T[e]) / dz_e.
std::vector<double> element_current_density(const StripState& s, const std::vector<double>& z);

/// Net current of the strip, d_tape * (T(b) - T(a)).
double tape_current(const StripState& s, double d_tape);

/// Nodal weak-form residual of dE/dz = dBr/dt on one strip.
///
/// `dbr_dt` holds either one value per element (centroid rule) or two per
/// element (Gauss points, element-major). `da_dt_edges` are dA/dt at z = a and
/// z = b. `jc` is the critical current density per element.
Eigen::VectorXd strip_residual(const StripState& s, const std::vector<double>& z,
                               const std::vector<double>& dbr_dt,
                               const std::array<double, 2>& da_dt_edges, double r,
                               const MaterialParams& mat, const std::vector<double>& jc);

/// d(strip_residual)/d(T_nodes) with the field rates held fixed.
Eigen::MatrixXd strip_residual_jacobian(const StripState& s, const std::vector<double>& z,
                                        const MaterialParams& mat, const std::vector<double>& jc);

}  // namespace pwni
