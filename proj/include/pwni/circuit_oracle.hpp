#pragma once

#include "pwni/coil.hpp"
#include "pwni/pcr_chain.hpp"
#include "pwni/scenario.hpp"

#include <Eigen/Dense>

#include <vector>

namespace pwni {

/// Lumped R-L network with one loop per turn per tape.
///
/// Nodes sit at the start of every strip plus one terminal node per tape at
/// the end of the winding and the source node in front of the input joints.
/// Radial contacts take the mean potential difference of the two strips they
/// join and exchange their current at the strip start nodes.
struct OracleNetwork {
    int n_parallel = 1;
    int n_turns = 1;
    Eigen::MatrixXd inductance;   ///< H, strips ordered turn-major (i * P + k)
    ContactConductance contact;
    JointResistances joints;
    std::vector<double> strip_radius;  ///< m
    bool power_law = false;       ///< lumped E-J resistance on each strip
    MaterialParams material;
    double tape_width = 0.0;
    double tape_thickness = 0.0;

    [[nodiscard]] int n_strips() const { return n_parallel * n_turns; }
};

struct OracleOptions {
    int filaments_per_strip = 16;
    bool power_law = false;
};

OracleNetwork build_oracle_network(const CoilSpec& spec, const OracleOptions& opts = {});

/// Inductance seen by the terminals with the current shared equally by the tapes.
double oracle_effective_inductance(const OracleNetwork& net);

struct OracleSolution {
    double i_coil = 0.0;
    double v_coil = 0.0;
    std::vector<double> i_in;     ///< per tape
    std::vector<double> i_out;    ///< per tape
    std::vector<double> i_strip;  ///< per strip
};

/// DC solution with zero superconductor resistance.
OracleSolution steady_split(const OracleNetwork& net, double i_op);

struct OracleSample {
    double time = 0.0;
    OracleSolution state;
};

/// Backward-Euler integration of the network from zero current over the
/// scenario, landing on every scenario breakpoint.
std::vector<OracleSample> transient_solve(const OracleNetwork& net, const Scenario& scenario,
                                          double dt);

/// Time constants (s) of the homogeneous network, slowest first. With
/// `closed` the source is replaced by r_cl and the joints carry their
/// closed-loop offset; otherwise the source is an open current source.
std::vector<double> decay_time_constants(const OracleNetwork& net, bool closed, double r_cl = 0.0);

}  // namespace pwni
