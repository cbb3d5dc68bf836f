#pragma once

#include "pwni/coil.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace pwni {

/// Piecewise-linear source current.
struct DriveProfile {
    std::vector<std::pair<double, double>> points;  ///< (time s, current A)
};

void validate_profile(const DriveProfile& profile);

/// Linear interpolation of the breakpoints, held constant outside their span.
double source_current(const DriveProfile& profile, double t);

/// Ramp 0 -> peak at `rate`, hold for `hold` seconds.
DriveProfile ramp_and_hold(double rate, double peak, double hold);

struct ClosedLoopConfig {
    double t0 = 0.0;
    double r_cl = 0.0;     ///< Ohm
};

/// Closed-loop residual with the literal step function eps(t - t0) (eps(0) = 1).
double mode_residual(double i_coil, double v_coil, double t, const ClosedLoopConfig& cfg,
                     const DriveProfile& profile);

/// Same residual with the mode given explicitly; the stepper treats the step
/// (t_n, t_n+1] as closed when t_n >= t0 so that t0 is a clean breakpoint.
double mode_residual(double i_coil, double v_coil, double t, bool closed,
                     const ClosedLoopConfig& cfg, const DriveProfile& profile);

/// Joint resistances in effect, with closed_loop_delta applied when closed.
JointResistances joints_at(const JointResistances& base, bool closed);

/// Coil terminal voltage along the path of tape 0: joint drops plus the
/// terminal voltages of every turn.
double coil_voltage(const std::vector<double>& u_tape0, double i_in0, double i_out0,
                    const JointResistances& joints_now);

/// Anti-series pair of coaxial excitation coils driven by a sine that starts
/// from zero at t_start.
struct BackgroundField {
    double radius = 0.0;    ///< m
    double offset = 0.0;    ///< m, coils at axial_center +- offset
    double turns = 1.0;
    double amplitude = 0.0; ///< A
    double frequency = 0.0; ///< Hz
    double t_start = 0.0;   ///< s
    double axial_center = 0.0;
};

void validate_background(const BackgroundField& field);

double background_current(const BackgroundField& field, double t);

struct FieldSample {
    double br = 0.0;
    double bz = 0.0;
    double a_phi = 0.0;
};

/// Field and vector potential of the pair per ampere of excitation current.
FieldSample background_unit_field(const BackgroundField& field, double r, double z);

/// Radial field of the pair at each (r, z) position at time t.
std::vector<double> background_Br(const BackgroundField& field, double t,
                                  const std::vector<std::pair<double, double>>& positions);

/// Turn count giving `target_br` at (r, z) for the configured amplitude.
double calibrate_background_turns(BackgroundField field, double r, double z, double target_br);

/// Complete drive description of one run.
struct Scenario {
    DriveProfile profile;
    std::optional<ClosedLoopConfig> closed_loop;
    std::optional<BackgroundField> background;
    double t_end = 0.0;
};

void validate_scenario(const Scenario& scenario);

/// Times every step sequence must land on: profile corners, t0, the excitation start.
std::vector<double> scenario_breakpoints(const Scenario& scenario);

}  // namespace pwni
