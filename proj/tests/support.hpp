#pragma once

#include "pwni/coil.hpp"
#include "pwni/timestepper.hpp"

#include <filesystem>

namespace pwni::test {

inline CoilSpec dual_tape_coil() {
    CoilSpec c;
    c.n_parallel = 2;
    c.n_turns = 30;
    c.inner_radius = 0.05;
    c.tape_width = 4.0e-3;
    c.tape_thickness = 0.095e-3;
    c.radial_pitch = pitch_from_diameters(0.1, 0.1114, 2, 30);
    c.material.jc0 = jc0_from_tape_ic(169.0 / 2.0, c.tape_width, c.tape_thickness);
    c.joints.input = {250e-9, 237e-9};
    c.joints.output = {584e-9, 220e-9};
    c.contact_resistivity = contact_resistivity_from_total(184e-6, c);
    return c;
}

inline CoilSpec three_tape_coil() {
    CoilSpec c;
    c.n_parallel = 3;
    c.n_turns = 32;
    c.inner_radius = 0.035;
    c.tape_width = 4.0e-3;
    c.tape_thickness = 0.095e-3;
    c.radial_pitch = pitch_from_diameters(0.07, 0.0882, 3, 32);
    c.material.jc0 = jc0_from_tape_ic(258.0 / 3.0, c.tape_width, c.tape_thickness);
    c.joints.input = {5.67e-6, 5.39e-6, 5.31e-6};
    c.joints.output = {5.04e-6, 4.93e-6, 5.22e-6};
    c.contact_resistivity = contact_resistivity_from_total(859e-6, c);
    return c;
}

/// 150-turn tape and winding pitch with a configurable turn count.
inline CoilSpec long_coil(int n_turns = 150) {
    CoilSpec c;
    c.n_parallel = 2;
    c.n_turns = n_turns;
    c.inner_radius = 0.03;
    c.tape_width = 4.0e-3;
    c.tape_thickness = 0.095e-3;
    c.radial_pitch = pitch_from_diameters(0.06, 0.1168, 2, 150);
    c.material.jc0 = jc0_from_tape_ic(233.0, c.tape_width, c.tape_thickness);
    c.joints.input = {300e-9, 300e-9};
    c.joints.output = {300e-9, 300e-9};
    c.contact_resistivity = 5.0e-9;
    return c;
}

/// Small dual-tape NI coil used by the fast solver tests.
inline CoilSpec small_coil(int n_turns = 3) {
    CoilSpec c = long_coil(n_turns);
    c.joints.input = {250e-9, 237e-9};
    c.joints.output = {584e-9, 220e-9};
    c.contact_resistivity = 5.0e-10;
    return c;
}

inline ModelSetup small_setup(int n_turns = 3, int elements = 4) {
    ModelSetup s;
    s.coil = small_coil(n_turns);
    s.elements_per_width = elements;
    s.scenario.profile = ramp_and_hold(10.0, 20.0, 1.0);
    s.scenario.t_end = 3.0;
    s.solver.dt = 0.05;
    s.solver.dt_max = 0.05;
    return s;
}

inline std::filesystem::path config_dir() { return PWNI_CONFIG_DIR; }

}  // namespace pwni::test
