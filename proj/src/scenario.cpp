#include "pwni/scenario.hpp"

#include "pwni/field_kernel.hpp"

#include <algorithm>
#include <cmath>

namespace pwni {

void validate_profile(const DriveProfile& profile) {
    if (profile.points.empty()) {
        throw SpecError("profile needs at least one point");
    }
    for (std::size_t i = 0; i < profile.points.size(); ++i) {
        if (!std::isfinite(profile.points[i].first) || !std::isfinite(profile.points[i].second)) {
            throw SpecError("profile points finite");
        }
        if (i > 0 && !(profile.points[i].first > profile.points[i - 1].first)) {
            throw SpecError("profile times strictly increasing");
        }
    }
}

double source_current(const DriveProfile& profile, double t) {
    const auto& p = profile.points;
    if (p.empty()) {
        return 0.0;
    }
    if (t <= p.front().first) {
        return p.front().second;
    }
    if (t >= p.back().first) {
        return p.back().second;
    }
    const auto it = std::upper_bound(p.begin(), p.end(), t,
                                     [](double v, const auto& pt) { return v < pt.first; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double s = (t - a.first) / (b.first - a.first);
    return a.second + s * (b.second - a.second);
}

DriveProfile ramp_and_hold(double rate, double peak, double hold) {
    const double t_ramp = peak / rate;
    return {{{0.0, 0.0}, {t_ramp, peak}, {t_ramp + hold, peak}}};
}

double mode_residual(double i_coil, double v_coil, double t, bool closed,
                     const ClosedLoopConfig& cfg, const DriveProfile& profile) {
    if (closed) {
        return v_coil + i_coil * cfg.r_cl;
    }
    return i_coil - source_current(profile, t);
}

double mode_residual(double i_coil, double v_coil, double t, const ClosedLoopConfig& cfg,
                     const DriveProfile& profile) {
    return mode_residual(i_coil, v_coil, t, t >= cfg.t0, cfg, profile);
}

JointResistances joints_at(const JointResistances& base, bool closed) {
    JointResistances out = base;
    if (closed) {
        for (double& r : out.input) {
            r += base.closed_loop_delta;
        }
        for (double& r : out.output) {
            r += base.closed_loop_delta;
        }
    }
    return out;
}

double coil_voltage(const std::vector<double>& u_tape0, double i_in0, double i_out0,
                    const JointResistances& joints_now) {
    double v = i_in0 * joints_now.input.front() + i_out0 * joints_now.output.front();
    for (double u : u_tape0) {
        v += u;
    }
    return v;
}

void validate_background(const BackgroundField& f) {
    if (!(f.radius > 0.0)) {
        throw SpecError("background.radius > 0");
    }
    if (!(f.offset > 0.0)) {
        throw SpecError("background.offset > 0");
    }
    if (!(f.turns > 0.0)) {
        throw SpecError("background.turns > 0");
    }
    if (!(f.frequency > 0.0)) {
        throw SpecError("background.frequency > 0");
    }
}

double background_current(const BackgroundField& f, double t) {
    if (t < f.t_start) {
        return 0.0;
    }
    return f.amplitude * std::sin(2.0 * kPi * f.frequency * (t - f.t_start));
}

FieldSample background_unit_field(const BackgroundField& f, double r, double z) {
    const double z_top = f.axial_center + f.offset;
    const double z_bot = f.axial_center - f.offset;
    const LoopField top = loop_field(f.radius, z_top, r, z);
    const LoopField bot = loop_field(f.radius, z_bot, r, z);
    FieldSample s;
    s.br = f.turns * (top.br - bot.br);
    s.bz = f.turns * (top.bz - bot.bz);
    s.a_phi = f.turns * (loop_potential(f.radius, z_top, r, z) - loop_potential(f.radius, z_bot, r, z));
    return s;
}

std::vector<double> background_Br(const BackgroundField& f, double t,
                                  const std::vector<std::pair<double, double>>& positions) {
    const double i = background_current(f, t);
    std::vector<double> out;
    out.reserve(positions.size());
    for (const auto& [r, z] : positions) {
        out.push_back(i == 0.0 ? 0.0 : i * background_unit_field(f, r, z).br);
    }
    return out;
}

double calibrate_background_turns(BackgroundField f, double r, double z, double target_br) {
    f.turns = 1.0;
    const double per_turn = std::abs(f.amplitude * background_unit_field(f, r, z).br);
    if (!(per_turn > 0.0)) {
        throw SpecError("background coil produces no radial field at the probe");
    }
    return target_br / per_turn;
}

void validate_scenario(const Scenario& s) {
    validate_profile(s.profile);
    if (!(s.t_end > 0.0)) {
        throw SpecError("scenario.t_end > 0");
    }
    if (s.closed_loop) {
        if (!(s.closed_loop->t0 >= 0.0 && s.closed_loop->t0 <= s.t_end)) {
            throw SpecError("closed_loop.t0 within simulation span");
        }
        if (!(s.closed_loop->r_cl >= 0.0)) {
            throw SpecError("closed_loop.r_cl >= 0");
        }
    }
    if (s.background) {
        validate_background(*s.background);
    }
}

std::vector<double> scenario_breakpoints(const Scenario& s) {
    std::vector<double> out;
    for (const auto& p : s.profile.points) {
        if (p.first > 0.0 && p.first < s.t_end) {
            out.push_back(p.first);
        }
    }
    if (s.closed_loop && s.closed_loop->t0 > 0.0 && s.closed_loop->t0 < s.t_end) {
        out.push_back(s.closed_loop->t0);
    }
    if (s.background && s.background->t_start > 0.0 && s.background->t_start < s.t_end) {
        out.push_back(s.background->t_start);
    }
    out.push_back(s.t_end);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace pwni
