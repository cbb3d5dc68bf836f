#include "pwni/coil.hpp"

#include <algorithm>
#include <cstring>
#include <string>

namespace pwni {
namespace {

void require(bool ok, const char* what) {
    if (!ok) {
        throw SpecError(what);
    }
}

class Fnv1a {
public:
    void add(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 1099511628211ULL;
        }
    }
    void add(double v) { add(&v, sizeof v); }
    void add(std::int64_t v) { add(&v, sizeof v); }
    [[nodiscard]] std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 14695981039346656037ULL;
};

}  // namespace

CoilSpec validate_spec(const CoilSpec& spec) {
    require(spec.n_parallel >= 1, "n_parallel >= 1");
    require(spec.n_turns >= 1, "n_turns >= 1");
    require(spec.inner_radius > 0.0 && std::isfinite(spec.inner_radius), "inner_radius > 0");
    require(spec.tape_width > 0.0 && std::isfinite(spec.tape_width), "tape_width > 0");
    require(spec.tape_thickness > 0.0 && std::isfinite(spec.tape_thickness), "tape_thickness > 0");
    require(spec.radial_pitch > 0.0 && std::isfinite(spec.radial_pitch), "radial_pitch > 0");
    require(std::isfinite(spec.outer_radius()) && spec.outer_radius() > spec.inner_radius,
            "outer radius finite and > inner_radius");
    require(spec.contact_resistivity > 0.0 && !std::isnan(spec.contact_resistivity),
            "contact_resistivity > 0");
    require(std::isfinite(spec.axial_center), "axial_center finite");

    const auto& m = spec.material;
    require(m.n_value > 1.0, "material.n_value > 1");
    require(m.e0 > 0.0, "material.e0 > 0");
    require(m.jc0 > 0.0 && std::isfinite(m.jc0), "material.jc0 > 0");
    require(m.kim_b0 > 0.0, "material.kim_b0 > 0");
    require(m.kim_alpha >= 0.0, "material.kim_alpha >= 0");
    require(m.kim_m >= 0.0 && m.kim_m <= 1.0, "0 <= material.kim_m <= 1");
    require(m.mu0 > 0.0, "material.mu0 > 0");

    const auto np = static_cast<std::size_t>(spec.n_parallel);
    require(spec.joints.input.size() == np, "joints.input length == n_parallel");
    require(spec.joints.output.size() == np, "joints.output length == n_parallel");
    for (double r : spec.joints.input) {
        require(r >= 0.0 && !std::isnan(r), "joints.input entries >= 0");
    }
    for (double r : spec.joints.output) {
        require(r >= 0.0 && !std::isnan(r), "joints.output entries >= 0");
    }
    require(std::isfinite(spec.joints.closed_loop_delta), "joints.closed_loop_delta finite");
    return spec;
}

double pitch_from_diameters(double inner_diameter, double outer_diameter, int n_parallel,
                            int n_turns) {
    if (outer_diameter <= inner_diameter || n_parallel < 1 || n_turns < 1) {
        throw SpecError("outer diameter > inner diameter");
    }
    return 0.5 * (outer_diameter - inner_diameter) / (n_parallel * n_turns);
}

double contact_resistivity_from_total(double total_resistance, const CoilSpec& spec) {
    const int layers = spec.n_parallel * spec.n_turns;
    if (layers < 2) {
        throw SpecError("a contact resistance needs at least two tape layers");
    }
    double inv_r = 0.0;
    for (int layer = 0; layer + 1 < layers; ++layer) {
        inv_r += 1.0 / (spec.inner_radius + (layer + 0.5) * spec.radial_pitch);
    }
    return total_resistance * 2.0 * kPi * spec.tape_width / inv_r;
}

double jc0_from_tape_ic(double ic_tape, double tape_width, double tape_thickness) {
    return ic_tape / (tape_width * tape_thickness);
}

std::uint64_t TapeMesh::hash() const {
    Fnv1a h;
    h.add(static_cast<std::int64_t>(n_parallel));
    h.add(static_cast<std::int64_t>(n_turns));
    h.add(tape_width);
    h.add(tape_thickness);
    for (const auto& s : strips) {
        h.add(s.radius);
        h.add(static_cast<std::int64_t>(s.z.size()));
        for (double z : s.z) {
            h.add(z);
        }
    }
    return h.value();
}

TapeMesh build_mesh(const CoilSpec& spec, int elements_per_width) {
    return build_mesh(spec, std::vector<int>(static_cast<std::size_t>(std::max(spec.n_turns, 0)),
                                             elements_per_width));
}

TapeMesh build_mesh(const CoilSpec& raw, const std::vector<int>& elements_per_turn) {
    const CoilSpec spec = validate_spec(raw);
    if (elements_per_turn.size() != static_cast<std::size_t>(spec.n_turns)) {
        throw SpecError("elements_per_turn length == n_turns");
    }
    TapeMesh mesh;
    mesh.n_parallel = spec.n_parallel;
    mesh.n_turns = spec.n_turns;
    mesh.tape_width = spec.tape_width;
    mesh.tape_thickness = spec.tape_thickness;
    mesh.strips.reserve(static_cast<std::size_t>(spec.n_strips()));

    const double a = spec.axial_center - 0.5 * spec.tape_width;
    const double b = spec.axial_center + 0.5 * spec.tape_width;
    std::size_t next_element = 0;
    for (int turn = 0; turn < spec.n_turns; ++turn) {
        const int ne = elements_per_turn[static_cast<std::size_t>(turn)];
        if (ne < 2) {
            throw SpecError("elements_per_width >= 2");
        }
        for (int tape = 0; tape < spec.n_parallel; ++tape) {
            Strip s;
            s.turn = turn;
            s.tape = tape;
            s.radius = spec.tape_radius(turn, tape);
            s.first_element = next_element;
            s.z.resize(static_cast<std::size_t>(ne) + 1);
            for (int n = 0; n <= ne; ++n) {
                s.z[static_cast<std::size_t>(n)] = a + (b - a) * n / ne;
            }
            s.z.back() = b;
            for (int e = 0; e < ne; ++e) {
                const double z0 = s.z[static_cast<std::size_t>(e)];
                const double z1 = s.z[static_cast<std::size_t>(e) + 1];
                mesh.elem_r.push_back(s.radius);
                mesh.elem_z.push_back(0.5 * (z0 + z1));
                mesh.elem_dz.push_back(z1 - z0);
                mesh.elem_strip.push_back(static_cast<int>(mesh.strips.size()));
            }
            next_element += static_cast<std::size_t>(ne);
            mesh.strips.push_back(std::move(s));
        }
    }
    return mesh;
}

std::vector<double> project_elements(const TapeMesh& source, const std::vector<double>& values,
                                     const TapeMesh& target) {
    if (source.strips.size() != target.strips.size() || values.size() != source.n_elements()) {
        throw SpecError("projection needs two meshes of the same coil");
    }
    std::vector<double> out(target.n_elements(), 0.0);
    for (std::size_t s = 0; s < target.strips.size(); ++s) {
        const Strip& src = source.strips[s];
        const Strip& dst = target.strips[s];
        std::size_t se = 0;
        for (std::size_t e = 0; e < dst.n_elements(); ++e) {
            const double a = dst.z[e];
            const double b = dst.z[e + 1];
            while (se + 1 < src.n_elements() && src.z[se + 1] <= a) {
                ++se;
            }
            double acc = 0.0;
            for (std::size_t k = se; k < src.n_elements() && src.z[k] < b; ++k) {
                const double overlap = std::min(b, src.z[k + 1]) - std::max(a, src.z[k]);
                if (overlap > 0.0) {
                    acc += overlap * values[src.first_element + k];
                }
            }
            out[dst.first_element + e] = acc / (b - a);
        }
    }
    return out;
}

}  // namespace pwni
