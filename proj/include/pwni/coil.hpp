#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace pwni {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kMu0 = 4.0e-7 * kPi;

/// Thrown when a coil, mesh or run description violates one of its invariants.
/// The message names the violated invariant.
class SpecError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Superconductor constitutive parameters: E-J power law plus the anisotropic
/// Kim field dependence of the critical current density.
struct MaterialParams {
    double jc0 = 0.0;         ///< A/m^2 at zero field
    double n_value = 30.0;
    double e0 = 1.0e-4;       ///< V/m
    double kim_m = 0.0605;
    double kim_alpha = 0.7580;
    double kim_b0 = 0.103;    ///< T
    double mu0 = kMu0;
};

/// Terminal joint resistances, one entry per parallel tape (innermost first).
struct JointResistances {
    std::vector<double> input;
    std::vector<double> output;
    double closed_loop_delta = 0.0;  ///< added to every joint once the coil is closed
};

/// Physical description of a parallel-wound no-insulation pancake coil.
///
/// Tapes are indexed 0..n_parallel-1 from the inside out within a turn; turns
/// are indexed 0..n_turns-1 from the inner diameter outwards. Every tape layer
/// occupies one radial pitch. An infinite contact resistivity models an
/// insulated winding.
struct CoilSpec {
    int n_parallel = 1;
    int n_turns = 1;
    double inner_radius = 0.0;    ///< m
    double tape_width = 0.0;      ///< m
    double tape_thickness = 0.0;  ///< m
    double radial_pitch = 0.0;    ///< m, center-to-center per tape layer
    MaterialParams material;
    JointResistances joints;
    double contact_resistivity = std::numeric_limits<double>::infinity();  ///< Ohm m^2
    double axial_center = 0.0;    ///< m

    [[nodiscard]] double outer_radius() const {
        return inner_radius + n_parallel * n_turns * radial_pitch;
    }
    [[nodiscard]] bool insulated() const { return std::isinf(contact_resistivity); }

    /// Centerline radius of tape `tape` in turn `turn` (both zero-based).
    [[nodiscard]] double tape_radius(int turn, int tape) const {
        return inner_radius + ((turn * n_parallel) + tape + 0.5) * radial_pitch;
    }
    [[nodiscard]] int n_strips() const { return n_parallel * n_turns; }
};

/// Returns `spec` unchanged if every invariant holds, otherwise throws
/// SpecError naming the first violation.
CoilSpec validate_spec(const CoilSpec& spec);

/// Radial pitch that reproduces a winding pack from inner to outer diameter.
double pitch_from_diameters(double inner_diameter, double outer_diameter, int n_parallel,
                            int n_turns);

/// Area contact resistivity that makes the series sum of all layer-to-layer
/// contact resistances equal `total_resistance`.
double contact_resistivity_from_total(double total_resistance, const CoilSpec& spec);

/// Jc0 from a per-tape critical current by plain division over the tape cross-section.
double jc0_from_tape_ic(double ic_tape, double tape_width, double tape_thickness);

/// One tape strip of one turn: a 1D line along z at fixed radius.
struct Strip {
    int turn = 0;
    int tape = 0;
    double radius = 0.0;
    std::vector<double> z;          ///< node coordinates, strictly increasing
    std::size_t first_element = 0;  ///< global index of the first element

    [[nodiscard]] std::size_t n_elements() const { return z.size() - 1; }
    [[nodiscard]] std::size_t n_nodes() const { return z.size(); }
    [[nodiscard]] double width() const { return z.back() - z.front(); }
};

/// Discretized tape strips, turn-major: strip index = turn * n_parallel + tape.
struct TapeMesh {
    int n_parallel = 0;
    int n_turns = 0;
    double tape_width = 0.0;
    double tape_thickness = 0.0;
    std::vector<Strip> strips;

    // Flattened per-element data, global element order.
    std::vector<double> elem_r;
    std::vector<double> elem_z;   ///< centroid
    std::vector<double> elem_dz;
    std::vector<int> elem_strip;

    [[nodiscard]] std::size_t n_elements() const { return elem_r.size(); }
    [[nodiscard]] std::size_t strip_index(int turn, int tape) const {
        return static_cast<std::size_t>(turn) * static_cast<std::size_t>(n_parallel) +
               static_cast<std::size_t>(tape);
    }
    [[nodiscard]] const Strip& strip(int turn, int tape) const {
        return strips[strip_index(turn, tape)];
    }
    /// Stable 64-bit FNV-1a digest of the geometry, used to key caches and snapshots.
    [[nodiscard]] std::uint64_t hash() const;
};

/// Uniform discretization of every strip with `elements_per_width` elements.
TapeMesh build_mesh(const CoilSpec& spec, int elements_per_width);

/// Per-turn element counts (size n_turns); used by the multi-scale layout to
/// coarsen non-analyzed turns.
TapeMesh build_mesh(const CoilSpec& spec, const std::vector<int>& elements_per_turn);

/// Carries a per-element field from `source` onto `target` (same coil): each
/// target element takes the overlap-weighted mean of the source elements it
/// covers.
std::vector<double> project_elements(const TapeMesh& source, const std::vector<double>& values,
                                     const TapeMesh& target);

}  // namespace pwni
