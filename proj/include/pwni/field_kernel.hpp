#pragma once

#include "pwni/coil.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>

namespace pwni {

// ---------------------------------------------------------------------------
// Circular filament kernels (per ampere of filament current)
// ---------------------------------------------------------------------------

/// Signals an evaluation that needs a regularized self term instead of the
/// filament kernel (source and observer coincide).
class SelfTermError : public std::domain_error {
public:
    SelfTermError() : std::domain_error("use self term") {}
};

struct LoopField {
    double br = 0.0;  ///< T per A
    double bz = 0.0;  ///< T per A
};

/// A_phi (T m per A) at (r_obs, z_obs) from a unit circular filament of radius
/// r_src located at z_src.
double loop_potential(double r_src, double z_src, double r_obs, double z_obs);

/// (B_r, B_z) at (r_obs, z_obs) from a unit circular filament.
LoopField loop_field(double r_src, double z_src, double r_obs, double z_obs);

/// Mutual inductance (H) of two coaxial filaments. Symmetric in its arguments
/// bit for bit.
double loop_mutual(double r1, double z1, double r2, double z2);

/// Axis-aligned rectangle in the (r, z) half plane.
struct Rect {
    double r0, r1, z0, z1;
};

/// Natural log of the geometric mean distance between two rectangles
/// (self-GMD when both arguments are the same rectangle). Closed form.
double rect_log_gmd(const Rect& a, const Rect& b);

// ---------------------------------------------------------------------------
// Dense coupling maps over a tape mesh
// ---------------------------------------------------------------------------

class KernelMemoryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct KernelOptions {
    int field_points = 1;            ///< 1 = centroid, 2 = two-point Gauss along z
    double near_factor = 4.0;        ///< pairs closer than this many element sizes use GMD
    double memory_cap_bytes = 2.5e9;
    unsigned threads = 1;
};

/// Time-independent linear maps from element currents (A) to potentials and
/// fields. Rows are observers, columns are sources.
///
/// `a_map(i, j)` is A_phi averaged over element i per ampere flowing uniformly
/// in element j; 2 pi r_i a_map(i, j) is the mutual inductance of the two
/// element rings and is symmetric. `br_map` / `bz_map` have
/// `field_points * n_elements` rows, grouped per element.
struct KernelSet {
    Eigen::MatrixXd a_map;
    Eigen::MatrixXd br_map;
    Eigen::MatrixXd bz_map;
    Eigen::VectorXd self_regularization;  ///< equivalent filament separation (m) per element
    Eigen::VectorXd center_bz;            ///< B_z at (r=0, z=axial_center) per element ampere
    int field_points = 1;
    std::uint64_t mesh_hash = 0;

    [[nodiscard]] Eigen::Index n_elements() const { return a_map.rows(); }
};

/// Bytes needed by the three dense maps for `n_elements`.
double kernel_memory_estimate(std::size_t n_elements, int field_points = 1);

KernelSet assemble_kernels(const TapeMesh& mesh, const KernelOptions& opts = {});

/// Series-equivalent inductance (H) of the winding with every tape carrying
/// 1/n_parallel of the coil current spread uniformly over its width.
double effective_inductance(const TapeMesh& mesh, const KernelSet& kernels);
double effective_inductance(const TapeMesh& mesh);

/// Element weights c_e such that element currents are c_e * I_coil for a
/// uniform distribution.
Eigen::VectorXd uniform_current_weights(const TapeMesh& mesh);

// Binary cache: magic, version, mesh hash, sizes, then row-major float64 maps.
void save_kernel_cache(const std::filesystem::path& path, const KernelSet& kernels);
std::optional<KernelSet> load_kernel_cache(const std::filesystem::path& path,
                                           std::uint64_t mesh_hash, int field_points);

/// Assemble, going through the cache directory named by PWNI_KERNEL_CACHE when set.
KernelSet cached_kernels(const TapeMesh& mesh, const KernelOptions& opts = {});

}  // namespace pwni
