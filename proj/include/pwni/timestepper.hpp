#pragma once

#include "pwni/coil.hpp"
#include "pwni/field_kernel.hpp"
#include "pwni/linear_form.hpp"
#include "pwni/multiscale.hpp"
#include "pwni/pcr_chain.hpp"
#include "pwni/scenario.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pwni {

enum class JacobianMode { analytic, finite_difference_check };

struct SolverConfig {
    double dt = 0.01;          ///< s
    double dt_min = 1.0e-6;    ///< s
    double dt_max = 0.01;      ///< s
    double newton_tol = 1.0e-8;  ///< scaled residual (voltage rows / 2 pi r E0)
    double kcl_tol = 1.0e-11;    ///< scaled residual of current rows (/ max(1 A, |I_op|))
    int max_newton_iters = 30;
    JacobianMode jacobian_mode = JacobianMode::analytic;
    bool field_dependent_jc = true;  ///< Kim model with the field of the previous step
};

void validate_solver(const SolverConfig& cfg);

/// Everything a model needs besides the kernels.
struct ModelSetup {
    CoilSpec coil;
    int elements_per_width = 40;
    std::optional<MultiscaleConfig> multiscale;
    Scenario scenario;
    SolverConfig solver;
    KernelOptions kernel;
};

/// Complete solver state at one instant.
///
/// `x` stacks nodal T of every strip (gauge T(a) = 0, so the first node is not
/// stored), the terminal voltages of analyzed strips, the free inlet currents
/// and, with a closed-loop constraint, the coil current. `jc` is the critical
/// current density that was used to reach this state.
struct SimState {
    double time = 0.0;
    bool closed = false;
    Eigen::VectorXd x;
    Eigen::VectorXd jc;
};

struct StepStats {
    int newton_iterations = 0;
    int substeps = 0;
    double kcl_residual = 0.0;  ///< A, worst node-constraint residual
};

/// Thrown when Newton fails at dt_min; carries the last converged state.
class NonConvergence : public std::runtime_error {
public:
    NonConvergence(const std::string& what, SimState last)
        : std::runtime_error(what), last_state(std::move(last)) {}
    SimState last_state;
};

/// Quantities derived from one state.
struct Derived {
    Eigen::VectorXd i_el;      ///< A per element
    Eigen::VectorXd j_el;      ///< A/m^2
    Eigen::VectorXd e_el;      ///< V/m
    std::vector<double> u;     ///< per strip (turn-major), interpolated on non-analyzed turns
    std::vector<double> i_az;  ///< per strip
    std::vector<double> i_in;  ///< per tape
    std::vector<double> i_out; ///< per tape
    RadialCurrents<double> radial;
    double i_coil = 0.0;
    double i_source = 0.0;
    double v_coil = 0.0;
    double bz_center = 0.0;
    double p_sc = 0.0;
    double p_ct = 0.0;
    double p_joint = 0.0;
    double p_rcl = 0.0;
    std::vector<double> p_sc_strip;
    double w_mag = 0.0;
    double flux = 0.0;          ///< mean flux linkage over the tape paths (Wb)
    double kcl_residual = 0.0;  ///< A
};

class PcrModel {
public:
    explicit PcrModel(ModelSetup setup);
    PcrModel(ModelSetup setup, KernelSet kernels);

    [[nodiscard]] const ModelSetup& setup() const { return setup_; }
    [[nodiscard]] const TapeMesh& mesh() const { return mesh_; }
    [[nodiscard]] const KernelSet& kernels() const { return kernels_; }
    [[nodiscard]] const TurnLayout& layout() const { return layout_; }
    [[nodiscard]] int n_unknowns() const { return n_unknowns_; }
    [[nodiscard]] int n_strip_rows() const { return n_el_; }
    [[nodiscard]] bool has_coil_unknown() const { return setup_.scenario.closed_loop.has_value(); }

    [[nodiscard]] SimState initial_state() const;

    struct System {
        Eigen::VectorXd residual;
        Eigen::MatrixXd jacobian;
    };

    /// Backward-Euler residual of the whole coupled system at unknowns `x` for
    /// the step from `prev` to time t = prev.time + dt, with the closed-loop
    /// flag taken from `prev`.
    [[nodiscard]] System assemble_global_residual(const Eigen::VectorXd& x, const SimState& prev,
                                                  double dt, bool want_jacobian = true) const;

    /// Central-difference Jacobian of the same residual (for checks).
    [[nodiscard]] Eigen::MatrixXd finite_difference_jacobian(const Eigen::VectorXd& x,
                                                             const SimState& prev, double dt,
                                                             double rel_step = 1.0e-6) const;

    /// One implicit step of nominal size dt. Retries with halved sub-steps down
    /// to dt_min, then throws NonConvergence.
    [[nodiscard]] SimState step(const SimState& prev, double dt, StepStats* stats = nullptr) const;
    /// Same, landing exactly on `t_target`.
    [[nodiscard]] SimState step_to(const SimState& prev, double t_target,
                                   StepStats* stats = nullptr) const;

    [[nodiscard]] Derived derive(const SimState& s) const;

    /// Critical current density per element for the step after `s`.
    [[nodiscard]] Eigen::VectorXd next_jc(const SimState& s) const;

    /// Strip-current unknown index (T at z = b) of a strip.
    [[nodiscard]] int strip_current_index(std::size_t strip) const;

    /// Voltage scale of the strip rows in the convergence check.
    [[nodiscard]] double voltage_reference() const { return v_ref_; }

private:
    void init();
    [[nodiscard]] bool step_closed(const SimState& prev) const;
    enum class RowKind { node, closure, mode_current, mode_voltage };
    struct GlobalRows {
        std::vector<LinearForm> rows;
        std::vector<RowKind> kind;
    };
    [[nodiscard]] GlobalRows global_rows(double t, bool closed) const;
    [[nodiscard]] std::vector<LinearForm> strip_voltage_forms() const;
    [[nodiscard]] std::vector<LinearForm> strip_current_forms() const;
    [[nodiscard]] std::vector<LinearForm> inlet_forms(const LinearForm& i_op) const;
    [[nodiscard]] LinearForm op_current_form(double t) const;
    [[nodiscard]] Eigen::VectorXd element_currents(const Eigen::VectorXd& x) const;
    [[nodiscard]] Eigen::VectorXd background_potential(double t) const;
    [[nodiscard]] double amp_scale(const SimState& prev, double t) const;
    bool newton(SimState& next, const SimState& prev, double t, int& iterations) const;
    [[nodiscard]] System assemble(const Eigen::VectorXd& x, const SimState& prev, double t,
                                  const Eigen::VectorXd& jc, const GlobalRows& globals,
                                  bool want_jacobian) const;

    ModelSetup setup_;
    TurnLayout layout_;
    TapeMesh mesh_;
    KernelSet kernels_;
    ContactConductance contact_;

    int n_el_ = 0;
    int n_strips_ = 0;
    int n_global_ = 0;
    int n_unknowns_ = 0;
    int u_offset_ = 0;
    int iin_offset_ = 0;
    int icoil_index_ = -1;

    std::vector<bool> strip_analyzed_;
    std::vector<double> strip_beta_;
    Eigen::MatrixXd wcd_;            ///< row transform * ring inductance * (T -> I), n_el x n_el
    Eigen::VectorXd two_pi_r_;
    Eigen::VectorXd bg_unit_a_;      ///< background A per excitation ampere at centroids
    Eigen::VectorXd bg_unit_br_;
    Eigen::VectorXd bg_unit_bz_;
    double v_ref_ = 1.0;
};

// ---------------------------------------------------------------------------
// Runs and records
// ---------------------------------------------------------------------------

struct OutputConfig {
    double cadence = 0.0;            ///< s; 0 means every step
    bool snapshots = false;          ///< keep J snapshots at output times
    double snapshot_cadence = 0.0;   ///< s; 0 means every output row
    bool strip_losses = false;       ///< per-strip superconductor loss columns
};

struct JSnapshot {
    double time = 0.0;
    std::vector<double> j;
};

struct RunStats {
    int steps = 0;
    int newton_iterations = 0;
    int max_newton_iterations = 0;
    int substeps = 0;
    double max_kcl_residual = 0.0;       ///< A
    double max_kcl_ratio = 0.0;          ///< residual / max(1 A, |I_op|)
    double wall_seconds = 0.0;
};

/// Tabular time series with a fixed column schema. Column names carry units.
struct TimeSeriesRecord {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<JSnapshot> snapshots;
    std::uint64_t mesh_hash = 0;
    RunStats stats;

    [[nodiscard]] std::size_t column(const std::string& name) const;
    [[nodiscard]] std::vector<double> series(const std::string& name) const;
};

/// Integrates the scenario from `start` (default: zero state at t = 0) to t_end.
/// `on_step` sees every accepted state.
TimeSeriesRecord run(const PcrModel& model, const OutputConfig& outputs,
                     const std::optional<SimState>& start = std::nullopt,
                     const std::function<void(const SimState&)>& on_step = {});

/// Column names of a record produced by `run` for this model.
std::vector<std::string> record_columns(const PcrModel& model, const OutputConfig& outputs);

}  // namespace pwni
