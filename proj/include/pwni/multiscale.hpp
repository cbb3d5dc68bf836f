#pragma once

#include "pwni/coil.hpp"
#include "pwni/ta_core.hpp"

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace pwni {

enum class PenaltyMode {
    edge,         ///< penalize the strip's net current on its last row
    distributed,  ///< mass-weighted penalty on T at every node
};

struct MultiscaleConfig {
    int boundary_turns = 10;   ///< fully analyzed turns at each radial edge
    int interior_stride = 5;
    double penalty = 1.0e3;    ///< multiplier of the stiffness-scaled penalty weight
    int coarse_elements = 20;  ///< elements per width on non-analyzed strips
    PenaltyMode mode = PenaltyMode::edge;
};

void validate_multiscale(const MultiscaleConfig& cfg);

/// Zero-based analyzed turns: both edge bands plus every stride-th turn
/// counted from the inner band. Sorted, unique, always holds 0 and N-1.
std::vector<int> select_analyzed(const MultiscaleConfig& cfg, int n_turns);

/// Linear weights (w_i, w_k) of turn j between analyzed neighbours i and k.
std::pair<double, double> interp_weights(double r_i, double r_j, double r_k);

template <class S>
std::pair<S, S> interp_turn(const S& u_i, const S& i_i, const S& u_k, const S& i_k,
                            const std::pair<double, double>& w) {
    return {w.first * u_i + w.second * u_k, w.first * i_i + w.second * i_k};
}

/// Nodal contribution of the distributed penalty,
/// integral of beta (T - I_target / d) 2 pi r phi_n dz, with linear elements.
Eigen::VectorXd penalty_virtual_work(const StripState& strip, const std::vector<double>& z,
                                     double i_target, double beta, double r, double d_tape);

/// Interpolation source of one turn.
struct TurnRole {
    bool analyzed = true;
    int slot = -1;           ///< position in the analyzed list when analyzed
    int left = -1;           ///< nearest analyzed turn inside (non-analyzed only)
    int right = -1;          ///< nearest analyzed turn outside
    std::vector<std::pair<double, double>> weights;  ///< per tape
};

struct TurnLayout {
    std::vector<int> analyzed;
    std::vector<TurnRole> turns;

    [[nodiscard]] bool full() const { return analyzed.size() == turns.size(); }
    [[nodiscard]] int n_analyzed() const { return static_cast<int>(analyzed.size()); }
};

TurnLayout full_layout(int n_turns);
TurnLayout build_turn_layout(const CoilSpec& spec, std::vector<int> analyzed);

/// Element counts per turn: `fine` on analyzed turns, `coarse` elsewhere.
std::vector<int> elements_per_turn(const TurnLayout& layout, int fine, int coarse);

}  // namespace pwni
