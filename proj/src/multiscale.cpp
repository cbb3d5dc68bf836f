#include "pwni/multiscale.hpp"

#include <algorithm>

namespace pwni {

void validate_multiscale(const MultiscaleConfig& cfg) {
    if (cfg.boundary_turns < 1) {
        throw SpecError("multiscale.boundary_turns >= 1");
    }
    if (cfg.interior_stride < 1) {
        throw SpecError("multiscale.interior_stride >= 1");
    }
    if (!(cfg.penalty > 0.0)) {
        throw SpecError("multiscale.penalty > 0");
    }
    if (cfg.coarse_elements < 2) {
        throw SpecError("multiscale.coarse_elements >= 2");
    }
}

std::vector<int> select_analyzed(const MultiscaleConfig& cfg, int n_turns) {
    validate_multiscale(cfg);
    std::vector<int> out;
    const int b = std::min(cfg.boundary_turns, n_turns);
    for (int t = 0; t < b; ++t) {
        out.push_back(t);
        out.push_back(n_turns - 1 - t);
    }
    // One-based turns b + m*stride up to N - b.
    for (int t = b + cfg.interior_stride; t <= n_turns - b; t += cfg.interior_stride) {
        out.push_back(t - 1);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::pair<double, double> interp_weights(double r_i, double r_j, double r_k) {
    if (!(r_k > r_i) || r_j < r_i || r_j > r_k) {
        throw SpecError("interpolation needs r_i <= r_j <= r_k with r_i < r_k");
    }
    const double span = r_k - r_i;
    return {(r_k - r_j) / span, (r_j - r_i) / span};
}

Eigen::VectorXd penalty_virtual_work(const StripState& strip, const std::vector<double>& z,
                                     double i_target, double beta, double r, double d_tape) {
    const std::size_t nn = z.size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nn));
    const double target = i_target / d_tape;
    const double scale = beta * 2.0 * kPi * r;
    for (std::size_t e = 0; e + 1 < nn; ++e) {
        const double h = z[e + 1] - z[e];
        const double a = strip.t_nodes[e] - target;
        const double b = strip.t_nodes[e + 1] - target;
        out[static_cast<Eigen::Index>(e)] += scale * h * (2.0 * a + b) / 6.0;
        out[static_cast<Eigen::Index>(e + 1)] += scale * h * (a + 2.0 * b) / 6.0;
    }
    return out;
}

TurnLayout full_layout(int n_turns) {
    TurnLayout layout;
    layout.turns.resize(static_cast<std::size_t>(n_turns));
    for (int t = 0; t < n_turns; ++t) {
        layout.analyzed.push_back(t);
        layout.turns[static_cast<std::size_t>(t)].slot = t;
    }
    return layout;
}

TurnLayout build_turn_layout(const CoilSpec& spec, std::vector<int> analyzed) {
    std::sort(analyzed.begin(), analyzed.end());
    analyzed.erase(std::unique(analyzed.begin(), analyzed.end()), analyzed.end());
    const int n = spec.n_turns;
    if (analyzed.empty() || analyzed.front() != 0 || analyzed.back() != n - 1) {
        throw SpecError("analyzed turns must include the first and last turn");
    }
    TurnLayout layout;
    layout.analyzed = analyzed;
    layout.turns.resize(static_cast<std::size_t>(n));
    for (auto& role : layout.turns) {
        role.analyzed = false;
    }
    for (std::size_t s = 0; s < analyzed.size(); ++s) {
        auto& role = layout.turns[static_cast<std::size_t>(analyzed[s])];
        role.analyzed = true;
        role.slot = static_cast<int>(s);
    }
    for (std::size_t s = 0; s + 1 < analyzed.size(); ++s) {
        const int lo = analyzed[s];
        const int hi = analyzed[s + 1];
        for (int j = lo + 1; j < hi; ++j) {
            auto& role = layout.turns[static_cast<std::size_t>(j)];
            role.left = lo;
            role.right = hi;
            for (int k = 0; k < spec.n_parallel; ++k) {
                role.weights.push_back(interp_weights(spec.tape_radius(lo, k), spec.tape_radius(j, k),
                                                      spec.tape_radius(hi, k)));
            }
        }
    }
    return layout;
}

std::vector<int> elements_per_turn(const TurnLayout& layout, int fine, int coarse) {
    std::vector<int> out;
    out.reserve(layout.turns.size());
    for (const auto& role : layout.turns) {
        out.push_back(role.analyzed ? fine : coarse);
    }
    return out;
}

}  // namespace pwni
