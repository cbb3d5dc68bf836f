#include "pwni/pcr_chain.hpp"

namespace pwni {

ChainLayout generalize_chain(int n_parallel, int n_turns, bool closed_loop) {
    if (n_parallel < 1) {
        throw SpecError("n_parallel >= 1");
    }
    if (n_turns < 1) {
        throw SpecError("n_turns >= 1");
    }
    return {n_parallel, n_turns, closed_loop};
}

ContactConductance contact_conductances(const CoilSpec& spec) {
    const int p = spec.n_parallel;
    const int n = spec.n_turns;
    ContactConductance g;
    g.intra.assign(static_cast<std::size_t>((p - 1) * n), 0.0);
    g.inter.assign(static_cast<std::size_t>(n - 1), 0.0);
    if (spec.insulated()) {
        return g;
    }
    auto conductance = [&](double r) {
        return 2.0 * kPi * r * spec.tape_width / spec.contact_resistivity;
    };
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k + 1 < p; ++k) {
            g.intra[static_cast<std::size_t>(i * (p - 1) + k)] = conductance(spec.tape_radius(i, k));
        }
        if (i + 1 < n) {
            g.inter[static_cast<std::size_t>(i)] = conductance(spec.tape_radius(i, p - 1));
        }
    }
    return g;
}

}  // namespace pwni
