#pragma once

#include "pwni/timestepper.hpp"

#include <vector>

namespace pwni {

/// 1 - SS_res / SS_tot over every element of every snapshot.
double compute_r_squared(const std::vector<std::vector<double>>& reference,
                         const std::vector<std::vector<double>>& candidate);

struct LossSummary {
    double superconductor = 0.0;  ///< J
    double contact = 0.0;
    double joint = 0.0;
    double closed_loop = 0.0;     ///< dissipated in R_cl

    [[nodiscard]] double total() const { return superconductor + contact + joint + closed_loop; }
};

/// Trapezoidal time integral of the instantaneous loss columns.
LossSummary integrate_losses(const TimeSeriesRecord& record);

double trapezoid(const std::vector<double>& t, const std::vector<double>& y);

/// Indices of interior local maxima whose prominence exceeds
/// `min_prominence` times the largest value of the series.
std::vector<std::size_t> local_maxima(const std::vector<double>& y, double min_prominence = 0.01);

/// Frequency (Hz) of the largest non-DC bin of the mean-removed, uniformly
/// sampled series.
double dominant_frequency(const std::vector<double>& y, double sample_interval);

/// Least-squares time constant of y(t) = a exp(-t / tau) over samples with y > 0.
double fit_decay_time_constant(const std::vector<double>& t, const std::vector<double>& y);

}  // namespace pwni
