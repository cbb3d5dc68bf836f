#include "pwni/metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace pwni {

double compute_r_squared(const std::vector<std::vector<double>>& reference,
                         const std::vector<std::vector<double>>& candidate) {
    if (reference.size() != candidate.size() || reference.empty()) {
        throw std::invalid_argument("snapshot sets must have the same non-zero length");
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t s = 0; s < reference.size(); ++s) {
        if (reference[s].size() != candidate[s].size()) {
            throw std::invalid_argument("snapshot grids differ");
        }
        for (double v : reference[s]) {
            sum += v;
        }
        count += reference[s].size();
    }
    const double mean = sum / static_cast<double>(count);
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t s = 0; s < reference.size(); ++s) {
        for (std::size_t e = 0; e < reference[s].size(); ++e) {
            const double r = reference[s][e];
            ss_res += (r - candidate[s][e]) * (r - candidate[s][e]);
            ss_tot += (r - mean) * (r - mean);
        }
    }
    if (ss_tot == 0.0) {
        return ss_res == 0.0 ? 1.0 : 0.0;
    }
    return 1.0 - ss_res / ss_tot;
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
    double acc = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) {
        acc += 0.5 * (y[i] + y[i - 1]) * (t[i] - t[i - 1]);
    }
    return acc;
}

LossSummary integrate_losses(const TimeSeriesRecord& record) {
    const auto t = record.series("t_s");
    LossSummary out;
    out.superconductor = trapezoid(t, record.series("P_sc_W"));
    out.contact = trapezoid(t, record.series("P_ct_W"));
    out.joint = trapezoid(t, record.series("P_joint_W"));
    out.closed_loop = trapezoid(t, record.series("P_rcl_W"));
    return out;
}

std::vector<std::size_t> local_maxima(const std::vector<double>& y, double min_prominence) {
    std::vector<std::size_t> out;
    if (y.size() < 3) {
        return out;
    }
    const double scale = *std::max_element(y.begin(), y.end());
    const double threshold = min_prominence * std::abs(scale);
    for (std::size_t i = 1; i + 1 < y.size(); ++i) {
        if (!(y[i] > y[i - 1] && y[i] >= y[i + 1])) {
            continue;
        }
        // Prominence: drop to the higher of the two minima reached before a
        // higher sample (or the series end) on either side.
        double left_min = y[i];
        for (std::size_t j = i; j-- > 0;) {
            if (y[j] > y[i]) {
                break;
            }
            left_min = std::min(left_min, y[j]);
        }
        double right_min = y[i];
        for (std::size_t j = i + 1; j < y.size(); ++j) {
            if (y[j] > y[i]) {
                break;
            }
            right_min = std::min(right_min, y[j]);
        }
        if (y[i] - std::max(left_min, right_min) > threshold) {
            out.push_back(i);
        }
    }
    return out;
}

double dominant_frequency(const std::vector<double>& y, double sample_interval) {
    const int n = static_cast<int>(y.size());
    if (n < 4 || !(sample_interval > 0.0)) {
        throw std::invalid_argument("need at least four uniformly spaced samples");
    }
    double mean = 0.0;
    for (double v : y) {
        mean += v;
    }
    mean /= n;
    std::vector<double> in(y.size());
    std::transform(y.begin(), y.end(), in.begin(), [mean](double v) { return v - mean; });
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(spec.data()),
                                          FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    std::size_t best = 1;
    for (std::size_t k = 2; k < spec.size(); ++k) {
        if (std::abs(spec[k]) > std::abs(spec[best])) {
            best = k;
        }
    }
    return static_cast<double>(best) / (n * sample_interval);
}

double fit_decay_time_constant(const std::vector<double>& t, const std::vector<double>& y) {
    double st = 0.0;
    double sl = 0.0;
    double stt = 0.0;
    double stl = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (y[i] <= 0.0) {
            continue;
        }
        const double l = std::log(y[i]);
        st += t[i];
        sl += l;
        stt += t[i] * t[i];
        stl += t[i] * l;
        ++n;
    }
    if (n < 2) {
        throw std::invalid_argument("need two positive samples");
    }
    const double slope = (n * stl - st * sl) / (n * stt - st * st);
    return -1.0 / slope;
}

}  // namespace pwni
