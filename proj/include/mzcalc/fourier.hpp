#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "mzcalc/core.hpp"

// Fourier coefficients by interferometry: ramp the shifter linearly through
// m turns over one signal period while the source emits with intensity
// f(t), and the detector-count difference integrates f against cos of the
// ramp. A fixed extra phase of -pi/2 turns the same run into the sine
// coefficient. The quadrature rule standing in for the physical integration
// is composite Simpson on uniform nodes.

namespace mzcalc {

/// Planck constant in joule seconds, the exact SI defining value.
inline constexpr double planck_constant = 6.62607015e-34;

/// Default interval count for closed-form signals.
inline constexpr std::size_t default_quadrature_points = 4096;

/// Positive periodic intensity f(t) with period tau, either closed form or
/// uniform samples interpreted periodically with linear interpolation (the
/// last sample wraps around to the first).
class PeriodicSignal {
public:
    static PeriodicSignal from_function(std::function<double(double)> evaluator, double period);
    static PeriodicSignal from_samples(std::vector<double> samples, double period);

    double period() const { return period_; }
    bool from_table() const { return !samples_.empty(); }
    std::size_t sample_count() const { return samples_.size(); }

    /// Value at t, reduced into [0, period).
    double value(double t) const;

private:
    PeriodicSignal() = default;

    std::function<double(double)> evaluator_;
    std::vector<double> samples_;
    double period_ = 1.0;
};

/// Linear ramp through `harmonic` turns per period, plus a constant phase.
struct RampSpec {
    std::uint64_t harmonic = 1;
    double extra_phase = 0.0;
};

RampSpec cosine_ramp(std::uint64_t harmonic);
RampSpec sine_ramp(std::uint64_t harmonic);

/// scale * integral over one period of f(t) cos(2 pi m t / tau + extra_phase).
/// Closed-form signals are evaluated at `points` uniform intervals (default
/// 4096); sampled signals use their own grid. Odd interval counts are
/// extended to even ones, Simpson needing interval pairs. Throws if the
/// signal goes negative at any node.
double fourier_coefficient(const PeriodicSignal& signal, const RampSpec& ramp,
                           double scale = 1.0,
                           std::size_t points = default_quadrature_points);

/// Instantaneous bright-minus-dark count rate scale * f(t) cos(chi(t)) on a
/// uniform grid of steps + 1 nodes covering [0, tau] inclusive. Applying
/// the quadrature rule to the trace reproduces fourier_coefficient.
std::vector<std::pair<double, double>> detector_difference_trace(const PeriodicSignal& signal,
                                                                 const RampSpec& ramp,
                                                                 double scale,
                                                                 std::uint64_t steps);

struct StochasticFourierResult {
    double estimate = 0.0;
    double standard_error = 0.0;
    std::uint64_t plus_clicks = 0;   // bright detector
    std::uint64_t minus_clicks = 0;  // dark detector
    double weight = 0.0;             // integral of f over one period
};

/// Particle-counting realization: arrival times are drawn with density
/// proportional to f, each particle picks bright or dark with probability
/// (1 +/- cos chi(t)) / 2, and (bright - dark) / particles, rescaled by the
/// integral of f, estimates the coefficient at unit scale. Deterministic
/// for a given seed.
StochasticFourierResult stochastic_fourier(const PeriodicSignal& signal, const RampSpec& ramp,
                                           std::uint64_t particles, std::uint64_t seed);

struct AdiabaticityCheck {
    double particle_energy = 0.0;  // joules
    double ramp_rate = 0.0;        // harmonic / period, hertz
    double margin = 0.0;           // ramp_rate * h / energy
    double threshold = 0.0;
    bool valid = false;            // margin strictly below threshold
};

/// The ramp must stay slow against the particle's internal frequency E / h
/// or the shifter pumps energy into the beam and the count rates no longer
/// trace f. Valid means margin = (m / tau) h / E is strictly below the
/// threshold (default one part in a thousand).
AdiabaticityCheck check_adiabaticity(double energy, std::uint64_t harmonic, double period,
                                     double threshold = 1e-3);

namespace detail {

/// Composite Simpson over [a, b] with an even number of intervals.
double simpson(const std::function<double(double)>& fn, double a, double b,
               std::size_t intervals);

} // namespace detail

} // namespace mzcalc
