#include "mzcalc/fourier.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mzcalc/stochastic.hpp"

namespace mzcalc {

namespace {

double checked_value(const PeriodicSignal& signal, double t) {
    const double v = signal.value(t);
    if (!(v >= 0.0)) {
        throw validation_error("signal must stay non-negative over its period; f(" +
                               std::to_string(t) + ") = " + std::to_string(v));
    }
    return v;
}

void check_ramp(const RampSpec& ramp) {
    if (ramp.harmonic == 0) {
        throw validation_error("ramp: harmonic index must be at least 1");
    }
    if (!std::isfinite(ramp.extra_phase)) {
        throw validation_error("ramp: extra phase must be finite");
    }
}

void check_scale(double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw validation_error("fourier: proportionality constant must be positive and finite");
    }
}

double check_period(double period) {
    if (!(period > 0.0) || !std::isfinite(period)) {
        throw validation_error("signal: period must be positive and finite");
    }
    return period;
}

double simpson_weight(std::size_t i, std::size_t last) {
    if (i == 0 || i == last) {
        return 1.0;
    }
    return i % 2 == 1 ? 4.0 : 2.0;
}

} // namespace

PeriodicSignal PeriodicSignal::from_function(std::function<double(double)> evaluator,
                                             double period) {
    if (!evaluator) {
        throw validation_error("signal: evaluator must not be empty");
    }
    PeriodicSignal signal;
    signal.evaluator_ = std::move(evaluator);
    signal.period_ = check_period(period);
    return signal;
}

PeriodicSignal PeriodicSignal::from_samples(std::vector<double> samples, double period) {
    if (samples.size() < 2) {
        throw validation_error("signal: at least 2 samples are needed to integrate");
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!std::isfinite(samples[i])) {
            throw validation_error("signal: sample " + std::to_string(i) + " is not finite");
        }
        if (samples[i] < 0.0) {
            throw validation_error("signal: sample " + std::to_string(i) + " is negative");
        }
    }
    PeriodicSignal signal;
    signal.samples_ = std::move(samples);
    signal.period_ = check_period(period);
    return signal;
}

double PeriodicSignal::value(double t) const {
    double s = std::fmod(t, period_);
    if (s < 0.0) {
        s += period_;
    }
    if (!from_table()) {
        return evaluator_(s);
    }
    const auto count = samples_.size();
    const double position = s / (period_ / static_cast<double>(count));
    auto index = static_cast<std::size_t>(position);
    if (index >= count) {
        index = count - 1;
    }
    const double fraction = position - static_cast<double>(index);
    const double left = samples_[index];
    const double right = samples_[(index + 1) % count];
    return left + (right - left) * fraction;
}

RampSpec cosine_ramp(std::uint64_t harmonic) { return RampSpec{harmonic, 0.0}; }

RampSpec sine_ramp(std::uint64_t harmonic) {
    return RampSpec{harmonic, -std::numbers::pi_v<double> / 2.0};
}

double fourier_coefficient(const PeriodicSignal& signal, const RampSpec& ramp, double scale,
                           std::size_t points) {
    check_ramp(ramp);
    check_scale(scale);

    std::size_t intervals;
    if (signal.from_table()) {
        // The sample grid is the quadrature grid; an odd sample count is
        // doubled so the interpolant is resampled onto paired intervals.
        intervals = signal.sample_count();
        if (intervals % 2 == 1) {
            intervals *= 2;
        }
    } else {
        if (points < 2) {
            throw validation_error("fourier: need at least 2 quadrature intervals");
        }
        intervals = points + points % 2;
    }

    const double tau = signal.period();
    const double h = tau / static_cast<double>(intervals);
    const double m = static_cast<double>(ramp.harmonic);
    double sum = 0.0;
    for (std::size_t i = 0; i <= intervals; ++i) {
        const double fraction = static_cast<double>(i) / static_cast<double>(intervals);
        const double g = checked_value(signal, tau * fraction) *
                         std::cos(two_pi * m * fraction + ramp.extra_phase);
        sum += simpson_weight(i, intervals) * g;
    }
    return scale * sum * h / 3.0;
}

std::vector<std::pair<double, double>> detector_difference_trace(const PeriodicSignal& signal,
                                                                 const RampSpec& ramp,
                                                                 double scale,
                                                                 std::uint64_t steps) {
    check_ramp(ramp);
    check_scale(scale);
    if (steps < 2) {
        throw validation_error("trace: need at least 2 steps");
    }

    const double tau = signal.period();
    const double m = static_cast<double>(ramp.harmonic);
    std::vector<std::pair<double, double>> trace;
    trace.reserve(static_cast<std::size_t>(steps) + 1);
    for (std::uint64_t i = 0; i <= steps; ++i) {
        const double fraction = static_cast<double>(i) / static_cast<double>(steps);
        const double t = tau * fraction;
        const double difference = scale * checked_value(signal, t) *
                                  std::cos(two_pi * m * fraction + ramp.extra_phase);
        trace.emplace_back(t, difference);
    }
    return trace;
}

StochasticFourierResult stochastic_fourier(const PeriodicSignal& signal, const RampSpec& ramp,
                                           std::uint64_t particles, std::uint64_t seed) {
    check_ramp(ramp);
    if (particles == 0) {
        throw validation_error("fourier: at least one particle is needed");
    }

    // Arrival-time density: the signal tabulated on a uniform grid, linear
    // in between, so the cumulative integral is piecewise quadratic and
    // inverts in closed form.
    const std::size_t grid =
        signal.from_table() ? signal.sample_count() : default_quadrature_points;
    const double tau = signal.period();
    const double h = tau / static_cast<double>(grid);
    std::vector<double> values(grid + 1);
    for (std::size_t i = 0; i <= grid; ++i) {
        values[i] = checked_value(signal, tau * (static_cast<double>(i) / static_cast<double>(grid)));
    }
    std::vector<double> cumulative(grid + 1, 0.0);
    for (std::size_t i = 1; i <= grid; ++i) {
        cumulative[i] = cumulative[i - 1] + 0.5 * (values[i - 1] + values[i]) * h;
    }
    const double total = cumulative[grid];
    if (!(total > 0.0)) {
        throw validation_error("fourier: signal integrates to zero, arrival times are undefined");
    }

    const double m = static_cast<double>(ramp.harmonic);
    std::uint64_t plus = 0;
    std::uint64_t minus = 0;
    for (std::uint64_t p = 0; p < particles; ++p) {
        std::uint64_t state = detail::mix64(seed, p);
        const double u_time = detail::to_unit_interval(detail::splitmix64_next(state));
        const double u_port = detail::to_unit_interval(detail::splitmix64_next(state));

        const double target = u_time * total;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
        std::size_t hi = it == cumulative.end()
                             ? grid
                             : static_cast<std::size_t>(it - cumulative.begin());
        if (hi == 0) {
            hi = 1;
        }
        const std::size_t lo = hi - 1;
        const double local = target - cumulative[lo];
        const double f0 = values[lo];
        const double slope = (values[hi] - values[lo]) / h;

        // Solve (slope / 2) s^2 + f0 s = local for the offset inside the
        // cell, in the cancellation-free form.
        double s;
        if (slope == 0.0) {
            s = f0 > 0.0 ? local / f0 : 0.5 * h;
        } else {
            const double root = std::sqrt(std::max(f0 * f0 + 2.0 * slope * local, 0.0));
            s = f0 + root > 0.0 ? 2.0 * local / (f0 + root) : 0.0;
        }
        s = std::clamp(s, 0.0, h);

        const double t = tau * (static_cast<double>(lo) / static_cast<double>(grid)) + s;
        const double chi = two_pi * m * (t / tau) + ramp.extra_phase;
        const double p_plus = 0.5 * (1.0 + std::cos(chi));
        if (u_port < p_plus) {
            ++plus;
        } else {
            ++minus;
        }
    }

    StochasticFourierResult result;
    const double mean = (static_cast<double>(plus) - static_cast<double>(minus)) /
                        static_cast<double>(particles);
    result.estimate = mean * total;
    result.standard_error =
        total * std::sqrt((1.0 - mean * mean) / static_cast<double>(particles));
    result.plus_clicks = plus;
    result.minus_clicks = minus;
    result.weight = total;
    return result;
}

AdiabaticityCheck check_adiabaticity(double energy, std::uint64_t harmonic, double period,
                                     double threshold) {
    if (!(energy > 0.0) || !std::isfinite(energy)) {
        throw validation_error("adiabaticity: particle energy must be positive and finite");
    }
    if (harmonic == 0) {
        throw validation_error("adiabaticity: harmonic index must be at least 1");
    }
    if (!(period > 0.0) || !std::isfinite(period)) {
        throw validation_error("adiabaticity: period must be positive and finite");
    }
    if (!(threshold > 0.0) || !std::isfinite(threshold)) {
        throw validation_error("adiabaticity: threshold must be positive and finite");
    }
    AdiabaticityCheck check;
    check.particle_energy = energy;
    check.ramp_rate = static_cast<double>(harmonic) / period;
    check.margin = check.ramp_rate * planck_constant / energy;
    check.threshold = threshold;
    check.valid = check.margin < threshold;
    return check;
}

namespace detail {

double simpson(const std::function<double(double)>& fn, double a, double b,
               std::size_t intervals) {
    if (intervals < 2 || intervals % 2 != 0) {
        throw validation_error("simpson: interval count must be even and at least 2");
    }
    if (!std::isfinite(a) || !std::isfinite(b)) {
        throw validation_error("simpson: bounds must be finite");
    }
    const double h = (b - a) / static_cast<double>(intervals);
    double sum = 0.0;
    for (std::size_t i = 0; i <= intervals; ++i) {
        const double x = a + h * static_cast<double>(i);
        sum += simpson_weight(i, intervals) * fn(x);
    }
    return sum * h / 3.0;
}

} // namespace detail

} // namespace mzcalc
