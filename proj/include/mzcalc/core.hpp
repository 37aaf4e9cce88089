#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

// Core two-port interferometer model: a particle crosses a loop whose phase
// shifter is advanced in discrete increments, and leaves through the bright
// or the dark port with a probability set by the accumulated phase.

namespace mzcalc {

// Thrown when an argument violates a documented precondition.
struct validation_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Thrown on file or stream failures, including malformed input files.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double two_pi = 6.28318530717958647692528676655900577;

// Output port of a balanced (50/50) two-beam interferometer.
enum class Port { Bright, Dark };

/// Fringe visibility: scales the interference term, 1 = ideal contrast.
class Visibility {
public:
    explicit Visibility(double value) : value_(value) {
        if (!(value >= 0.0 && value <= 1.0))
            throw validation_error("visibility must lie in [0, 1], got " + std::to_string(value));
    }
    static Visibility ideal() { return Visibility(1.0); }
    double value() const { return value_; }

private:
    double value_;
};

/// Interferometer phase in radians, stored unreduced (may exceed 2 pi).
class Phase {
public:
    explicit Phase(double radians);
    double radians() const { return radians_; }

private:
    double radians_;
};

/// Stepping plan for one loop: the shifter advances by 2 pi / (steps + deviation)
/// per increment, and the k-th observation happens after k * number increments
/// (plus a fixed starting offset).
struct PhaseSchedule {
    std::uint64_t steps;     // nominal increments per full turn, >= 1
    std::uint64_t number;    // increments between consecutive observations, >= 2
    double deviation;        // calibration error on the increment divisor
    std::uint64_t offset;    // increments already applied before the first stride

    PhaseSchedule(std::uint64_t steps_, std::uint64_t number_, double deviation_ = 0.0,
                  std::uint64_t offset_ = 0);
};

/// Phase after the k-th observation stride: 2 pi (k * number + offset) / (steps + deviation).
Phase phase_at_step(const PhaseSchedule& schedule, std::uint64_t k);

/// Detection probability at the chosen port: (1 +/- v cos chi) / 2.
/// Result is clamped to [0, 1] to absorb rounding at the fringe extremes.
double detect_probability(Phase chi, Port port, Visibility visibility);

namespace detail {

// chi mod 2 pi, reduced into [-pi, pi] with a two-term Cody-Waite split and
// fused multiply-adds. The quotient fits a double for |chi| < ~1e15, which
// keeps the reduction error below ~5e-16 over the whole supported range.
double reduce_two_pi(double chi);

// cos(2 pi num / den) for an already-reduced fraction, 0 <= num < den.
// num = 0 yields exactly 1, and num = den/2 (even den) yields exactly -1,
// so on-fringe and anti-fringe probabilities come out binary exact.
double cos_unit_fraction(std::uint64_t num, std::uint64_t den);

// cos(2 pi t) with the fractional part of t taken in extended precision.
double cos_turns(long double turns);

// (k * number + offset) mod steps in exact integer arithmetic.
std::uint64_t step_residue(const PhaseSchedule& schedule, std::uint64_t k);

// floor(sqrt(x)) with integer fixup of the floating seed.
std::uint64_t isqrt_u64(std::uint64_t x);

// Cosine of the phase at observation k. Uses the exact residue path when
// deviation is zero, otherwise reduces the rational turn count in extended
// precision before calling the libm cosine. This is what keeps interference
// sums trustworthy when k * number reaches 1e10 and beyond.
double cos_at_step(const PhaseSchedule& schedule, std::uint64_t k);

} // namespace detail

} // namespace mzcalc
