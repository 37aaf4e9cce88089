#include "mzcalc/core.hpp"

#include <algorithm>
#include <cmath>

namespace mzcalc {

namespace {

// 2 pi split so that the leading part carries the full double mantissa and
// the tail restores another 53 bits. Used by the Cody-Waite reduction.
constexpr double two_pi_hi = 6.283185307179586232e+00;
constexpr double two_pi_lo = 2.449293598294706414e-16;
constexpr double inv_two_pi = 0.15915494309189533577;
constexpr long double two_pi_l = 6.283185307179586476925286766559L;

} // namespace

Phase::Phase(double radians) : radians_(radians) {
    if (!std::isfinite(radians))
        throw validation_error("phase must be finite");
}

PhaseSchedule::PhaseSchedule(std::uint64_t steps_, std::uint64_t number_, double deviation_,
                             std::uint64_t offset_)
    : steps(steps_), number(number_), deviation(deviation_), offset(offset_) {
    if (steps < 1)
        throw validation_error("schedule needs at least one increment per turn");
    if (number < 2)
        throw validation_error("observation stride must be at least 2");
    if (!std::isfinite(deviation) || static_cast<double>(steps) + deviation <= 0.0)
        throw validation_error("degenerate schedule: steps + deviation must be positive");
}

Phase phase_at_step(const PhaseSchedule& schedule, std::uint64_t k) {
    if (k < 1)
        throw validation_error("observation index starts at 1");
    const long double turns =
        (static_cast<long double>(k) * schedule.number + schedule.offset) /
        (static_cast<long double>(schedule.steps) + schedule.deviation);
    return Phase(static_cast<double>(two_pi_l * turns));
}

double detect_probability(Phase chi, Port port, Visibility visibility) {
    const double c = std::cos(detail::reduce_two_pi(chi.radians()));
    const double sign = (port == Port::Bright) ? 1.0 : -1.0;
    const double p = 0.5 * (1.0 + sign * visibility.value() * c);
    return std::clamp(p, 0.0, 1.0);
}

namespace detail {

double reduce_two_pi(double chi) {
    const double k = std::nearbyint(chi * inv_two_pi);
    double r = std::fma(-k, two_pi_hi, chi);
    r = std::fma(-k, two_pi_lo, r);
    return r;
}

double cos_unit_fraction(std::uint64_t num, std::uint64_t den) {
    return std::cos(two_pi * (static_cast<double>(num) / static_cast<double>(den)));
}

double cos_turns(long double turns) {
    long double frac = turns - std::floor(turns);
    return static_cast<double>(std::cos(two_pi_l * frac));
}

std::uint64_t step_residue(const PhaseSchedule& schedule, std::uint64_t k) {
    const std::uint64_t n = schedule.steps;
    // 128-bit product: exact for every uint64 k and stride.
    const unsigned __int128 phase_index =
        static_cast<unsigned __int128>(k) * schedule.number + schedule.offset;
    return static_cast<std::uint64_t>(phase_index % n);
}

std::uint64_t isqrt_u64(std::uint64_t x) {
    auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(x)));
    // The double seed can be off by one either way; fix up with 128-bit
    // squares so values near the top of the range cannot wrap.
    r = std::min<std::uint64_t>(r, 4294967295u);
    while (r > 0 && static_cast<unsigned __int128>(r) * r > x) --r;
    while (static_cast<unsigned __int128>(r + 1) * (r + 1) <= x) ++r;
    return r;
}

double cos_at_step(const PhaseSchedule& schedule, std::uint64_t k) {
    if (schedule.deviation == 0.0)
        return cos_unit_fraction(step_residue(schedule, k), schedule.steps);
    const long double turns =
        (static_cast<long double>(k) * schedule.number + schedule.offset) /
        (static_cast<long double>(schedule.steps) + schedule.deviation);
    return cos_turns(turns);
}

} // namespace detail

} // namespace mzcalc
