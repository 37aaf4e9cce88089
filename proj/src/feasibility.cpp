#include "mzcalc/feasibility.hpp"

#include <cmath>

namespace mzcalc {

double coherence_length(double wavelength, double bandwidth) {
    if (!(wavelength > 0.0) || !std::isfinite(wavelength))
        throw validation_error("wavelength must be positive and finite");
    if (!(bandwidth > 0.0) || !(bandwidth < wavelength))
        throw validation_error("bandwidth must satisfy 0 < bandwidth < wavelength");
    return wavelength * wavelength / bandwidth;
}

std::uint64_t max_factorable(double wavelength, double coherence) {
    if (!(wavelength > 0.0) || !(coherence > 0.0))
        throw validation_error("wavelength and coherence length must be positive");
    return static_cast<std::uint64_t>(coherence / wavelength);
}

std::uint64_t step_count(std::uint64_t candidate, std::uint64_t number) {
    if (candidate < 1 || number < 2)
        throw validation_error("step count needs candidate >= 1 and number >= 2");
    return candidate * number;
}

std::uint64_t worst_case_steps(std::uint64_t number) {
    if (number < 2)
        throw validation_error("worst case is defined for numbers >= 2");
    return isqrt(number) * number;
}

double visibility_envelope(std::uint64_t number, double wavelength, double coherence) {
    if (!(wavelength > 0.0) || !(coherence > 0.0))
        throw validation_error("wavelength and coherence length must be positive");
    const double x = static_cast<double>(number) * wavelength / coherence;
    return std::exp(-0.5 * x * x);
}

FeasibilityReport feasibility_report(const SourceSpec& source) {
    const double coherence = coherence_length(source.wavelength, source.bandwidth);
    const std::uint64_t max_number = max_factorable(source.wavelength, coherence);
    FeasibilityReport report{coherence, max_number, 0, max_number < 2};
    if (!report.degenerate) report.worst_case = worst_case_steps(max_number);
    return report;
}

std::uint64_t isqrt(std::uint64_t x) { return detail::isqrt_u64(x); }

} // namespace mzcalc
