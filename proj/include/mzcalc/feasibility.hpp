#pragma once

#include <cstdint>

#include "mzcalc/core.hpp"

// Back-of-envelope limits for a physical realization: how large a number the
// source coherence supports, and how many phase settings a full run costs.

namespace mzcalc {

struct SourceSpec {
    double wavelength;  // meters
    double bandwidth;   // meters, 0 < bandwidth < wavelength
};

/// Coherence length lambda^2 / delta-lambda in meters.
double coherence_length(double wavelength, double bandwidth);

/// Largest integer whose interference signature still fits inside the
/// coherence length: floor(coherence / wavelength).
std::uint64_t max_factorable(double wavelength, double coherence);

/// Phase settings needed to test one candidate: candidate * number.
std::uint64_t step_count(std::uint64_t candidate, std::uint64_t number);

/// Cost of the most expensive candidate in a full scan, floor(sqrt(N)) * N.
std::uint64_t worst_case_steps(std::uint64_t number);

/// Soft visibility model: contrast decays as exp(-(N lambda / C)^2 / 2)
/// instead of cutting off sharply at max_factorable. Exploratory only.
double visibility_envelope(std::uint64_t number, double wavelength, double coherence);

struct FeasibilityReport {
    double coherence;
    std::uint64_t max_number;
    std::uint64_t worst_case;  // step cost at max_number
    bool degenerate;           // true when even 2 is out of reach
};

FeasibilityReport feasibility_report(const SourceSpec& source);

/// floor(sqrt(x)) computed exactly in integers.
std::uint64_t isqrt(std::uint64_t x);

} // namespace mzcalc
