#pragma once

#include <cstdint>
#include <vector>

#include "mzcalc/core.hpp"

// Factor testing with a single phase-stepped loop. The shifter advances by
// 2 pi / n per increment; sampling the bright port once every N increments
// and summing n such observations gives intensity n when n divides N and
// n/2 otherwise, because the off-divisor cosine terms run through a full
// set of roots of unity and cancel.

namespace mzcalc {

enum class Classification { Factor, NonFactor };

struct FactorTestResult {
    std::uint64_t number;       // integer under test (N)
    std::uint64_t candidate;    // divisor candidate (n)
    double intensity;           // summed bright-port probability over the run
    std::uint64_t remainder;    // number mod candidate
    std::uint64_t steps_used;   // observations summed, always = candidate
    double deviation;           // increment calibration error used (0 = ideal)
    Classification classification;
};

/// Sum over k = 1..steps of cos(2 pi k residue / steps).
/// Equals steps when residue = 0 and cancels to zero otherwise; computed by
/// direct summation so the cancellation is demonstrated, not assumed.
double cosine_sum(std::int64_t residue, std::uint64_t steps);

/// Factor iff intensity exceeds 3/4 of the observation count, the midpoint
/// of the two ideal intensity levels. Sits below the degraded-but-tolerable
/// level of roughly 0.818 * steps, so calibration drift within the published
/// bound never flips a true factor.
Classification classify_intensity(double intensity, std::uint64_t steps);

/// Run the n-observation bright-port sum for candidate divisor n of number N.
/// Requires 2 <= candidate <= number.
FactorTestResult run_factor_test(std::uint64_t number, std::uint64_t candidate,
                                 Visibility visibility = Visibility::ideal());

/// Same sum with a miscalibrated increment 2 pi / (candidate + deviation).
/// Requires candidate | number: the point is to watch a true factor signal
/// degrade as the deviation grows.
FactorTestResult run_perturbed_test(std::uint64_t number, std::uint64_t candidate,
                                    double deviation);

/// Largest tolerable |deviation| / candidate for an unambiguous reading: 1 / (4 N).
double tolerance_bound(std::uint64_t number);

struct FactorHit {
    std::uint64_t divisor;
    std::uint64_t cofactor;
};

struct FactorizationReport {
    std::uint64_t number;
    std::vector<FactorTestResult> candidates;  // ordered by candidate value
    std::vector<FactorHit> factors;            // candidates classified Factor
    std::uint64_t total_phase_steps;           // sum of candidate * number over tested candidates
};

/// Interference test of every candidate in [2, floor(sqrt(number))].
/// Candidates are independent, so they may be evaluated on several threads;
/// the report is identical to the sequential one regardless of thread count.
FactorizationReport factorize(std::uint64_t number,
                              Visibility visibility = Visibility::ideal(),
                              unsigned threads = 1);

} // namespace mzcalc
