#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mzcalc/cascade.hpp"
#include "mzcalc/factor.hpp"

// Monte Carlo mode: one particle per observation becomes R particles per
// observation, each routed by a Bernoulli or categorical draw over the
// exact port probabilities. Every observation owns its own pseudo-random
// substream derived from (seed, observation index), so results are
// bit-identical no matter how the work is split across threads, and the
// generator is named in the output so runs can be reproduced elsewhere.

namespace mzcalc {

/// Identifier of the click generator, persisted with every result.
inline constexpr char kGeneratorId[] = "splitmix64/streams-v1";

struct TrialConfig {
    std::uint64_t seed = 0;
    std::uint64_t repetitions = 1;     // particles per observation
    unsigned threads = 1;
    bool record_clicks = true;         // keep per-observation counts
    std::string generator_id = kGeneratorId;

    void validate() const;
};

/// Click counts of one observation, detectors in sampling order.
struct ClickRecord {
    std::uint64_t observation = 0;     // k, starting at 1
    std::vector<std::pair<std::string, std::uint64_t>> counts;
};

struct LoopTrialResult {
    std::uint64_t number = 0;
    std::uint64_t candidate = 0;
    std::uint64_t seed = 0;
    std::uint64_t repetitions = 0;
    double expected_intensity = 0.0;     // deterministic reference
    double empirical_intensity = 0.0;    // total bright clicks / repetitions
    double standard_error = 0.0;         // sqrt(sum p_k (1 - p_k) / R), exact p_k
    Classification classification = Classification::NonFactor;
    std::vector<std::uint64_t> bright_clicks;  // per observation when recording
};

/// Divisor trial with R particles per observation. The empirical intensity
/// feeds the same 3/4 threshold as the deterministic run; R = 1 reproduces
/// the strict one-particle-per-step protocol.
LoopTrialResult simulate_single_loop(std::uint64_t number, std::uint64_t candidate,
                                     const TrialConfig& config,
                                     Visibility visibility = Visibility::ideal());

struct DetectorEstimate {
    std::string detector;
    double expected_intensity = 0.0;
    double empirical_intensity = 0.0;
    double standard_error = 0.0;
    std::uint64_t clicks = 0;          // clicks inside this detector's schedule
    std::uint64_t horizon = 0;
    std::uint64_t delay = 0;
    std::vector<std::uint64_t> per_observation;  // when recording
};

struct CascadeTrialResult {
    std::uint64_t seed = 0;
    std::uint64_t repetitions = 0;
    std::uint64_t launch_steps = 0;    // distinct global increments used
    std::uint64_t particles = 0;       // launch_steps * repetitions
    std::vector<DetectorEstimate> detectors;
};

/// Network trial. Particles are launched at the union of all detectors'
/// observation schedules; each draw routes one particle to exactly one
/// detector with the step_distribution weights, and a detector's estimate
/// counts only the launches belonging to its own schedule. Memory for the
/// recorded clicks grows with the horizon; switch record_clicks off for
/// very long fixed horizons.
CascadeTrialResult simulate_cascade(const CascadeSpec& spec, const TrialConfig& config);

/// Standard normal quantile, accurate to a few ulps over (0, 1).
double inverse_normal_cdf(double p);

/// Smallest R for which a normal test separates the factor level n from
/// the non-factor level n/2 at the given two-sided confidence: the gap to
/// the threshold is n/4 and the worst-case variance per observation is
/// 1/4, so R >= 16 z^2 / n, floored at 1.
std::uint64_t required_repetitions(std::uint64_t candidate, double confidence);

/// Click records as CSV (columns k, detector, count) with a comment header
/// carrying the generator id, seed, and repetition count.
void write_clicks_csv(const LoopTrialResult& result, const std::string& path);
void write_clicks_csv(const CascadeTrialResult& result, const std::string& path);

namespace detail {

/// Advance a splitmix64 state and return the next word.
std::uint64_t splitmix64_next(std::uint64_t& state);

/// Stateless mix of two words, used to key per-observation substreams.
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

/// Top 53 bits of a word as a double in [0, 1).
double to_unit_interval(std::uint64_t word);

} // namespace detail

} // namespace mzcalc
