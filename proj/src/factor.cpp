#include "mzcalc/factor.hpp"

#include <cmath>
#include <future>
#include <thread>

namespace mzcalc {

double cosine_sum(std::int64_t residue, std::uint64_t steps) {
    if (steps < 1)
        throw validation_error("cosine_sum needs at least one step");
    if (residue < 0 || static_cast<std::uint64_t>(residue) >= steps)
        throw validation_error("residue must lie in [0, steps)");
    const auto r = static_cast<std::uint64_t>(residue);
    double sum = 0.0;
    for (std::uint64_t k = 1; k <= steps; ++k) {
        // k * r mod steps stays exact, so each term is the cosine of a true
        // root-of-unity angle and the off-divisor sum cancels to ~steps * eps.
        const std::uint64_t angle_num =
            static_cast<std::uint64_t>((static_cast<unsigned __int128>(k) * r) % steps);
        sum += detail::cos_unit_fraction(angle_num, steps);
    }
    return sum;
}

Classification classify_intensity(double intensity, std::uint64_t steps) {
    if (steps < 1)
        throw validation_error("classification needs a positive step count");
    return intensity > 0.75 * static_cast<double>(steps) ? Classification::Factor
                                                         : Classification::NonFactor;
}

FactorTestResult run_factor_test(std::uint64_t number, std::uint64_t candidate,
                                 Visibility visibility) {
    if (candidate < 2 || candidate > number)
        throw validation_error("candidate divisor must satisfy 2 <= candidate <= number");
    const PhaseSchedule schedule(candidate, number);
    double intensity = 0.0;
    for (std::uint64_t k = 1; k <= candidate; ++k)
        intensity += 0.5 * (1.0 + visibility.value() * detail::cos_at_step(schedule, k));
    return FactorTestResult{number,
                            candidate,
                            intensity,
                            number % candidate,
                            candidate,
                            0.0,
                            classify_intensity(intensity, candidate)};
}

FactorTestResult run_perturbed_test(std::uint64_t number, std::uint64_t candidate,
                                    double deviation) {
    if (candidate < 2 || candidate > number)
        throw validation_error("candidate divisor must satisfy 2 <= candidate <= number");
    if (number % candidate != 0)
        throw validation_error("perturbed run expects a true factor as candidate");
    const PhaseSchedule schedule(candidate, number, deviation);
    double intensity = 0.0;
    for (std::uint64_t k = 1; k <= candidate; ++k)
        intensity += 0.5 * (1.0 + detail::cos_at_step(schedule, k));
    return FactorTestResult{number,
                            candidate,
                            intensity,
                            0,
                            candidate,
                            deviation,
                            classify_intensity(intensity, candidate)};
}

double tolerance_bound(std::uint64_t number) {
    if (number < 2)
        throw validation_error("tolerance bound is defined for numbers >= 2");
    return 1.0 / (4.0 * static_cast<double>(number));
}

FactorizationReport factorize(std::uint64_t number, Visibility visibility, unsigned threads) {
    if (number < 2)
        throw validation_error("factorize expects a number >= 2");
    const std::uint64_t limit = detail::isqrt_u64(number);

    std::vector<std::uint64_t> candidates;
    for (std::uint64_t n = 2; n <= limit; ++n) candidates.push_back(n);

    std::vector<FactorTestResult> results(candidates.size());
    auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            results[i] = run_factor_test(number, candidates[i], visibility);
    };

    if (threads <= 1 || candidates.size() < 2) {
        run_range(0, candidates.size());
    } else {
        const unsigned workers =
            std::min<unsigned>(threads, static_cast<unsigned>(candidates.size()));
        std::vector<std::future<void>> jobs;
        const std::size_t chunk = (candidates.size() + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(candidates.size(), begin + chunk);
            if (begin < end)
                jobs.push_back(std::async(std::launch::async, run_range, begin, end));
        }
        for (auto& job : jobs) job.get();
    }

    FactorizationReport report{number, std::move(results), {}, 0};
    for (const auto& r : report.candidates) {
        report.total_phase_steps += r.candidate * number;
        if (r.classification == Classification::Factor)
            report.factors.push_back(FactorHit{r.candidate, number / r.candidate});
    }
    return report;
}

} // namespace mzcalc
