#include "mzcalc/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>
#include <stdexcept>

namespace mzcalc {

namespace detail {

std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// The substream for index b starts at the (b + 1)-th output of a master
// splitmix64 sequence seeded with a, so streams never depend on how many
// draws any other stream consumed.
std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double to_unit_interval(std::uint64_t word) {
    return static_cast<double>(word >> 11) * 0x1.0p-53;
}

} // namespace detail

namespace {

using u128 = unsigned __int128;

unsigned clamp_workers(unsigned threads, std::uint64_t jobs) {
    const std::uint64_t cap = std::max<std::uint64_t>(jobs, 1);
    return static_cast<unsigned>(std::min<std::uint64_t>(threads, cap));
}

// Chunked fork-join over an index range. Chunks are contiguous, so every
// observation lands in exactly one worker regardless of the thread count.
template <typename Fn>
void parallel_chunks(std::uint64_t begin, std::uint64_t end, unsigned threads, Fn&& body) {
    const std::uint64_t span = end - begin;
    const unsigned workers = clamp_workers(threads, span);
    if (workers <= 1) {
        body(begin, end);
        return;
    }
    std::vector<std::future<void>> pending;
    pending.reserve(workers);
    const std::uint64_t chunk = (span + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::uint64_t lo = begin + w * chunk;
        const std::uint64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) {
            break;
        }
        pending.push_back(std::async(std::launch::async, [&body, lo, hi] { body(lo, hi); }));
    }
    for (auto& f : pending) {
        f.get();
    }
}

} // namespace

void TrialConfig::validate() const {
    if (repetitions == 0) {
        throw validation_error("trial: repetitions must be at least 1");
    }
    if (threads == 0) {
        throw validation_error("trial: thread count must be at least 1");
    }
    if (generator_id != kGeneratorId) {
        throw validation_error("trial: unknown generator '" + generator_id +
                               "'; this build provides '" + std::string(kGeneratorId) + "'");
    }
}

LoopTrialResult simulate_single_loop(std::uint64_t number, std::uint64_t candidate,
                                     const TrialConfig& config, Visibility visibility) {
    config.validate();
    const FactorTestResult reference = run_factor_test(number, candidate, visibility);
    const PhaseSchedule schedule(candidate, number);

    // One substream per observation; the Bernoulli probability is the same
    // expression the deterministic run sums, so the estimator is unbiased
    // for it by construction.
    std::vector<std::uint64_t> clicks(candidate, 0);
    parallel_chunks(1, candidate + 1, config.threads, [&](std::uint64_t lo, std::uint64_t hi) {
        for (std::uint64_t k = lo; k < hi; ++k) {
            const double p =
                0.5 * (1.0 + visibility.value() * detail::cos_at_step(schedule, k));
            std::uint64_t state = detail::mix64(config.seed, k);
            std::uint64_t hits = 0;
            for (std::uint64_t r = 0; r < config.repetitions; ++r) {
                hits += detail::to_unit_interval(detail::splitmix64_next(state)) < p ? 1 : 0;
            }
            clicks[k - 1] = hits;
        }
    });

    std::uint64_t total = 0;
    double variance = 0.0;
    for (std::uint64_t k = 1; k <= candidate; ++k) {
        total += clicks[k - 1];
        const double p = 0.5 * (1.0 + visibility.value() * detail::cos_at_step(schedule, k));
        variance += p * (1.0 - p);
    }

    LoopTrialResult result;
    result.number = number;
    result.candidate = candidate;
    result.seed = config.seed;
    result.repetitions = config.repetitions;
    result.expected_intensity = reference.intensity;
    result.empirical_intensity =
        static_cast<double>(total) / static_cast<double>(config.repetitions);
    result.standard_error = std::sqrt(variance / static_cast<double>(config.repetitions));
    result.classification = classify_intensity(result.empirical_intensity, candidate);
    if (config.record_clicks) {
        result.bright_clicks = std::move(clicks);
    }
    return result;
}

CascadeTrialResult simulate_cascade(const CascadeSpec& spec, const TrialConfig& config) {
    config.validate();
    spec.tree.validate();
    if (spec.number < 2) {
        throw validation_error("cascade: number under test must be at least 2");
    }

    const auto names = spec.tree.detectors();
    const std::size_t detector_count = names.size();

    struct Schedule {
        std::vector<PathLoop> path;
        std::uint64_t delay = 0;
        std::uint64_t horizon = 0;
    };
    std::vector<Schedule> schedules(detector_count);
    for (std::size_t d = 0; d < detector_count; ++d) {
        schedules[d].path = spec.tree.path_to(names[d]);
        schedules[d].delay = schedules[d].path.back().start_delay;
        schedules[d].horizon = spec.horizon_for(names[d]);
    }

    // Launch once per distinct global increment any detector observes at.
    // Detectors behind different delays observe at different increments, so
    // the union is what the source actually has to emit.
    std::vector<u128> launches;
    for (const auto& sched : schedules) {
        for (std::uint64_t k = 1; k <= sched.horizon; ++k) {
            launches.push_back(static_cast<u128>(k) * spec.number + sched.delay);
        }
    }
    std::sort(launches.begin(), launches.end());
    launches.erase(std::unique(launches.begin(), launches.end()), launches.end());

    // The categorical weights come back in the same bright-first traversal
    // order as the detector list; verify once rather than per launch.
    if (!launches.empty()) {
        const auto probe = detail::distribution_at(spec, launches.front());
        for (std::size_t d = 0; d < detector_count; ++d) {
            if (probe[d].first != names[d]) {
                throw std::logic_error("cascade: detector traversal order mismatch");
            }
        }
    }

    std::vector<std::vector<std::uint64_t>> per_observation(detector_count);
    if (config.record_clicks) {
        for (std::size_t d = 0; d < detector_count; ++d) {
            per_observation[d].assign(schedules[d].horizon, 0);
        }
    }

    const unsigned workers = clamp_workers(config.threads, launches.size());
    std::vector<std::vector<std::uint64_t>> totals_per_worker(
        std::max<unsigned>(workers, 1), std::vector<std::uint64_t>(detector_count, 0));

    const std::uint64_t chunk =
        launches.empty() ? 1 : (launches.size() + workers - 1) / workers;
    auto run_chunk = [&](unsigned worker, std::size_t lo, std::size_t hi) {
        auto& totals = totals_per_worker[worker];
        std::vector<double> cumulative(detector_count, 0.0);
        std::vector<std::uint64_t> counts(detector_count, 0);
        for (std::size_t idx = lo; idx < hi; ++idx) {
            const u128 j = launches[idx];
            const auto dist = detail::distribution_at(spec, j);
            double acc = 0.0;
            for (std::size_t d = 0; d < detector_count; ++d) {
                acc += dist[d].second;
                cumulative[d] = acc;
            }
            std::fill(counts.begin(), counts.end(), 0);
            std::uint64_t state = detail::mix64(config.seed, static_cast<std::uint64_t>(j));
            for (std::uint64_t r = 0; r < config.repetitions; ++r) {
                const double u = detail::to_unit_interval(detail::splitmix64_next(state));
                std::size_t pick = detector_count - 1;  // guard against rounding shortfall
                for (std::size_t d = 0; d < detector_count; ++d) {
                    if (u < cumulative[d]) {
                        pick = d;
                        break;
                    }
                }
                ++counts[pick];
            }
            for (std::size_t d = 0; d < detector_count; ++d) {
                const auto& sched = schedules[d];
                if (j <= sched.delay) {
                    continue;
                }
                const u128 rel = j - sched.delay;
                if (rel % spec.number != 0) {
                    continue;
                }
                const u128 k = rel / spec.number;
                if (k == 0 || k > sched.horizon) {
                    continue;
                }
                totals[d] += counts[d];
                if (config.record_clicks) {
                    per_observation[d][static_cast<std::size_t>(k - 1)] = counts[d];
                }
            }
        }
    };

    if (workers <= 1) {
        run_chunk(0, 0, launches.size());
    } else {
        std::vector<std::future<void>> pending;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t lo = static_cast<std::size_t>(w) * chunk;
            const std::size_t hi = std::min(launches.size(), lo + chunk);
            if (lo >= hi) {
                break;
            }
            pending.push_back(
                std::async(std::launch::async, [&run_chunk, w, lo, hi] { run_chunk(w, lo, hi); }));
        }
        for (auto& f : pending) {
            f.get();
        }
    }

    CascadeTrialResult result;
    result.seed = config.seed;
    result.repetitions = config.repetitions;
    result.launch_steps = launches.size();
    result.particles = launches.size() * config.repetitions;
    result.detectors.resize(detector_count);
    for (std::size_t d = 0; d < detector_count; ++d) {
        std::uint64_t clicks = 0;
        for (const auto& totals : totals_per_worker) {
            clicks += totals[d];
        }
        const auto& sched = schedules[d];
        double expected = 0.0;
        double variance = 0.0;
        for (std::uint64_t k = 1; k <= sched.horizon; ++k) {
            const u128 j = static_cast<u128>(k) * spec.number + sched.delay;
            double p = 1.0;
            for (const auto& step : sched.path) {
                p *= detail::port_probability(step.increments, step.start_delay, j, step.port);
            }
            expected += p;
            variance += p * (1.0 - p);
        }

        auto& est = result.detectors[d];
        est.detector = names[d];
        est.expected_intensity = expected;
        est.empirical_intensity =
            static_cast<double>(clicks) / static_cast<double>(config.repetitions);
        est.standard_error = std::sqrt(variance / static_cast<double>(config.repetitions));
        est.clicks = clicks;
        est.horizon = sched.horizon;
        est.delay = sched.delay;
        if (config.record_clicks) {
            est.per_observation = std::move(per_observation[d]);
        }
    }
    return result;
}

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw validation_error("normal quantile is defined for p strictly inside (0, 1)");
    }
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt_2pi = 0.39894228040143267794;
    const auto cdf = [&](double x) { return 0.5 * std::erfc(-x * inv_sqrt2); };

    // Bisection brackets the root safely; a few Newton steps with the
    // normal density polish it to machine accuracy.
    double lo = -40.0;
    double hi = 40.0;
    for (int i = 0; i < 64; ++i) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < p ? lo : hi) = mid;
    }
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 4; ++i) {
        const double density = inv_sqrt_2pi * std::exp(-0.5 * x * x);
        if (density <= 0.0) {
            break;
        }
        x -= (cdf(x) - p) / density;
    }
    return x;
}

std::uint64_t required_repetitions(std::uint64_t candidate, double confidence) {
    if (candidate == 0) {
        throw validation_error("repetition sizing needs a positive observation count");
    }
    if (!(confidence > 0.0 && confidence < 1.0)) {
        throw validation_error("confidence must lie strictly between 0 and 1");
    }
    const double z = inverse_normal_cdf(1.0 - 0.5 * (1.0 - confidence));
    if (z <= 0.0) {
        return 1;
    }
    const double needed = std::ceil(16.0 * z * z / static_cast<double>(candidate));
    return needed < 1.0 ? 1 : static_cast<std::uint64_t>(needed);
}

namespace {

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out.is_open()) {
        throw io_error("cannot write click file '" + path + "'");
    }
    return out;
}

} // namespace

void write_clicks_csv(const LoopTrialResult& result, const std::string& path) {
    if (result.bright_clicks.empty()) {
        throw validation_error("clicks were not recorded for this run");
    }
    auto out = open_csv(path);
    out << "# generator_id=" << kGeneratorId << " seed=" << result.seed
        << " repetitions=" << result.repetitions << '\n';
    out << "k,detector,count\n";
    for (std::size_t i = 0; i < result.bright_clicks.size(); ++i) {
        const std::uint64_t bright = result.bright_clicks[i];
        out << (i + 1) << ",bright," << bright << '\n';
        out << (i + 1) << ",dark," << (result.repetitions - bright) << '\n';
    }
    if (!out) {
        throw io_error("failed while writing click file '" + path + "'");
    }
}

void write_clicks_csv(const CascadeTrialResult& result, const std::string& path) {
    for (const auto& est : result.detectors) {
        if (est.per_observation.empty() && est.horizon > 0) {
            throw validation_error("clicks were not recorded for this run");
        }
    }
    auto out = open_csv(path);
    out << "# generator_id=" << kGeneratorId << " seed=" << result.seed
        << " repetitions=" << result.repetitions << '\n';
    out << "k,detector,count\n";
    for (const auto& est : result.detectors) {
        for (std::size_t i = 0; i < est.per_observation.size(); ++i) {
            out << (i + 1) << ',' << est.detector << ',' << est.per_observation[i] << '\n';
        }
    }
    if (!out) {
        throw io_error("failed while writing click file '" + path + "'");
    }
}

} // namespace mzcalc
