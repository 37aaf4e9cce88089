#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mzcalc/core.hpp"

// Cascaded loop network: the two ports of each loop feed either a deeper
// loop or a detector, so one particle tests several candidate divisors at
// once. All shifters advance on a common clock, but a loop may carry a
// start delay S: it begins stepping S increments late, so its phase at
// global increment j is 2 pi (j - S) / n. Detectors behind a delayed loop
// also begin counting late; the k-th observation of a detector happens at
// global increment j = D + k * number, where D is the start delay of the
// innermost loop on its path. Dark-fed subtrees need such delays because a
// divisor's dark port goes exactly silent at multiples of the number under
// test; starting the subtree half a turn late moves its observations onto
// the parent's anti-fringe, where a true factor lights the path up again.

namespace mzcalc {

/// One loop crossing along a root-to-detector path.
struct PathLoop {
    std::string label;
    std::uint64_t increments;   // phase steps per full turn of this loop
    std::uint64_t start_delay;  // global increments before this loop starts stepping
    Port port;                  // the port the path leaves through
};

/// Binary tree of loops with detectors at the leaves.
class CascadeTree {
public:
    struct Edge {
        int child = -1;        // index of the child loop, or -1 for a detector
        std::string detector;  // leaf name when child < 0
        bool leads_to_detector() const { return child < 0; }
    };

    struct Loop {
        std::string label;
        std::uint64_t increments = 0;
        std::uint64_t start_delay = 0;
        Edge bright;
        Edge dark;
    };

    int add_loop(const std::string& label, std::uint64_t increments,
                 std::uint64_t start_delay = 0);
    void connect(int parent, Port port, int child);
    void connect_detector(int parent, Port port, const std::string& name);
    void set_root(int loop);

    /// Structural checks: a single root, every port wired, every loop
    /// reachable exactly once, unique labels and detector names.
    void validate() const;

    int root() const { return root_; }
    std::size_t loop_count() const { return loops_.size(); }
    const Loop& loop(int index) const;
    Loop& loop(int index);

    /// Detector names in bright-first depth-first order. This ordering is
    /// also the categorical-sampling order of the stochastic simulator.
    std::vector<std::string> detectors() const;

    /// Loops crossed from the root to the named detector.
    std::vector<PathLoop> path_to(const std::string& detector) const;

    /// Start delay of the innermost loop on the detector's path, which is
    /// the increment at which that detector's observations begin.
    std::uint64_t observation_delay(const std::string& detector) const;

    void clear_delays();

    nlohmann::json to_json() const;
    static CascadeTree from_json(const nlohmann::json& node);

private:
    std::vector<Loop> loops_;
    int root_ = -1;
};

enum class HorizonMode { DeepestLoop, PathLcm, Fixed };

/// A tree plus the run parameters needed to evaluate it.
struct CascadeSpec {
    CascadeTree tree;
    std::uint64_t number = 2;              // integer under test
    HorizonMode horizon_mode = HorizonMode::DeepestLoop;
    std::uint64_t fixed_horizon = 0;       // used with HorizonMode::Fixed

    /// Observations summed for one detector: the innermost loop's increment
    /// count by default, the lcm of all path increments, or a fixed count.
    std::uint64_t horizon_for(const std::string& detector) const;
};

struct DetectorTally {
    std::string detector;
    double expected_intensity = 0.0;  // sum of per-observation probabilities
    double units_of = 0.0;            // innermost increments / 2^depth
    double table_units = 0.0;         // intensity * 2^depth / horizon
    std::uint64_t horizon = 0;
    std::uint64_t delay = 0;          // observation start of this detector
};

/// Start delay for a subtree entered through the listed dark ports:
/// ceil(sum of those loops' increment counts / 2).
std::uint64_t dark_port_delay(std::span<const std::uint64_t> dark_ancestors);

/// Probability that the particle of observation k lands in the named
/// detector: the product over path loops of the bright- or dark-port
/// probability at that loop's phase. Phases are reduced in exact integer
/// arithmetic, so divisor ports are binary exact.
double path_probability(const CascadeSpec& spec, const std::string& detector, std::uint64_t k);

/// All detector probabilities for a particle launched at one global
/// increment, in traversal order. Each loop splits its input across two
/// ports that sum to its input, so the total is 1 up to a few ulps.
std::vector<std::pair<std::string, double>> step_distribution(const CascadeSpec& spec,
                                                              std::uint64_t global_step);

DetectorTally accumulate(const CascadeSpec& spec, const std::string& detector);
std::vector<DetectorTally> accumulate_all(const CascadeSpec& spec);

/// The seven-loop, eight-detector reference network. Loops are labeled
/// n1..n7 in ascending increment order; detectors A..H. The bright spine
/// n1 -> n2 -> n4 carries A and B; n2's dark port feeds n5 (C, D); n1's
/// dark port feeds n3, whose dark port feeds n6 (E, F) and whose bright
/// port feeds n7 (G, H). With delays enabled, each loop starts late by
/// dark_port_delay of the dark ports crossed on the way down to it.
CascadeSpec build_fig2(std::uint64_t number, const std::array<std::uint64_t, 7>& increments,
                       bool with_delays = true);

struct Table1Report {
    std::uint64_t number = 0;
    std::array<std::uint64_t, 3> loops{};     // front-section increments n1, n2, n4
    std::uint64_t horizon = 0;
    std::array<bool, 3> factor_flags{};       // does each loop divide number
    double bright_bright = 0.0;               // detector A raw intensity
    double bright_dark = 0.0;                 // detector B raw intensity
    double dark_pair = 0.0;                   // C + D combined (blind to the loop below)
    std::array<double, 3> normalized{};       // the above, times 8 / horizon
    std::array<double, 3> predicted{};        // expectation row for the flags
    std::vector<std::string> resonances;      // cross-frequency integer hits
};

/// Expected intensities of the front section (detectors A, B and the pair
/// C + D) over the given horizon, with the predicted expectation row and a
/// report of any resonant residue combinations that would bias it.
Table1Report table1_report(std::uint64_t number, std::uint64_t n1, std::uint64_t n2,
                           std::uint64_t n4, std::uint64_t horizon);

/// Expectation row (A, B, C + D in eighths of the horizon) for the given
/// divisibility pattern of the three front-section loops.
std::array<double, 3> expectation_row(bool f1, bool f2, bool f4);

nlohmann::json cascade_to_json(const CascadeSpec& spec);
CascadeSpec cascade_from_json(const nlohmann::json& doc);
CascadeSpec load_cascade(const std::string& path);
void save_cascade(const CascadeSpec& spec, const std::string& path);

namespace detail {

/// Port probability of one loop at an absolute global increment. Loops
/// that have not started yet sit at phase zero.
double port_probability(std::uint64_t increments, std::uint64_t start_delay,
                        unsigned __int128 global_step, Port port);

/// step_distribution at a global increment that may exceed 64 bits, which
/// happens for late observations of deep detectors.
std::vector<std::pair<std::string, double>> distribution_at(const CascadeSpec& spec,
                                                            unsigned __int128 global_step);

} // namespace detail

} // namespace mzcalc
