// mzcalc: command-line front end for the interferometric factoring and
// Fourier engines. Subcommands mirror the library modules; every run can
// emit a JSON envelope with a manifest (verbatim argv, resolved parameters,
// output files) that reproduces the result byte for byte when replayed.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mzcalc/cascade.hpp"
#include "mzcalc/factor.hpp"
#include "mzcalc/feasibility.hpp"
#include "mzcalc/fourier.hpp"
#include "mzcalc/stochastic.hpp"

namespace {

constexpr char kToolVersion[] = "1.0.0";

// Intensities are printed with 9 significant digits so the n versus n/2
// dichotomy (and any drift away from it) is visible at a glance.
std::string g9(double x) {
    char buffer[48];
    std::snprintf(buffer, sizeof buffer, "%.9g", x);
    return buffer;
}

const char* name_of(mzcalc::Classification c) {
    return c == mzcalc::Classification::Factor ? "Factor" : "NonFactor";
}

// Collects where results go: an optional output directory (from --out or
// MZCALC_OUT_DIR), the verbatim argv for the manifest, and the list of
// files actually written. Paths in the manifest stay exactly as the user
// spelled them, so a replay of the same argv writes the same bytes.
struct RunContext {
    std::vector<std::string> argv;
    std::string command;
    std::string out_dir;
    bool json_stdout = false;
    std::optional<std::uint64_t> seed;
    nlohmann::json parameters = nlohmann::json::object();
    std::vector<std::string> outputs;

    std::filesystem::path resolve(const std::string& name) const {
        const std::filesystem::path p(name);
        if (p.is_absolute() || out_dir.empty()) {
            return p;
        }
        return std::filesystem::path(out_dir) / p;
    }

    void note_output(const std::string& name) { outputs.push_back(name); }
};

nlohmann::json make_envelope(const RunContext& ctx, const nlohmann::json& result) {
    nlohmann::json manifest;
    manifest["argv"] = ctx.argv;
    manifest["parameters"] = ctx.parameters;
    manifest["seed"] = ctx.seed ? nlohmann::json(*ctx.seed) : nlohmann::json(nullptr);
    manifest["outputs"] = ctx.outputs;
    manifest["tool_version"] = kToolVersion;

    nlohmann::json envelope;
    envelope["tool"] = "mzcalc";
    envelope["version"] = kToolVersion;
    envelope["command"] = ctx.command;
    envelope["manifest"] = manifest;
    envelope["result"] = result;
    return envelope;
}

// Ships the result: envelope file under --out if requested, then either the
// JSON envelope or the human report on stdout.
void deliver(RunContext& ctx, const nlohmann::json& result, const std::string& human) {
    if (!ctx.out_dir.empty()) {
        std::filesystem::create_directories(ctx.out_dir);
        const std::string name = ctx.command + ".json";
        ctx.note_output(name);
        std::ofstream file(ctx.resolve(name));
        if (!file.is_open()) {
            throw mzcalc::io_error("cannot write '" + name + "' under '" + ctx.out_dir + "'");
        }
        file << make_envelope(ctx, result).dump(2) << '\n';
        if (!file) {
            throw mzcalc::io_error("failed while writing '" + name + "'");
        }
    }
    if (ctx.json_stdout) {
        std::cout << make_envelope(ctx, result).dump(2) << '\n';
    } else {
        std::cout << human;
    }
}

// ---------------------------------------------------------------- signals

mzcalc::PeriodicSignal builtin_signal(const std::string& name) {
    if (name == "demo1") {
        return mzcalc::PeriodicSignal::from_function(
            [](double t) {
                return 3.0 + 2.0 * std::cos(mzcalc::two_pi * t) +
                       std::sin(2.0 * mzcalc::two_pi * t);
            },
            1.0);
    }
    if (name == "const1") {
        return mzcalc::PeriodicSignal::from_function([](double) { return 1.0; }, 1.0);
    }
    if (name == "expcos") {
        return mzcalc::PeriodicSignal::from_function(
            [](double t) { return std::exp(std::cos(mzcalc::two_pi * t)); }, 1.0);
    }
    throw mzcalc::validation_error("unknown built-in signal '" + name +
                                   "' (available: demo1, const1, expcos)");
}

double parse_number(const std::string& field, const std::string& where) {
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw mzcalc::validation_error(where + ": '" + field + "' is not a number");
    }
    return value;
}

// CSV signal: two columns t, f; uniform ascending t starting at 0; the row
// spacing fixes the period as n * dt (the last sample wraps to the first).
mzcalc::PeriodicSignal load_signal_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) {
        throw mzcalc::io_error("cannot open signal file '" + path + "'");
    }

    std::vector<double> times;
    std::vector<double> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw mzcalc::validation_error("signal file '" + path + "' line " +
                                           std::to_string(lineno) + ": expected two columns t,f");
        }
        std::string left = line.substr(0, comma);
        std::string right = line.substr(comma + 1);
        const auto strip = [](std::string& s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
        };
        strip(left);
        strip(right);
        if (times.empty() && left == "t") {
            continue;  // header row
        }
        const std::string where = "signal file '" + path + "' line " + std::to_string(lineno);
        times.push_back(parse_number(left, where));
        values.push_back(parse_number(right, where));
    }
    if (times.size() < 2) {
        throw mzcalc::validation_error("signal file '" + path + "': need at least 2 data rows");
    }

    const double dt = times[1] - times[0];
    if (!(dt > 0.0)) {
        throw mzcalc::validation_error("signal file '" + path + "': time column must ascend");
    }
    if (std::abs(times[0]) > 1e-9 * dt) {
        throw mzcalc::validation_error("signal file '" + path + "': time must start at 0");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double expected = static_cast<double>(i) * dt;
        if (std::abs(times[i] - expected) > 1e-6 * dt) {
            throw mzcalc::validation_error("signal file '" + path + "' row " +
                                           std::to_string(i + 1) +
                                           ": time column must be uniformly spaced");
        }
    }
    return mzcalc::PeriodicSignal::from_samples(std::move(values),
                                                dt * static_cast<double>(times.size()));
}

// ------------------------------------------------------------ subcommands

struct TestArgs {
    std::uint64_t number = 0;
    std::uint64_t candidate = 0;
    double deviation = 0.0;
    double visibility = 1.0;
    bool stochastic = false;
    std::uint64_t seed = 0;
    std::uint64_t reps = 1;
    unsigned threads = 1;
    std::string clicks_file;
};

int run_test(RunContext& ctx, const TestArgs& args) {
    ctx.parameters = {{"number", args.number},
                      {"candidate", args.candidate},
                      {"deviation", args.deviation},
                      {"visibility", args.visibility},
                      {"stochastic", args.stochastic}};
    std::ostringstream human;
    nlohmann::json result;

    if (args.stochastic) {
        if (args.deviation != 0.0) {
            throw mzcalc::validation_error("--deviation applies to the deterministic test only");
        }
        ctx.seed = args.seed;
        ctx.parameters["repetitions"] = args.reps;
        ctx.parameters["threads"] = args.threads;

        mzcalc::TrialConfig config;
        config.seed = args.seed;
        config.repetitions = args.reps;
        config.threads = args.threads;
        const auto trial = mzcalc::simulate_single_loop(args.number, args.candidate, config,
                                                        mzcalc::Visibility(args.visibility));
        if (!args.clicks_file.empty()) {
            mzcalc::write_clicks_csv(trial, ctx.resolve(args.clicks_file).string());
            ctx.note_output(args.clicks_file);
        }

        result = {{"number", trial.number},
                  {"candidate", trial.candidate},
                  {"repetitions", trial.repetitions},
                  {"generator_id", mzcalc::kGeneratorId},
                  {"expected_intensity", trial.expected_intensity},
                  {"empirical_intensity", trial.empirical_intensity},
                  {"standard_error", trial.standard_error},
                  {"classification", name_of(trial.classification)}};
        human << "number: " << trial.number << "\ncandidate: " << trial.candidate
              << "\nrepetitions per observation: " << trial.repetitions
              << "\nempirical intensity: " << g9(trial.empirical_intensity)
              << "\nexpected intensity: " << g9(trial.expected_intensity)
              << "\nstandard error: " << g9(trial.standard_error)
              << "\nclassification: " << name_of(trial.classification) << '\n';
    } else {
        const auto run = args.deviation != 0.0
                             ? mzcalc::run_perturbed_test(args.number, args.candidate,
                                                          args.deviation)
                             : mzcalc::run_factor_test(args.number, args.candidate,
                                                       mzcalc::Visibility(args.visibility));
        const double bound = mzcalc::tolerance_bound(args.number);
        result = {{"number", run.number},
                  {"candidate", run.candidate},
                  {"intensity", run.intensity},
                  {"remainder", run.remainder},
                  {"steps_used", run.steps_used},
                  {"deviation", run.deviation},
                  {"tolerance_bound", bound},
                  {"classification", name_of(run.classification)}};
        human << "number: " << run.number << "\ncandidate: " << run.candidate
              << "\nintensity: " << g9(run.intensity) << "\nremainder: " << run.remainder
              << "\nclassification: " << name_of(run.classification) << '\n';
        if (args.deviation != 0.0) {
            human << "deviation: " << g9(run.deviation)
                  << " (tolerance bound 1/(4N) = " << g9(bound) << ")\n";
        }
    }

    deliver(ctx, result, human.str());
    return 0;
}

struct FactorArgs {
    std::uint64_t number = 0;
    double visibility = 1.0;
    unsigned threads = 1;
    bool csv = false;
};

int run_factor_cmd(RunContext& ctx, const FactorArgs& args) {
    ctx.parameters = {{"number", args.number},
                      {"visibility", args.visibility},
                      {"threads", args.threads}};

    const auto report =
        mzcalc::factorize(args.number, mzcalc::Visibility(args.visibility), args.threads);

    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.candidates) {
        nlohmann::json entry = {{"candidate", row.candidate},
                                {"intensity", row.intensity},
                                {"classification", name_of(row.classification)}};
        if (row.classification == mzcalc::Classification::Factor) {
            entry["cofactor"] = args.number / row.candidate;
        }
        rows.push_back(entry);
    }
    nlohmann::json factors = nlohmann::json::array();
    for (const auto& hit : report.factors) {
        factors.push_back({{"divisor", hit.divisor}, {"cofactor", hit.cofactor}});
    }
    const nlohmann::json result = {{"number", report.number},
                                   {"candidates", rows},
                                   {"factors", factors},
                                   {"total_phase_steps", report.total_phase_steps}};

    std::ostringstream human;
    if (args.csv) {
        human << "n,intensity,classification\n";
        for (const auto& row : report.candidates) {
            human << row.candidate << ',' << g9(row.intensity) << ','
                  << name_of(row.classification) << '\n';
        }
    } else {
        human << "number: " << report.number << '\n';
        for (const auto& row : report.candidates) {
            human << "  n = " << row.candidate << ": intensity " << g9(row.intensity) << "  "
                  << name_of(row.classification);
            if (row.classification == mzcalc::Classification::Factor) {
                human << "  (" << row.candidate << " x " << args.number / row.candidate << ")";
            }
            human << '\n';
        }
        if (report.factors.empty()) {
            human << "no factor up to sqrt(N); " << report.number
                  << (report.number > 3 ? " is prime\n" : " has no candidates to test\n");
        }
        human << "total phase steps: " << report.total_phase_steps << '\n';
    }

    deliver(ctx, result, human.str());
    return 0;
}

struct CascadeArgs {
    std::uint64_t number = 0;
    bool number_given = false;
    std::string spec_file;
    std::vector<std::uint64_t> fig2;
    std::string horizon = "auto";
    bool horizon_given = false;
    bool no_delays = false;
    bool stochastic = false;
    std::uint64_t seed = 0;
    std::uint64_t reps = 1;
    unsigned threads = 1;
    std::string clicks_file;
    std::string template_file;
};

void apply_horizon(mzcalc::CascadeSpec& spec, const std::string& horizon) {
    if (horizon == "auto") {
        spec.horizon_mode = mzcalc::HorizonMode::DeepestLoop;
    } else if (horizon == "lcm") {
        spec.horizon_mode = mzcalc::HorizonMode::PathLcm;
    } else {
        std::uint64_t fixed = 0;
        const char* begin = horizon.data();
        const char* end = begin + horizon.size();
        const auto [ptr, ec] = std::from_chars(begin, end, fixed);
        if (ec != std::errc() || ptr != end || fixed == 0) {
            throw mzcalc::validation_error("horizon must be 'auto', 'lcm', or a positive integer");
        }
        spec.horizon_mode = mzcalc::HorizonMode::Fixed;
        spec.fixed_horizon = fixed;
    }
}

int run_cascade(RunContext& ctx, const CascadeArgs& args) {
    if (!args.template_file.empty()) {
        // Reference network with delays, ready to edit: loops sized so each
        // detector isolates a different divisibility pattern of 554268.
        const auto sample =
            mzcalc::build_fig2(554268, {2, 3, 11, 12, 13, 17, 19}, true);
        mzcalc::save_cascade(sample, ctx.resolve(args.template_file).string());
        ctx.note_output(args.template_file);
        ctx.parameters = {{"template", args.template_file}};
        deliver(ctx, {{"written", args.template_file}},
                "wrote cascade template to " + args.template_file + "\n");
        return 0;
    }

    mzcalc::CascadeSpec spec;
    if (!args.spec_file.empty()) {
        spec = mzcalc::load_cascade(args.spec_file);
        if (args.number_given) {
            spec.number = args.number;
        }
        if (args.horizon_given) {
            apply_horizon(spec, args.horizon);
        }
        ctx.parameters["spec_file"] = args.spec_file;
    } else {
        if (args.fig2.size() != 7) {
            throw mzcalc::validation_error(
                "--fig2 needs exactly 7 loop sizes (or use --spec FILE)");
        }
        if (!args.number_given) {
            throw mzcalc::validation_error("cascade needs the number under test");
        }
        std::array<std::uint64_t, 7> loops{};
        std::copy(args.fig2.begin(), args.fig2.end(), loops.begin());
        spec = mzcalc::build_fig2(args.number, loops, !args.no_delays);
        apply_horizon(spec, args.horizon);
        ctx.parameters["fig2"] = args.fig2;
        ctx.parameters["delays"] = !args.no_delays;
    }
    ctx.parameters["number"] = spec.number;
    ctx.parameters["horizon"] = args.horizon;

    const auto tallies = mzcalc::accumulate_all(spec);

    nlohmann::json detectors = nlohmann::json::array();
    std::ostringstream human;
    human << "number: " << spec.number << '\n';
    human << "detector  delay  horizon  intensity      table units\n";
    for (const auto& tally : tallies) {
        detectors.push_back({{"detector", tally.detector},
                             {"delay", tally.delay},
                             {"horizon", tally.horizon},
                             {"expected_intensity", tally.expected_intensity},
                             {"table_units", tally.table_units}});
        char line[128];
        std::snprintf(line, sizeof line, "%-9s %5llu %8llu  %-14s %s\n", tally.detector.c_str(),
                      static_cast<unsigned long long>(tally.delay),
                      static_cast<unsigned long long>(tally.horizon),
                      g9(tally.expected_intensity).c_str(), g9(tally.table_units).c_str());
        human << line;
    }
    nlohmann::json result = {{"number", spec.number}, {"detectors", detectors}};

    // For the reference topology, compare the front section against the
    // predicted expectation row at the matching horizon.
    if (!args.fig2.empty()) {
        const std::uint64_t n1 = args.fig2[0];
        const std::uint64_t n2 = args.fig2[1];
        const std::uint64_t n4 = args.fig2[3];
        std::uint64_t front_horizon = n4;
        if (spec.horizon_mode == mzcalc::HorizonMode::Fixed) {
            front_horizon = spec.fixed_horizon;
        } else if (spec.horizon_mode == mzcalc::HorizonMode::PathLcm) {
            front_horizon = std::lcm(std::lcm(n1, n2), n4);
        }
        const auto table = mzcalc::table1_report(spec.number, n1, n2, n4, front_horizon);
        double max_deviation = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            max_deviation =
                std::max(max_deviation, std::abs(table.normalized[i] - table.predicted[i]));
        }
        result["front_section"] = {{"loops", {n1, n2, n4}},
                                   {"factor_flags", table.factor_flags},
                                   {"horizon", table.horizon},
                                   {"normalized", table.normalized},
                                   {"predicted", table.predicted},
                                   {"max_deviation", max_deviation},
                                   {"resonances", table.resonances}};
        human << "front section (A, B, C+D) over " << table.horizon << " observations:\n";
        human << "  normalized: " << g9(table.normalized[0]) << ", " << g9(table.normalized[1])
              << ", " << g9(table.normalized[2]) << '\n';
        human << "  predicted:  " << g9(table.predicted[0]) << ", " << g9(table.predicted[1])
              << ", " << g9(table.predicted[2]) << '\n';
        human << "  max deviation: " << g9(max_deviation) << '\n';
        if (!table.resonances.empty()) {
            human << "  warning: resonant frequency combinations:";
            for (const auto& tag : table.resonances) {
                human << ' ' << tag;
            }
            human << '\n';
        }
    }

    if (args.stochastic) {
        ctx.seed = args.seed;
        ctx.parameters["repetitions"] = args.reps;
        ctx.parameters["threads"] = args.threads;

        mzcalc::TrialConfig config;
        config.seed = args.seed;
        config.repetitions = args.reps;
        config.threads = args.threads;
        const auto trial = mzcalc::simulate_cascade(spec, config);
        if (!args.clicks_file.empty()) {
            mzcalc::write_clicks_csv(trial, ctx.resolve(args.clicks_file).string());
            ctx.note_output(args.clicks_file);
        }

        nlohmann::json estimates = nlohmann::json::array();
        human << "stochastic trial: " << trial.particles << " particles over "
              << trial.launch_steps << " launch steps\n";
        for (const auto& est : trial.detectors) {
            estimates.push_back({{"detector", est.detector},
                                 {"empirical_intensity", est.empirical_intensity},
                                 {"expected_intensity", est.expected_intensity},
                                 {"standard_error", est.standard_error},
                                 {"clicks", est.clicks}});
            human << "  " << est.detector << ": empirical " << g9(est.empirical_intensity)
                  << " expected " << g9(est.expected_intensity) << " stderr "
                  << g9(est.standard_error) << '\n';
        }
        result["stochastic"] = {{"generator_id", mzcalc::kGeneratorId},
                                {"repetitions", trial.repetitions},
                                {"launch_steps", trial.launch_steps},
                                {"particles", trial.particles},
                                {"detectors", estimates}};
    }

    deliver(ctx, result, human.str());
    return 0;
}

struct FourierArgs {
    std::string builtin;
    std::string signal_file;
    std::uint64_t harmonic = 1;
    std::string mode = "cos";
    double scale = 1.0;
    std::size_t points = mzcalc::default_quadrature_points;
    std::string trace_file;
    std::uint64_t trace_steps = mzcalc::default_quadrature_points;
    std::uint64_t particles = 0;
    std::uint64_t seed = 0;
    double energy = 0.0;
    double threshold = 1e-3;
};

int run_fourier(RunContext& ctx, const FourierArgs& args) {
    if (args.builtin.empty() == args.signal_file.empty()) {
        throw mzcalc::validation_error("choose exactly one signal: --builtin NAME or --signal FILE");
    }
    const auto signal = args.builtin.empty() ? load_signal_csv(args.signal_file)
                                             : builtin_signal(args.builtin);
    const auto ramp = args.mode == "cos" ? mzcalc::cosine_ramp(args.harmonic)
                                         : mzcalc::sine_ramp(args.harmonic);

    ctx.parameters = {{"signal", args.builtin.empty() ? args.signal_file : args.builtin},
                      {"m", args.harmonic},
                      {"mode", args.mode},
                      {"c", args.scale},
                      {"period", signal.period()}};

    nlohmann::json result;
    std::ostringstream human;

    if (args.particles > 0) {
        ctx.seed = args.seed;
        ctx.parameters["particles"] = args.particles;
        const auto sample = mzcalc::stochastic_fourier(signal, ramp, args.particles, args.seed);
        result = {{"mode", args.mode},
                  {"harmonic", args.harmonic},
                  {"estimate", sample.estimate},
                  {"standard_error", sample.standard_error},
                  {"plus_clicks", sample.plus_clicks},
                  {"minus_clicks", sample.minus_clicks},
                  {"weight", sample.weight},
                  {"particles", args.particles},
                  {"generator_id", mzcalc::kGeneratorId}};
        human << "stochastic estimate (" << args.mode << ", m = " << args.harmonic
              << "): " << g9(sample.estimate) << "\nstandard error: " << g9(sample.standard_error)
              << "\nclicks: +" << sample.plus_clicks << " / -" << sample.minus_clicks << '\n';
    } else {
        ctx.parameters["points"] = args.points;
        const double coefficient =
            mzcalc::fourier_coefficient(signal, ramp, args.scale, args.points);
        result = {{"mode", args.mode},
                  {"harmonic", args.harmonic},
                  {"scale", args.scale},
                  {"points", args.points},
                  {"coefficient", coefficient}};
        human << "coefficient (" << args.mode << ", m = " << args.harmonic
              << "): " << g9(coefficient) << '\n';
    }

    if (!args.trace_file.empty()) {
        const auto trace =
            mzcalc::detector_difference_trace(signal, ramp, args.scale, args.trace_steps);
        std::ofstream out(ctx.resolve(args.trace_file));
        if (!out.is_open()) {
            throw mzcalc::io_error("cannot write trace file '" + args.trace_file + "'");
        }
        out << "t,difference\n";
        for (const auto& [t, diff] : trace) {
            char row[80];
            std::snprintf(row, sizeof row, "%.17g,%.17g\n", t, diff);
            out << row;
        }
        if (!out) {
            throw mzcalc::io_error("failed while writing trace file '" + args.trace_file + "'");
        }
        ctx.note_output(args.trace_file);
        ctx.parameters["trace_steps"] = args.trace_steps;
        human << "trace written to " << args.trace_file << " (" << trace.size() << " rows)\n";
    }

    if (args.energy > 0.0) {
        const auto check = mzcalc::check_adiabaticity(args.energy, args.harmonic,
                                                      signal.period(), args.threshold);
        result["adiabaticity"] = {{"particle_energy", check.particle_energy},
                                  {"ramp_rate", check.ramp_rate},
                                  {"margin", check.margin},
                                  {"threshold", check.threshold},
                                  {"valid", check.valid}};
        human << "adiabaticity margin: " << g9(check.margin) << " ("
              << (check.valid ? "valid" : "NOT valid") << " against threshold "
              << g9(check.threshold) << ")\n";
    }

    deliver(ctx, result, human.str());
    return 0;
}

struct LimitsArgs {
    double wavelength = 0.0;
    double bandwidth = 0.0;
    double coherence = 0.0;
    std::uint64_t number = 0;
};

int run_limits(RunContext& ctx, const LimitsArgs& args) {
    double coherence = args.coherence;
    ctx.parameters = {{"lambda", args.wavelength}};
    if (args.bandwidth > 0.0) {
        coherence = mzcalc::coherence_length(args.wavelength, args.bandwidth);
        ctx.parameters["dlambda"] = args.bandwidth;
    } else {
        if (!(coherence > 0.0)) {
            throw mzcalc::validation_error("limits needs either --dlambda or --coherence");
        }
        ctx.parameters["coherence"] = coherence;
    }

    const std::uint64_t max_number = mzcalc::max_factorable(args.wavelength, coherence);
    const bool degenerate = max_number < 2;
    const std::uint64_t worst =
        degenerate ? 0 : mzcalc::worst_case_steps(max_number);

    nlohmann::json result = {{"wavelength", args.wavelength},
                             {"coherence", coherence},
                             {"max_number", max_number},
                             {"worst_case_steps", worst},
                             {"degenerate", degenerate}};
    std::ostringstream human;
    human << "coherence length: " << g9(coherence) << " m\n";
    human << "max factorable number: " << max_number << '\n';
    human << "worst-case phase steps at that size: " << worst << '\n';
    if (degenerate) {
        human << "warning: coherence supports no number worth testing\n";
    }
    if (args.number > 0) {
        const double envelope =
            mzcalc::visibility_envelope(args.number, args.wavelength, coherence);
        result["envelope"] = {{"number", args.number}, {"visibility", envelope}};
        human << "visibility envelope at N = " << args.number << ": " << g9(envelope) << '\n';
    }

    deliver(ctx, result, human.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mach-Zehnder loop computations: factoring by interference,"
                 " cascaded divisor networks, and Fourier coefficients"};
    app.require_subcommand(1);

    RunContext ctx;
    for (int i = 1; i < argc; ++i) {
        ctx.argv.emplace_back(argv[i]);
    }
    const char* env_out = std::getenv("MZCALC_OUT_DIR");
    std::string out_dir = env_out ? env_out : "";
    bool json_stdout = false;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_flag("--json", json_stdout, "print the JSON envelope instead of text");
        cmd->add_option("--out", out_dir,
                        "directory for the envelope and any output files"
                        " (default: $MZCALC_OUT_DIR)");
    };

    TestArgs test_args;
    auto* test = app.add_subcommand("test", "test one candidate divisor");
    test->add_option("number", test_args.number, "integer under test")->required();
    test->add_option("candidate", test_args.candidate, "candidate divisor")->required();
    test->add_option("--deviation", test_args.deviation,
                     "calibration error on the step divisor (candidate must divide number)");
    test->add_option("--visibility", test_args.visibility, "fringe visibility in [0, 1]");
    auto* stochastic_flag =
        test->add_flag("--stochastic", test_args.stochastic, "Monte Carlo particle counting");
    test->add_option("--seed", test_args.seed, "generator seed")->needs(stochastic_flag);
    test->add_option("--reps", test_args.reps, "particles per observation")
        ->needs(stochastic_flag);
    test->add_option("--threads", test_args.threads, "worker threads")->needs(stochastic_flag);
    test->add_option("--clicks", test_args.clicks_file, "write per-observation clicks CSV")
        ->needs(stochastic_flag);
    add_common(test);

    FactorArgs factor_args;
    auto* factor = app.add_subcommand("factor", "test every candidate up to sqrt(N)");
    factor->add_option("number", factor_args.number, "integer to factor")->required();
    factor->add_option("--visibility", factor_args.visibility, "fringe visibility in [0, 1]");
    factor->add_option("--threads", factor_args.threads, "worker threads");
    factor->add_flag("--csv", factor_args.csv, "print candidate rows as CSV");
    add_common(factor);

    CascadeArgs cascade_args;
    auto* cascade = app.add_subcommand("cascade", "run a divisor network");
    auto* cascade_number = cascade->add_option("number", cascade_args.number,
                                               "integer under test (required with --fig2)");
    auto* spec_opt = cascade->add_option("--spec", cascade_args.spec_file,
                                         "cascade description file (JSON)");
    auto* fig2_opt = cascade
                         ->add_option("--fig2", cascade_args.fig2,
                                      "seven strictly ascending loop sizes n1..n7")
                         ->expected(7);
    spec_opt->excludes(fig2_opt);
    auto* horizon_opt = cascade->add_option("--horizon", cascade_args.horizon,
                                            "observations per detector: auto, lcm, or a count");
    cascade->add_flag("--no-delays", cascade_args.no_delays,
                      "build the reference network without start delays");
    auto* cascade_stoch =
        cascade->add_flag("--stochastic", cascade_args.stochastic, "Monte Carlo mode");
    cascade->add_option("--seed", cascade_args.seed, "generator seed")->needs(cascade_stoch);
    cascade->add_option("--reps", cascade_args.reps, "particles per launch step")
        ->needs(cascade_stoch);
    cascade->add_option("--threads", cascade_args.threads, "worker threads")
        ->needs(cascade_stoch);
    cascade->add_option("--clicks", cascade_args.clicks_file, "write per-observation clicks CSV")
        ->needs(cascade_stoch);
    cascade->add_option("--emit-template", cascade_args.template_file,
                        "write the reference network as an editable JSON file and exit");
    add_common(cascade);

    FourierArgs fourier_args;
    auto* fourier = app.add_subcommand("fourier", "extract one Fourier coefficient");
    fourier->add_option("--builtin", fourier_args.builtin,
                        "built-in signal: demo1, const1, expcos");
    fourier->add_option("--signal", fourier_args.signal_file, "signal CSV (columns t,f)");
    fourier->add_option("--m", fourier_args.harmonic, "harmonic index (>= 1)");
    fourier->add_option("--mode", fourier_args.mode, "cos or sin")
        ->check(CLI::IsMember({"cos", "sin"}));
    fourier->add_option("--c", fourier_args.scale, "proportionality constant");
    fourier->add_option("--points", fourier_args.points, "quadrature intervals");
    fourier->add_option("--trace", fourier_args.trace_file, "write the difference trace CSV");
    fourier->add_option("--trace-steps", fourier_args.trace_steps, "trace resolution");
    fourier->add_option("--particles", fourier_args.particles,
                        "stochastic mode with this many particles");
    fourier->add_option("--seed", fourier_args.seed, "generator seed");
    fourier->add_option("--energy", fourier_args.energy,
                        "particle energy in joules for the adiabaticity check");
    fourier->add_option("--threshold", fourier_args.threshold, "adiabaticity threshold");
    add_common(fourier);

    LimitsArgs limits_args;
    auto* limits = app.add_subcommand("limits", "coherence-length feasibility bounds");
    limits->add_option("--lambda", limits_args.wavelength, "wavelength in meters")->required();
    auto* dlambda_opt =
        limits->add_option("--dlambda", limits_args.bandwidth, "source bandwidth in meters");
    limits->add_option("--coherence", limits_args.coherence, "coherence length in meters")
        ->excludes(dlambda_opt);
    limits->add_option("--number", limits_args.number, "report the visibility envelope at N");
    add_common(limits);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& help) {
        return app.exit(help);
    } catch (const CLI::CallForAllHelp& help) {
        return app.exit(help);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return 2;
    }

    ctx.out_dir = out_dir;
    ctx.json_stdout = json_stdout;
    cascade_args.number_given = cascade_number->count() > 0;
    cascade_args.horizon_given = horizon_opt->count() > 0;

    try {
        if (test->parsed()) {
            ctx.command = "test";
            return run_test(ctx, test_args);
        }
        if (factor->parsed()) {
            ctx.command = "factor";
            return run_factor_cmd(ctx, factor_args);
        }
        if (cascade->parsed()) {
            ctx.command = "cascade";
            return run_cascade(ctx, cascade_args);
        }
        if (fourier->parsed()) {
            ctx.command = "fourier";
            return run_fourier(ctx, fourier_args);
        }
        if (limits->parsed()) {
            ctx.command = "limits";
            return run_limits(ctx, limits_args);
        }
    } catch (const mzcalc::validation_error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 3;
    } catch (const mzcalc::io_error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 4;
    } catch (const std::exception& err) {
        std::cerr << "unexpected error: " << err.what() << '\n';
        return 1;
    }
    return 2;
}
