#include "mzcalc/cascade.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mzcalc {

namespace detail {

// A loop that has not started yet sits at phase zero, which is the same as
// residue zero, so the single residue path covers both cases. Visibility is
// taken as ideal inside a network; degraded sources are a single-loop
// concern.
double port_probability(std::uint64_t increments, std::uint64_t start_delay,
                        unsigned __int128 global_step, Port port) {
    const unsigned __int128 since_start =
        global_step > start_delay ? global_step - start_delay : 0;
    const auto residue = static_cast<std::uint64_t>(since_start % increments);
    const double c = cos_unit_fraction(residue, increments);
    return 0.5 * (1.0 + (port == Port::Bright ? c : -c));
}

std::vector<std::pair<std::string, double>> distribution_at(const CascadeSpec& spec,
                                                            unsigned __int128 global_step) {
    std::vector<std::pair<std::string, double>> out;

    auto descend = [&](auto&& self, int at, double weight) -> void {
        const auto& node = spec.tree.loop(at);
        for (const Port port : {Port::Bright, Port::Dark}) {
            const auto& edge = port == Port::Bright ? node.bright : node.dark;
            const double w =
                weight * port_probability(node.increments, node.start_delay, global_step, port);
            if (edge.leads_to_detector()) {
                out.emplace_back(edge.detector, w);
            } else {
                self(self, edge.child, w);
            }
        }
    };

    descend(descend, spec.tree.root(), 1.0);
    return out;
}

} // namespace detail

namespace {

using u128 = unsigned __int128;
using detail::port_probability;

std::uint64_t checked_lcm(std::uint64_t a, std::uint64_t b) {
    const std::uint64_t g = std::gcd(a, b);
    const u128 l = static_cast<u128>(a / g) * b;
    if (l > static_cast<u128>(UINT64_MAX)) {
        throw validation_error("cascade horizon: lcm of path increments overflows 64 bits");
    }
    return static_cast<std::uint64_t>(l);
}

[[noreturn]] void fail_at(const std::string& path, const std::string& what) {
    throw validation_error("cascade: " + path + ": " + what);
}

std::uint64_t require_uint(const nlohmann::json& v, const std::string& path,
                           std::uint64_t minimum) {
    if (!v.is_number_integer()) {
        fail_at(path, "expected a non-negative integer");
    }
    if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
        fail_at(path, "expected a non-negative integer");
    }
    const auto value = v.get<std::uint64_t>();
    if (value < minimum) {
        fail_at(path, "must be at least " + std::to_string(minimum));
    }
    return value;
}

} // namespace

int CascadeTree::add_loop(const std::string& label, std::uint64_t increments,
                          std::uint64_t start_delay) {
    if (label.empty()) {
        throw validation_error("cascade: loop label must not be empty");
    }
    if (increments == 0) {
        throw validation_error("cascade: loop '" + label + "' needs at least one increment");
    }
    loops_.push_back(Loop{label, increments, start_delay, Edge{}, Edge{}});
    return static_cast<int>(loops_.size()) - 1;
}

void CascadeTree::connect(int parent, Port port, int child) {
    auto& edge = port == Port::Bright ? loop(parent).bright : loop(parent).dark;
    if (child < 0 || child >= static_cast<int>(loops_.size())) {
        throw validation_error("cascade: connect: child index out of range");
    }
    edge = Edge{child, {}};
}

void CascadeTree::connect_detector(int parent, Port port, const std::string& name) {
    if (name.empty()) {
        throw validation_error("cascade: detector name must not be empty");
    }
    auto& edge = port == Port::Bright ? loop(parent).bright : loop(parent).dark;
    edge = Edge{-1, name};
}

void CascadeTree::set_root(int loop_index) {
    if (loop_index < 0 || loop_index >= static_cast<int>(loops_.size())) {
        throw validation_error("cascade: root index out of range");
    }
    root_ = loop_index;
}

const CascadeTree::Loop& CascadeTree::loop(int index) const {
    if (index < 0 || index >= static_cast<int>(loops_.size())) {
        throw validation_error("cascade: loop index out of range");
    }
    return loops_[static_cast<std::size_t>(index)];
}

CascadeTree::Loop& CascadeTree::loop(int index) {
    if (index < 0 || index >= static_cast<int>(loops_.size())) {
        throw validation_error("cascade: loop index out of range");
    }
    return loops_[static_cast<std::size_t>(index)];
}

void CascadeTree::validate() const {
    if (loops_.empty() || root_ < 0) {
        throw validation_error("cascade: tree has no root loop");
    }

    std::vector<std::string> labels;
    std::vector<std::string> names;
    std::vector<char> seen(loops_.size(), 0);

    // Iterative DFS; a loop reached twice means a shared child or a cycle,
    // either of which breaks the one-path-per-detector reading.
    std::vector<int> stack{root_};
    while (!stack.empty()) {
        const int at = stack.back();
        stack.pop_back();
        const auto& node = loops_[static_cast<std::size_t>(at)];
        if (seen[static_cast<std::size_t>(at)]) {
            throw validation_error("cascade: loop '" + node.label +
                                   "' is wired into the tree more than once");
        }
        seen[static_cast<std::size_t>(at)] = 1;
        labels.push_back(node.label);
        for (const Edge* edge : {&node.bright, &node.dark}) {
            if (edge->leads_to_detector()) {
                if (edge->detector.empty()) {
                    throw validation_error("cascade: loop '" + node.label +
                                           "' has an unconnected port");
                }
                names.push_back(edge->detector);
            } else {
                if (edge->child >= static_cast<int>(loops_.size())) {
                    throw validation_error("cascade: loop '" + node.label +
                                           "' points at a missing child");
                }
                stack.push_back(edge->child);
            }
        }
    }

    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        throw validation_error("cascade: tree contains loops unreachable from the root");
    }
    std::sort(labels.begin(), labels.end());
    if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
        throw validation_error("cascade: loop labels must be unique");
    }
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
        throw validation_error("cascade: detector names must be unique");
    }
}

std::vector<std::string> CascadeTree::detectors() const {
    std::vector<std::string> found;
    if (root_ < 0) {
        return found;
    }
    // Bright-first depth-first order, the fixed sampling order.
    auto descend = [&](auto&& self, int at) -> void {
        const auto& node = loops_[static_cast<std::size_t>(at)];
        for (const Edge* edge : {&node.bright, &node.dark}) {
            if (edge->leads_to_detector()) {
                found.push_back(edge->detector);
            } else {
                self(self, edge->child);
            }
        }
    };
    descend(descend, root_);
    return found;
}

std::vector<PathLoop> CascadeTree::path_to(const std::string& detector) const {
    std::vector<PathLoop> path;
    std::vector<PathLoop> result;

    auto descend = [&](auto&& self, int at) -> bool {
        const auto& node = loops_[static_cast<std::size_t>(at)];
        for (const Port port : {Port::Bright, Port::Dark}) {
            const Edge& edge = port == Port::Bright ? node.bright : node.dark;
            path.push_back(PathLoop{node.label, node.increments, node.start_delay, port});
            if (edge.leads_to_detector()) {
                if (edge.detector == detector) {
                    result = path;
                    path.pop_back();
                    return true;
                }
            } else if (self(self, edge.child)) {
                path.pop_back();
                return true;
            }
            path.pop_back();
        }
        return false;
    };

    if (root_ < 0 || !descend(descend, root_)) {
        throw validation_error("cascade: unknown detector '" + detector + "'");
    }
    return result;
}

std::uint64_t CascadeTree::observation_delay(const std::string& detector) const {
    return path_to(detector).back().start_delay;
}

void CascadeTree::clear_delays() {
    for (auto& node : loops_) {
        node.start_delay = 0;
    }
}

std::uint64_t CascadeSpec::horizon_for(const std::string& detector) const {
    const auto path = tree.path_to(detector);
    switch (horizon_mode) {
        case HorizonMode::DeepestLoop:
            return path.back().increments;
        case HorizonMode::PathLcm: {
            std::uint64_t l = 1;
            for (const auto& step : path) {
                l = checked_lcm(l, step.increments);
            }
            return l;
        }
        case HorizonMode::Fixed:
            if (fixed_horizon == 0) {
                throw validation_error("cascade horizon: fixed horizon must be positive");
            }
            return fixed_horizon;
    }
    throw validation_error("cascade horizon: unknown mode");
}

std::uint64_t dark_port_delay(std::span<const std::uint64_t> dark_ancestors) {
    std::uint64_t sum = 0;
    for (const std::uint64_t n : dark_ancestors) {
        sum += n;
    }
    return (sum + 1) / 2;
}

double path_probability(const CascadeSpec& spec, const std::string& detector, std::uint64_t k) {
    if (spec.number < 2) {
        throw validation_error("cascade: number under test must be at least 2");
    }
    const auto path = spec.tree.path_to(detector);
    const std::uint64_t delay = path.back().start_delay;
    const u128 j = static_cast<u128>(k) * spec.number + delay;
    double p = 1.0;
    for (const auto& step : path) {
        p *= port_probability(step.increments, step.start_delay, j, step.port);
    }
    return p;
}

std::vector<std::pair<std::string, double>> step_distribution(const CascadeSpec& spec,
                                                              std::uint64_t global_step) {
    spec.tree.validate();
    return detail::distribution_at(spec, global_step);
}

DetectorTally accumulate(const CascadeSpec& spec, const std::string& detector) {
    if (spec.number < 2) {
        throw validation_error("cascade: number under test must be at least 2");
    }
    const auto path = spec.tree.path_to(detector);
    const std::uint64_t delay = path.back().start_delay;
    const std::uint64_t horizon = spec.horizon_for(detector);

    double sum = 0.0;
    for (std::uint64_t k = 1; k <= horizon; ++k) {
        const u128 j = static_cast<u128>(k) * spec.number + delay;
        double p = 1.0;
        for (const auto& step : path) {
            p *= port_probability(step.increments, step.start_delay, j, step.port);
        }
        sum += p;
    }

    const double scale = std::ldexp(1.0, static_cast<int>(path.size()));
    DetectorTally tally;
    tally.detector = detector;
    tally.expected_intensity = sum;
    tally.units_of = static_cast<double>(path.back().increments) / scale;
    tally.table_units = sum * scale / static_cast<double>(horizon);
    tally.horizon = horizon;
    tally.delay = delay;
    return tally;
}

std::vector<DetectorTally> accumulate_all(const CascadeSpec& spec) {
    spec.tree.validate();
    std::vector<DetectorTally> out;
    for (const auto& name : spec.tree.detectors()) {
        out.push_back(accumulate(spec, name));
    }
    return out;
}

CascadeSpec build_fig2(std::uint64_t number, const std::array<std::uint64_t, 7>& increments,
                       bool with_delays) {
    if (number < 2) {
        throw validation_error("cascade: number under test must be at least 2");
    }
    for (std::size_t i = 0; i < increments.size(); ++i) {
        if (increments[i] < 2) {
            throw validation_error("cascade: loop n" + std::to_string(i + 1) +
                                   " needs at least 2 increments");
        }
        if (i > 0 && increments[i] <= increments[i - 1]) {
            throw validation_error("cascade: loop increments must be strictly ascending");
        }
    }

    const std::uint64_t n1 = increments[0];
    const std::uint64_t n2 = increments[1];
    const std::uint64_t n3 = increments[2];

    CascadeSpec spec;
    spec.number = number;

    auto delay_for = [&](std::initializer_list<std::uint64_t> dark_ports) -> std::uint64_t {
        if (!with_delays) {
            return 0;
        }
        const std::vector<std::uint64_t> list(dark_ports);
        return dark_port_delay(list);
    };

    CascadeTree& tree = spec.tree;
    const int l1 = tree.add_loop("n1", n1);
    const int l2 = tree.add_loop("n2", n2);
    const int l3 = tree.add_loop("n3", n3, delay_for({n1}));
    const int l4 = tree.add_loop("n4", increments[3]);
    const int l5 = tree.add_loop("n5", increments[4], delay_for({n2}));
    const int l6 = tree.add_loop("n6", increments[5], delay_for({n1, n3}));
    const int l7 = tree.add_loop("n7", increments[6], delay_for({n1}));

    tree.set_root(l1);
    tree.connect(l1, Port::Bright, l2);
    tree.connect(l1, Port::Dark, l3);
    tree.connect(l2, Port::Bright, l4);
    tree.connect(l2, Port::Dark, l5);
    tree.connect(l3, Port::Dark, l6);
    tree.connect(l3, Port::Bright, l7);
    tree.connect_detector(l4, Port::Bright, "A");
    tree.connect_detector(l4, Port::Dark, "B");
    tree.connect_detector(l5, Port::Bright, "C");
    tree.connect_detector(l5, Port::Dark, "D");
    tree.connect_detector(l6, Port::Bright, "E");
    tree.connect_detector(l6, Port::Dark, "F");
    tree.connect_detector(l7, Port::Bright, "G");
    tree.connect_detector(l7, Port::Dark, "H");

    tree.validate();
    return spec;
}

std::array<double, 3> expectation_row(bool f1, bool f2, bool f4) {
    const auto half = [](bool factor) { return factor ? 1.0 : 0.5; };
    const double spine = 8.0 * half(f1) * half(f2);
    return {
        spine * (f4 ? 1.0 : 0.5),   // bright-bright-bright
        f4 ? 0.0 : spine * 0.5,     // a divisor's dark port is silent
        f2 ? 0.0 : 8.0 * half(f1) * 0.5,
    };
}

Table1Report table1_report(std::uint64_t number, std::uint64_t n1, std::uint64_t n2,
                           std::uint64_t n4, std::uint64_t horizon) {
    if (number < 2) {
        throw validation_error("table: number under test must be at least 2");
    }
    for (const std::uint64_t n : {n1, n2, n4}) {
        if (n < 2) {
            throw validation_error("table: loop increments must be at least 2");
        }
    }
    if (!(n1 < n2 && n2 < n4)) {
        throw validation_error("table: loop increments must be strictly ascending");
    }
    if (horizon == 0) {
        throw validation_error("table: horizon must be positive");
    }

    Table1Report report;
    report.number = number;
    report.loops = {n1, n2, n4};
    report.horizon = horizon;
    report.factor_flags = {number % n1 == 0, number % n2 == 0, number % n4 == 0};

    // The front section observes at plain multiples of the number, so the
    // three intensities are direct products of port probabilities at exact
    // integer residues. C and D are summed before their own loop splits
    // them, which is why n5 does not appear here.
    for (std::uint64_t k = 1; k <= horizon; ++k) {
        const auto cos_at = [&](std::uint64_t n) {
            const auto residue = static_cast<std::uint64_t>((static_cast<u128>(k) * number) % n);
            return detail::cos_unit_fraction(residue, n);
        };
        const double b1 = 0.5 * (1.0 + cos_at(n1));
        const double b2 = 0.5 * (1.0 + cos_at(n2));
        const double c4 = cos_at(n4);
        report.bright_bright += b1 * b2 * 0.5 * (1.0 + c4);
        report.bright_dark += b1 * b2 * 0.5 * (1.0 - c4);
        report.dark_pair += b1 * (1.0 - b2);
    }

    const double scale = 8.0 / static_cast<double>(horizon);
    report.normalized = {report.bright_bright * scale, report.bright_dark * scale,
                         report.dark_pair * scale};
    report.predicted =
        expectation_row(report.factor_flags[0], report.factor_flags[1], report.factor_flags[2]);

    // A finite horizon only averages the cross terms away when no integer
    // combination of the per-step frequencies r_i / n_i lands on a whole
    // number of turns. Check every signed pair and triple of the loops
    // that actually oscillate; divisors contribute constants, not tones.
    const std::array<std::uint64_t, 3> res = {number % n1, number % n2, number % n4};
    const std::array<std::string, 3> tags = {"n1", "n2", "n4"};
    using i128 = __int128;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = i + 1; j < 3; ++j) {
            if (res[i] == 0 || res[j] == 0) {
                continue;
            }
            const i128 den = static_cast<i128>(report.loops[i]) * report.loops[j];
            const i128 a = static_cast<i128>(res[i]) * report.loops[j];
            const i128 b = static_cast<i128>(res[j]) * report.loops[i];
            if ((a + b) % den == 0) {
                report.resonances.push_back(tags[i] + "+" + tags[j]);
            }
            if ((a - b) % den == 0) {
                report.resonances.push_back(tags[i] + "-" + tags[j]);
            }
        }
    }
    if (res[0] != 0 && res[1] != 0 && res[2] != 0) {
        const i128 den = static_cast<i128>(n1) * n2 * n4;
        const i128 t1 = static_cast<i128>(res[0]) * n2 * n4;
        const i128 t2 = static_cast<i128>(res[1]) * n1 * n4;
        const i128 t4 = static_cast<i128>(res[2]) * n1 * n2;
        for (const int s2 : {1, -1}) {
            for (const int s4 : {1, -1}) {
                if ((t1 + s2 * t2 + s4 * t4) % den == 0) {
                    report.resonances.push_back("n1" + std::string(s2 > 0 ? "+" : "-") + "n2" +
                                                std::string(s4 > 0 ? "+" : "-") + "n4");
                }
            }
        }
    }
    return report;
}

namespace {

nlohmann::json edge_to_json(const CascadeTree& tree, const CascadeTree::Edge& edge);

nlohmann::json node_to_json(const CascadeTree& tree, int index) {
    const auto& node = tree.loop(index);
    nlohmann::json out;
    out["label"] = node.label;
    out["increments"] = node.increments;
    if (node.start_delay != 0) {
        out["delay"] = node.start_delay;
    }
    out["bright"] = edge_to_json(tree, node.bright);
    out["dark"] = edge_to_json(tree, node.dark);
    return out;
}

nlohmann::json edge_to_json(const CascadeTree& tree, const CascadeTree::Edge& edge) {
    if (edge.leads_to_detector()) {
        return edge.detector;
    }
    return node_to_json(tree, edge.child);
}

int parse_node(const nlohmann::json& value, const std::string& path, CascadeTree& tree) {
    if (!value.is_object()) {
        fail_at(path, "expected a loop object");
    }
    if (!value.contains("label") || !value["label"].is_string()) {
        fail_at(path + ".label", "expected a string");
    }
    if (!value.contains("increments")) {
        fail_at(path + ".increments", "expected a positive integer");
    }
    const auto label = value["label"].get<std::string>();
    const std::uint64_t increments = require_uint(value["increments"], path + ".increments", 1);
    const std::uint64_t delay =
        value.contains("delay") ? require_uint(value["delay"], path + ".delay", 0) : 0;

    for (const auto& [key, unused] : value.items()) {
        (void)unused;
        if (key != "label" && key != "increments" && key != "delay" && key != "bright" &&
            key != "dark") {
            fail_at(path + "." + key, "unknown field");
        }
    }

    const int index = tree.add_loop(label, increments, delay);
    for (const char* port_name : {"bright", "dark"}) {
        const Port port = port_name[0] == 'b' ? Port::Bright : Port::Dark;
        const std::string port_path = path + "." + port_name;
        if (!value.contains(port_name)) {
            fail_at(port_path, "expected a loop object or a detector name");
        }
        const auto& child = value[port_name];
        if (child.is_string()) {
            tree.connect_detector(index, port, child.get<std::string>());
        } else if (child.is_object()) {
            tree.connect(index, port, parse_node(child, port_path, tree));
        } else {
            fail_at(port_path, "expected a loop object or a detector name");
        }
    }
    return index;
}

} // namespace

nlohmann::json CascadeTree::to_json() const {
    validate();
    return node_to_json(*this, root_);
}

CascadeTree CascadeTree::from_json(const nlohmann::json& node) {
    CascadeTree tree;
    tree.set_root(parse_node(node, "root", tree));
    tree.validate();
    return tree;
}

nlohmann::json cascade_to_json(const CascadeSpec& spec) {
    nlohmann::json out;
    out["number"] = spec.number;
    switch (spec.horizon_mode) {
        case HorizonMode::DeepestLoop:
            out["horizon"] = "auto";
            break;
        case HorizonMode::PathLcm:
            out["horizon"] = "lcm";
            break;
        case HorizonMode::Fixed:
            out["horizon"] = spec.fixed_horizon;
            break;
    }
    out["root"] = spec.tree.to_json();
    return out;
}

CascadeSpec cascade_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) {
        fail_at("document", "expected an object");
    }
    if (!doc.contains("number")) {
        fail_at("number", "expected an integer of at least 2");
    }
    if (!doc.contains("root")) {
        fail_at("root", "expected a loop object");
    }
    for (const auto& [key, unused] : doc.items()) {
        (void)unused;
        if (key != "number" && key != "horizon" && key != "root") {
            fail_at(key, "unknown field");
        }
    }

    CascadeSpec spec;
    spec.number = require_uint(doc["number"], "number", 2);
    if (doc.contains("horizon")) {
        const auto& h = doc["horizon"];
        if (h.is_string() && h.get<std::string>() == "auto") {
            spec.horizon_mode = HorizonMode::DeepestLoop;
        } else if (h.is_string() && h.get<std::string>() == "lcm") {
            spec.horizon_mode = HorizonMode::PathLcm;
        } else if (h.is_number_integer()) {
            spec.horizon_mode = HorizonMode::Fixed;
            spec.fixed_horizon = require_uint(h, "horizon", 1);
        } else {
            fail_at("horizon", "expected \"auto\", \"lcm\", or a positive integer");
        }
    }
    spec.tree = CascadeTree::from_json(doc["root"]);
    return spec;
}

CascadeSpec load_cascade(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) {
        throw io_error("cannot open cascade file '" + path + "'");
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& err) {
        throw validation_error("cascade: '" + path + "' is not valid JSON: " + err.what());
    }
    return cascade_from_json(doc);
}

void save_cascade(const CascadeSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out.is_open()) {
        throw io_error("cannot write cascade file '" + path + "'");
    }
    out << cascade_to_json(spec).dump(2) << '\n';
    if (!out) {
        throw io_error("failed while writing cascade file '" + path + "'");
    }
}

} // namespace mzcalc
