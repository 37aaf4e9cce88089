// Drives the installed mzcalc binary end to end: exit codes, human output,
// JSON envelopes against the published schema, manifest replay, and the
// files a run leaves behind. The test runner passes the tool path and the
// source directory as the two leading arguments.

#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string tool_path;
std::string source_dir;

struct RunResult {
    int exit_code = -1;
    std::string out;
};

// Runs the tool through the shell, capturing stdout; stderr is dropped so
// expected failures stay quiet in the test log. `prefix` lets a test set
// environment variables the sh way.
RunResult run_tool(const std::string& args, const std::string& prefix = "") {
    const std::string cmd = prefix + "'" + tool_path + "' " + args + " 2>/dev/null";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buffer[4096];
    std::size_t got = 0;
    while ((got = std::fread(buffer, 1, sizeof buffer, pipe)) > 0) {
        out.append(buffer, got);
    }
    const int status = ::pclose(pipe);
    RunResult result;
    result.out = std::move(out);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

json run_json(const std::string& args) {
    const auto result = run_tool(args + " --json");
    REQUIRE(result.exit_code == 0);
    return json::parse(result.out);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.is_open());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() /
                     ("mzcalc_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

// Just enough of JSON Schema to enforce docs/output.schema.json: type,
// const, enum, required, properties, additionalProperties and items.
void check_schema(const json& schema, const json& value, const std::string& where,
                  std::vector<std::string>& errors) {
    const auto type_matches = [&](const std::string& name) {
        if (name == "object") return value.is_object();
        if (name == "array") return value.is_array();
        if (name == "string") return value.is_string();
        if (name == "integer") return value.is_number_integer();
        if (name == "number") return value.is_number();
        if (name == "boolean") return value.is_boolean();
        if (name == "null") return value.is_null();
        errors.push_back(where + ": schema uses unknown type '" + name + "'");
        return false;
    };

    if (schema.contains("type")) {
        const auto& t = schema["type"];
        bool ok = false;
        if (t.is_string()) {
            ok = type_matches(t.get<std::string>());
        } else {
            for (const auto& option : t) {
                ok = ok || type_matches(option.get<std::string>());
            }
        }
        if (!ok) {
            errors.push_back(where + ": wrong type, got " + std::string(value.type_name()));
            return;
        }
    }
    if (schema.contains("const") && value != schema["const"]) {
        errors.push_back(where + ": expected constant " + schema["const"].dump());
    }
    if (schema.contains("enum")) {
        bool ok = false;
        for (const auto& option : schema["enum"]) {
            ok = ok || value == option;
        }
        if (!ok) {
            errors.push_back(where + ": " + value.dump() + " not in enum");
        }
    }
    if (value.is_object()) {
        if (schema.contains("required")) {
            for (const auto& key : schema["required"]) {
                if (!value.contains(key.get<std::string>())) {
                    errors.push_back(where + ": missing required key '" +
                                     key.get<std::string>() + "'");
                }
            }
        }
        const json props =
            schema.contains("properties") ? schema["properties"] : json::object();
        if (schema.value("additionalProperties", json(true)) == json(false)) {
            for (const auto& [key, ignored] : value.items()) {
                (void)ignored;
                if (!props.contains(key)) {
                    errors.push_back(where + ": unexpected key '" + key + "'");
                }
            }
        }
        for (const auto& [key, sub] : props.items()) {
            if (value.contains(key)) {
                check_schema(sub, value[key], where + "." + key, errors);
            }
        }
    }
    if (value.is_array() && schema.contains("items")) {
        for (std::size_t i = 0; i < value.size(); ++i) {
            check_schema(schema["items"], value[i], where + "[" + std::to_string(i) + "]",
                         errors);
        }
    }
}

void require_valid_envelope(const json& envelope) {
    static const json schema =
        json::parse(read_file(fs::path(source_dir) / "docs" / "output.schema.json"));
    std::vector<std::string> errors;
    check_schema(schema, envelope, "envelope", errors);
    for (const auto& problem : errors) {
        FAIL_CHECK(problem);
    }
    REQUIRE(errors.empty());
}

} // namespace

TEST_CASE("single-candidate test reports the dichotomy") {
    const auto factor = run_tool("test 15 3");
    CHECK(factor.exit_code == 0);
    CHECK(contains(factor.out, "intensity: 3"));
    CHECK(contains(factor.out, "classification: Factor"));

    const auto nonfactor = run_tool("test 15 4");
    CHECK(nonfactor.exit_code == 0);
    CHECK(contains(nonfactor.out, "intensity: 2"));
    CHECK(contains(nonfactor.out, "classification: NonFactor"));

    const auto divisor5 = run_tool("test 15 5");
    CHECK(divisor5.exit_code == 0);
    CHECK(contains(divisor5.out, "intensity: 5"));
}

TEST_CASE("exit codes separate usage, validation and io failures") {
    CHECK(run_tool("--help").exit_code == 0);
    // Usage problems the parser catches.
    CHECK(run_tool("test 15 abc").exit_code == 2);
    CHECK(run_tool("test 15").exit_code == 2);
    CHECK(run_tool("frobnicate").exit_code == 2);
    CHECK(run_tool("").exit_code == 2);
    CHECK(run_tool("cascade 60 --fig2 2 3 4 7 9 11").exit_code == 2);
    // Well-formed but physically meaningless requests.
    CHECK(run_tool("test 15 0").exit_code == 3);
    CHECK(run_tool("test 15 16").exit_code == 3);
    CHECK(run_tool("test 15 4 --deviation 0.01").exit_code == 3);
    CHECK(run_tool("test 15 3 --stochastic --deviation 0.01").exit_code == 3);
    CHECK(run_tool("cascade 60 --fig2 3 2 4 7 9 11 13").exit_code == 3);
    CHECK(run_tool("fourier --builtin nosuch").exit_code == 3);
    CHECK(run_tool("fourier --builtin demo1 --nonsense").exit_code == 2);
    CHECK(run_tool("limits --lambda 500e-9").exit_code == 3);
    // Files that cannot be opened.
    CHECK(run_tool("cascade --spec /no/such/file.json").exit_code == 4);
    CHECK(run_tool("fourier --builtin demo1 --trace /no/such/dir/trace.csv").exit_code == 4);
    CHECK(run_tool("fourier --signal /no/such/signal.csv").exit_code == 4);
}

TEST_CASE("fourier subcommand recovers the demo coefficients") {
    const auto cos1 = run_json("fourier --builtin demo1");
    CHECK(cos1["result"]["coefficient"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
    const auto sin2 = run_json("fourier --builtin demo1 --mode sin --m 2");
    CHECK(sin2["result"]["coefficient"].get<double>() == doctest::Approx(0.5).epsilon(1e-6));
    const auto quiet = run_json("fourier --builtin const1");
    CHECK(quiet["result"]["coefficient"].get<double>() ==
          doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
}

TEST_CASE("limits subcommand reproduces the headline bound") {
    const auto envelope = run_json("limits --lambda 500e-9 --coherence 5");
    CHECK(envelope["result"]["max_number"].get<std::uint64_t>() == 10000000);
    CHECK(envelope["result"]["worst_case_steps"].get<std::uint64_t>() == 31620000000ull);
    CHECK_FALSE(envelope["result"]["degenerate"].get<bool>());

    const auto from_bandwidth = run_json("limits --lambda 500e-9 --dlambda 5e-14");
    CHECK(from_bandwidth["result"]["coherence"].get<double>() ==
          doctest::Approx(5.0).epsilon(1e-12));

    const auto human = run_tool("limits --lambda 500e-9 --coherence 5");
    CHECK(human.exit_code == 0);
    CHECK(contains(human.out, "max factorable number: 10000000"));
}

TEST_CASE("json envelopes conform to the published schema") {
    const std::vector<std::string> invocations = {
        "test 15 3",
        "test 20 5 --stochastic --seed 3 --reps 10",
        "factor 91",
        "cascade 554268 --fig2 2 3 11 12 13 17 19",
        "fourier --builtin expcos --m 2",
        "limits --lambda 500e-9 --coherence 5",
    };
    for (const auto& invocation : invocations) {
        CAPTURE(invocation);
        const auto envelope = run_json(invocation);
        require_valid_envelope(envelope);
        CHECK(envelope["tool"] == "mzcalc");
        const std::string command = invocation.substr(0, invocation.find(' '));
        CHECK(envelope["command"] == command);
        CHECK(envelope["manifest"]["argv"][0] == command);
        CHECK(envelope["manifest"]["tool_version"] == envelope["version"]);
    }

    SUBCASE("the seed is recorded only for stochastic runs") {
        CHECK(run_json("test 15 3")["manifest"]["seed"].is_null());
        CHECK(run_json("test 20 5 --stochastic --seed 42 --reps 5")["manifest"]["seed"] == 42);
    }

    SUBCASE("parameters echo the resolved inputs") {
        const auto envelope = run_json("test 15 3");
        CHECK(envelope["manifest"]["parameters"]["number"] == 15);
        CHECK(envelope["manifest"]["parameters"]["candidate"] == 3);
        CHECK(envelope["result"]["classification"] == "Factor");
        CHECK(envelope["result"]["tolerance_bound"].get<double>() ==
              doctest::Approx(1.0 / 60.0).epsilon(1e-12));
    }
}

TEST_CASE("factor subcommand lists candidates and factors") {
    const auto report = run_json("factor 91");
    const auto& result = report["result"];
    CHECK(result["number"] == 91);
    REQUIRE(result["factors"].size() == 1);
    CHECK(result["factors"][0]["divisor"] == 7);
    CHECK(result["factors"][0]["cofactor"] == 13);
    // Candidates 2..9 inclusive.
    CHECK(result["candidates"].size() == 8);

    const auto csv = run_tool("factor 91 --csv");
    CHECK(csv.exit_code == 0);
    CHECK(contains(csv.out, "n,intensity,classification"));
    CHECK(contains(csv.out, "7,7,Factor"));

    const auto prime = run_tool("factor 13");
    CHECK(prime.exit_code == 0);
    CHECK(contains(prime.out, "13 is prime"));
}

TEST_CASE("replaying the same argv writes the same bytes") {
    const auto first = run_tool("factor 91 --json");
    const auto second = run_tool("factor 91 --json");
    REQUIRE(first.exit_code == 0);
    CHECK(first.out == second.out);

    SUBCASE("including the envelope file under --out") {
        const auto dir = scratch_dir("replay");
        const std::string args = "test 15 3 --out '" + dir.string() + "'";
        REQUIRE(run_tool(args).exit_code == 0);
        const auto before = read_file(dir / "test.json");
        fs::remove_all(dir);
        REQUIRE(run_tool(args).exit_code == 0);
        CHECK(before == read_file(dir / "test.json"));
        require_valid_envelope(json::parse(before));
    }

    SUBCASE("stochastic runs repeat under the same seed") {
        const auto one = run_tool("test 20 5 --stochastic --seed 11 --reps 200 --json");
        const auto two = run_tool("test 20 5 --stochastic --seed 11 --reps 200 --json");
        CHECK(one.out == two.out);
        const auto other = run_tool("test 20 5 --stochastic --seed 12 --reps 200 --json");
        CHECK(one.out != other.out);
    }
}

TEST_CASE("output files land under the output directory") {
    SUBCASE("clicks CSV plus envelope via --out") {
        const auto dir = scratch_dir("clicks");
        const auto envelope = run_json("test 15 3 --stochastic --seed 7 --reps 5"
                                       " --clicks clicks.csv --out '" +
                                       dir.string() + "'");
        CHECK(fs::exists(dir / "clicks.csv"));
        CHECK(fs::exists(dir / "test.json"));
        const auto& outputs = envelope["manifest"]["outputs"];
        REQUIRE(outputs.size() == 2);
        CHECK(outputs[0] == "clicks.csv");
        CHECK(outputs[1] == "test.json");
        const auto csv = read_file(dir / "clicks.csv");
        CHECK(contains(csv, "# generator_id="));
        CHECK(contains(csv, "k,detector,count"));
    }

    SUBCASE("MZCALC_OUT_DIR is the --out default") {
        const auto dir = scratch_dir("envdir");
        const auto result =
            run_tool("test 15 3", "MZCALC_OUT_DIR='" + dir.string() + "' ");
        CHECK(result.exit_code == 0);
        CHECK(contains(result.out, "classification: Factor"));
        CHECK(fs::exists(dir / "test.json"));
    }

    SUBCASE("trace CSV has one row per node") {
        const auto dir = scratch_dir("trace");
        const auto result = run_tool("fourier --builtin demo1 --trace trace.csv"
                                     " --trace-steps 16 --out '" +
                                     dir.string() + "'");
        CHECK(result.exit_code == 0);
        const auto csv = read_file(dir / "trace.csv");
        std::size_t lines = 0;
        for (const char c : csv) {
            lines += c == '\n' ? 1 : 0;
        }
        CHECK(lines == 18);  // header plus 17 nodes
        CHECK(contains(csv, "t,difference"));
    }
}

TEST_CASE("cascade template round-trips through the spec loader") {
    const auto dir = scratch_dir("template");
    const auto emit = run_tool("cascade --emit-template tpl.json --out '" + dir.string() + "'");
    REQUIRE(emit.exit_code == 0);
    const auto tpl = dir / "tpl.json";
    REQUIRE(fs::exists(tpl));

    const auto doc = json::parse(read_file(tpl));
    CHECK(doc["number"] == 554268);
    CHECK(doc["horizon"] == "auto");
    CHECK(doc["root"]["label"] == "n1");

    const auto run = run_json("cascade --spec '" + tpl.string() + "'");
    const auto& detectors = run["result"]["detectors"];
    REQUIRE(detectors.size() == 8);
    CHECK(detectors[0]["detector"] == "A");
    CHECK(detectors[0]["expected_intensity"].get<double>() ==
          doctest::Approx(12.0).epsilon(1e-9));
    CHECK(detectors[0]["horizon"] == 12);

    SUBCASE("the horizon flag overrides the stored mode") {
        const auto wide = run_json("cascade --spec '" + tpl.string() + "' --horizon 24");
        CHECK(wide["result"]["detectors"][0]["horizon"] == 24);
        CHECK(wide["result"]["detectors"][0]["expected_intensity"].get<double>() ==
              doctest::Approx(24.0).epsilon(1e-9));
    }

    SUBCASE("a positional number overrides the stored one") {
        const auto other = run_json("cascade 77 --spec '" + tpl.string() + "'");
        CHECK(other["result"]["number"] == 77);
    }
}

TEST_CASE("cascade reference run separates the front-section patterns") {
    const auto run = run_json("cascade 554268 --fig2 2 3 11 12 13 17 19");
    const auto& front = run["result"]["front_section"];
    CHECK(front["horizon"] == 12);
    CHECK(front["max_deviation"].get<double>() < 1e-9);
    CHECK(front["normalized"][0].get<double>() == doctest::Approx(8.0).epsilon(1e-9));
    CHECK(front["resonances"].empty());

    const auto human = run_tool("cascade 554268 --fig2 2 3 11 12 13 17 19");
    CHECK(human.exit_code == 0);
    CHECK(contains(human.out, "front section"));
    CHECK(contains(human.out, "max deviation"));
}

TEST_CASE("signal files feed the fourier subcommand") {
    const auto dir = scratch_dir("signals");

    SUBCASE("a constant table yields no oscillation") {
        const auto file = dir / "const.csv";
        std::ofstream out(file);
        out << "t,f\n";
        for (int i = 0; i < 8; ++i) {
            out << 0.125 * i << ",1.0\n";
        }
        out.close();
        const auto result = run_json("fourier --signal '" + file.string() + "'");
        CHECK(result["result"]["coefficient"].get<double>() ==
              doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
        CHECK(result["manifest"]["parameters"]["period"].get<double>() ==
              doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("time must start at zero") {
        const auto file = dir / "offset.csv";
        std::ofstream out(file);
        out << "0.5,1.0\n1.0,1.0\n1.5,1.0\n";
        out.close();
        CHECK(run_tool("fourier --signal '" + file.string() + "'").exit_code == 3);
    }

    SUBCASE("rows need two columns") {
        const auto file = dir / "short.csv";
        std::ofstream out(file);
        out << "0.0,1.0\njust-one-column\n";
        out.close();
        CHECK(run_tool("fourier --signal '" + file.string() + "'").exit_code == 3);
    }
}

TEST_CASE("adiabaticity check rides along with the fourier run") {
    const auto run = run_json("fourier --builtin demo1 --m 100 --energy 3.97e-19");
    const auto& check = run["result"]["adiabaticity"];
    CHECK(check["valid"].get<bool>());
    CHECK(check["margin"].get<double>() == doctest::Approx(1.669e-13).epsilon(1e-3));
    CHECK(check["ramp_rate"].get<double>() == doctest::Approx(100.0).epsilon(1e-12));
}

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: %s <mzcalc-binary> <source-dir> [doctest args]\n", argv[0]);
        return 1;
    }
    tool_path = argv[1];
    source_dir = argv[2];
    doctest::Context context;
    context.applyCommandLine(1, argv);
    return context.run();
}
