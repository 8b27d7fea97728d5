#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <sys/wait.h>

#include "json.hpp"
#include "test_helpers.hpp"

using Catch::Approx;
using jls::Matrix;
using jls::Vector;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    const std::string command = env_prefix + "\"" + JLS_CLI_PATH + "\" " + args + " 2>/dev/null";
    CliResult result;
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buffer[4096];
    size_t got = 0;
    while ((got = fread(buffer, 1, sizeof(buffer), pipe)) > 0) result.output.append(buffer, got);
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string scratch_path(const std::string& name) {
    const std::filesystem::path dir = std::filesystem::temp_directory_path() / "jls_cli_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string quoted_fixture(const std::string& name) {
    return "\"" + test_helpers::fixture_path(name) + "\"";
}

}  // namespace

TEST_CASE("model file round trip", "[io]") {
    SECTION("all shipped fixtures load and validate") {
        for (const std::string& name :
             {"example2.json", "example2_scaled.json", "example3.json", "example3_scaled.json",
              "lti_n2.json", "rand_n2.json", "rand_n3.json", "mimo_n2.json"}) {
            jls::JlsModel model = test_helpers::load_fixture(name);
            INFO(name);
            REQUIRE(jls::validate_model(model).ok);
        }
    }
    SECTION("save and reload preserves every entry") {
        jls::JlsModel model = test_helpers::random_model(404, 3, 2, 2, 3);
        const std::string path = scratch_path("roundtrip.json");
        jls::save_model(model, path);
        jls::JlsModel loaded = jls::load_model(path);
        REQUIRE(loaded.n == model.n);
        REQUIRE(loaded.s == model.s);
        for (int i = 0; i < model.s; ++i) {
            REQUIRE(test_helpers::max_abs_diff(loaded.modes[i], model.modes[i]) == 0.0);
            REQUIRE(loaded.probs[i] == model.probs[i]);
        }
        REQUIRE(test_helpers::max_abs_diff(loaded.B, model.B) == 0.0);
        REQUIRE(test_helpers::max_abs_diff(loaded.C, model.C) == 0.0);
    }
    SECTION("missing and malformed files are rejected") {
        REQUIRE_THROWS_AS(jls::load_model("/nonexistent/model.json"), std::runtime_error);
        const std::string path = scratch_path("broken.json");
        jls::write_text_file(path, "{\"n\": 2,");
        REQUIRE_THROWS_AS(jls::load_model(path), std::runtime_error);
    }
    SECTION("non-finite entries are rejected") {
        const std::string path = scratch_path("nonfinite.json");
        jls::write_text_file(path,
                             "{\"n\":1,\"m\":1,\"p\":1,\"s\":1,\"modes\":[[[1e999]]],"
                             "\"B\":[[1.0]],\"C\":[[1.0]],\"probs\":[1.0]}");
        REQUIRE_THROWS(jls::load_model(path));
    }
    SECTION("invalid models fail on load") {
        const std::string path = scratch_path("badprobs.json");
        jls::JlsModel model = test_helpers::load_fixture("example2.json");
        model.probs = {0.6, 0.6};
        std::string text = jls::model_to_json(model);
        jls::write_text_file(path, text);
        REQUIRE_THROWS(jls::load_model(path));
    }
}

TEST_CASE("plain-text serializers", "[io]") {
    SECTION("doubles print with up to 17 significant digits") {
        REQUIRE(jls::format_double(0.5) == "0.5");
        REQUIRE(jls::format_double(-2.0) == "-2");
        const double third = 1.0 / 3.0;
        REQUIRE(std::stod(jls::format_double(third)) == third);
        REQUIRE(jls::format_double(std::numeric_limits<double>::infinity()) == "\"inf\"");
        REQUIRE(jls::format_double(-std::numeric_limits<double>::infinity()) == "\"-inf\"");
        REQUIRE(jls::format_double(std::nan("")) == "\"nan\"");
    }
    SECTION("string escaping") {
        REQUIRE(jls::json_escape("a\"b\\c") == "\"a\\\"b\\\\c\"");
    }
    SECTION("trajectory CSV header and line endings") {
        jls::JlsModel ex2 = test_helpers::load_fixture("example2.json");
        jls::SwitchSequence switches = jls::SwitchSequence::from_one_based({2, 2});
        std::vector<Vector> inputs(1, Vector::Ones(1));
        jls::Trajectory traj = jls::simulate_with_switches(ex2, switches, inputs);
        const std::string csv = jls::trajectory_to_csv(traj);
        REQUIRE(csv.rfind("k,switch,u1,y1\n", 0) == 0);
        REQUIRE(csv.find('\r') == std::string::npos);
        REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 3);
    }
    SECTION("scan CSV header is stable") {
        jls::ScanResult scan =
            jls::rank_saturation_scan(test_helpers::load_fixture("lti_n2.json"), 3);
        const std::string csv = jls::scan_to_csv(scan);
        REQUIRE(csv.rfind("T,rank_C,rank_B,rank_H,rank_C_sym\n", 0) == 0);
        REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 4);
    }
    SECTION("structured outputs parse as JSON") {
        jls::JlsModel lti = test_helpers::load_fixture("lti_n2.json");
        jls::InputBasis basis = jls::standard_basis(lti.p, 2);
        jls::ObservationPair pair = jls::exact_observations(lti, basis, 2);
        nlohmann::json obs = nlohmann::json::parse(jls::observations_to_json(pair));
        REQUIRE(obs["mode"] == "exact");
        REQUIRE(obs["d"] == 4);
        REQUIRE(obs["Y_O"].size() == 4);

        jls::ModeSolution solution =
            jls::solve_pf_altmin(jls::second_moment(lti), jls::AltMinConfig{});
        nlohmann::json sol = nlohmann::json::parse(jls::mode_solution_to_json(solution));
        REQUIRE(sol["s"] == 1);
        REQUIRE(sol["spectrum"].is_array());
    }
}

TEST_CASE("command line simulate", "[cli]") {
    SECTION("pinned switch sequence with the impulse input") {
        CliResult result = run_cli("simulate --model " + quoted_fixture("example2.json") +
                                   " --switches 2,2,2,2 --impulse");
        REQUIRE(result.exit_code == 0);
        nlohmann::json doc = nlohmann::json::parse(result.output);
        REQUIRE(doc["horizon"] == 4);
        REQUIRE(doc["switches"] == nlohmann::json({2, 2, 2, 2}));
        std::vector<double> ys;
        for (const auto& y : doc["outputs"]) ys.push_back(y[0].get<double>());
        REQUIRE(ys == std::vector<double>{1.0, 0.0, 0.0, 1.0});
    }
    SECTION("random switches run for twice the horizon") {
        CliResult result = run_cli("simulate --model " + quoted_fixture("example2.json") +
                                   " --T 4 --seed 11 --impulse");
        REQUIRE(result.exit_code == 0);
        nlohmann::json doc = nlohmann::json::parse(result.output);
        REQUIRE(doc["horizon"] == 8);
        REQUIRE(doc["outputs"].size() == 8);
        for (const auto& entry : doc["switches"]) {
            REQUIRE(entry.get<int>() >= 1);
            REQUIRE(entry.get<int>() <= 2);
        }
    }
    SECTION("csv format") {
        CliResult result = run_cli("simulate --model " + quoted_fixture("example2.json") +
                                   " --switches 2,2 --impulse --format csv");
        REQUIRE(result.exit_code == 0);
        REQUIRE(result.output.rfind("k,switch,u1,y1\n", 0) == 0);
    }
    SECTION("out-of-range switch index") {
        CliResult result = run_cli("simulate --model " + quoted_fixture("example2.json") +
                                   " --switches 3,1");
        REQUIRE(result.exit_code == 3);
    }
}

TEST_CASE("command line error handling", "[cli]") {
    SECTION("missing model file") {
        CliResult result = run_cli("estimate-dim --model /nonexistent/model.json");
        REQUIRE(result.exit_code == 2);
    }
    SECTION("invalid model content") {
        const std::string path = scratch_path("cli_bad_model.json");
        jls::write_text_file(path, "{\"n\": 2}");
        CliResult result = run_cli("check --model \"" + path + "\"");
        REQUIRE(result.exit_code == 2);
    }
    SECTION("unknown flag") {
        CliResult result = run_cli("simulate --model " + quoted_fixture("example2.json") +
                                   " --frobnicate");
        REQUIRE(result.exit_code == 3);
    }
    SECTION("non-positive horizon") {
        CliResult result = run_cli("scan --model " + quoted_fixture("example2.json") + " --T 0");
        REQUIRE(result.exit_code == 3);
    }
    SECTION("missing subcommand") {
        REQUIRE(run_cli("").exit_code == 3);
    }
    SECTION("help exits cleanly") {
        REQUIRE(run_cli("--help").exit_code == 0);
    }
    SECTION("fixture directory environment fallback") {
        const std::string env = "JLS_FIXTURE_DIR=\"" + std::string(JLS_FIXTURE_DIR) + "\" ";
        CliResult result = run_cli("check --model example2.json", env);
        REQUIRE(result.exit_code == 0);
    }
}

TEST_CASE("command line estimate-dim", "[cli]") {
    SECTION("scaled permutation fixture at the default horizon") {
        CliResult result =
            run_cli("estimate-dim --model " + quoted_fixture("example2_scaled.json"));
        REQUIRE(result.exit_code == 0);
        nlohmann::json doc = nlohmann::json::parse(result.output);
        REQUIRE(doc["config"]["T"] == 11);
        REQUIRE(doc["report"]["rank"] == 6);
        REQUIRE(doc["report"]["n"] == 3);
        REQUIRE(doc["report"]["r_B"] == 3);
        REQUIRE(doc["report"]["r_C"] == 3);
    }
    SECTION("single-mode fixture at a short horizon") {
        CliResult result =
            run_cli("estimate-dim --model " + quoted_fixture("lti_n2.json") + " --T 5");
        REQUIRE(result.exit_code == 0);
        nlohmann::json doc = nlohmann::json::parse(result.output);
        REQUIRE(doc["report"]["rank"] == 3);
        REQUIRE(doc["report"]["n"] == 2);
    }
    SECTION("horizon below saturation is refused") {
        // the rank is 1 at T = 2 but jumps to 6 at T = 3, so the cross check trips
        CliResult result =
            run_cli("estimate-dim --model " + quoted_fixture("example2.json") + " --T 2");
        REQUIRE(result.exit_code == 4);
        REQUIRE(result.output.empty());
    }
}

TEST_CASE("command line estimate-modes", "[cli]") {
    SECTION("oracle factorization on the redundant-mode fixture") {
        CliResult result = run_cli("estimate-modes --model " +
                                   quoted_fixture("example3_scaled.json") + " --T 6");
        REQUIRE(result.exit_code == 0);
        nlohmann::json doc = nlohmann::json::parse(result.output);
        REQUIRE(doc["solution"]["s"] == 3);
        REQUIRE(doc["solution"]["inferred_n"] == 3);
        REQUIRE(doc["solution"]["method"] == "completion");
        REQUIRE(doc["solution"]["feasible"] == true);
        REQUIRE(doc["solution"]["gauge_ambiguous"] == false);
    }
    SECTION("blind factorization reports the gauge ambiguity") {
        CliResult result = run_cli("estimate-modes --model " +
                                   quoted_fixture("example3_scaled.json") +
                                   " --T 6 --factorization blind");
        REQUIRE(result.exit_code == 0);
        nlohmann::json doc = nlohmann::json::parse(result.output);
        REQUIRE(doc["config"]["factorization"] == "blind");
        REQUIRE(doc["solution"]["gauge_ambiguous"] == true);
    }
    SECTION("single-mode fixture counts one mode") {
        CliResult result =
            run_cli("estimate-modes --model " + quoted_fixture("lti_n2.json") + " --T 5");
        REQUIRE(result.exit_code == 0);
        nlohmann::json doc = nlohmann::json::parse(result.output);
        REQUIRE(doc["solution"]["s"] == 1);
    }
    SECTION("under-saturated horizon exits with the inference code") {
        CliResult result = run_cli("estimate-modes --model " +
                                   quoted_fixture("example3_scaled.json") + " --T 5");
        REQUIRE(result.exit_code == 4);
    }
}

TEST_CASE("command line check and scan", "[cli]") {
    SECTION("diagnostics on the permutation fixture") {
        CliResult result = run_cli("check --model " + quoted_fixture("example2.json") +
                                   " --switches 2,2");
        REQUIRE(result.exit_code == 0);
        nlohmann::json doc = nlohmann::json::parse(result.output);
        REQUIRE(doc["r_B"] == 3);
        REQUIRE(doc["r_C"] == 3);
        REQUIRE(doc["mean_square_stable"] == false);
        REQUIRE(doc["mode_span_rank"] == 2);
        REQUIRE(doc["minimal"] == true);
        REQUIRE(doc["assumption4"]["required"] == 6);
        REQUIRE(doc["assumption4"]["satisfied"] == true);
        REQUIRE(doc["worst_case_bound"].get<double>() == Approx(4.0));
    }
    SECTION("redundant modes are flagged as non-minimal") {
        CliResult result = run_cli("check --model " + quoted_fixture("example3.json"));
        REQUIRE(result.exit_code == 0);
        nlohmann::json doc = nlohmann::json::parse(result.output);
        REQUIRE(doc["mode_span_rank"] == 3);
        REQUIRE(doc["minimal"] == false);
    }
    SECTION("scan emits one CSV row per horizon") {
        CliResult result =
            run_cli("scan --model " + quoted_fixture("lti_n2.json") + " --T 5");
        REQUIRE(result.exit_code == 0);
        REQUIRE(result.output.rfind("T,rank_C,rank_B,rank_H,rank_C_sym\n", 0) == 0);
        REQUIRE(std::count(result.output.begin(), result.output.end(), '\n') == 6);
    }
    SECTION("scan JSON carries the saturation summary") {
        CliResult result = run_cli("scan --model " + quoted_fixture("lti_n2.json") +
                                   " --T 5 --format json");
        REQUIRE(result.exit_code == 0);
        nlohmann::json doc = nlohmann::json::parse(result.output);
        REQUIRE(doc["rows"].size() == 5);
        REQUIRE(doc["saturation"].contains("rank_C_sym"));
    }
}

TEST_CASE("command line reruns are byte-identical", "[cli]") {
    struct Case {
        std::string name;
        std::string args;
    };
    const std::vector<Case> cases = {
        {"sim", "simulate --model " + quoted_fixture("example2.json") + " --T 3 --seed 21 --impulse"},
        {"mc", "estimate-modes --model " + quoted_fixture("lti_n2.json") +
                   " --T 5 --mode monte-carlo --N 50 --seed 9"},
        {"scan", "scan --model " + quoted_fixture("rand_n2.json") + " --T 4"},
    };
    for (const Case& c : cases) {
        const std::string first = scratch_path(c.name + "_a.out");
        const std::string second = scratch_path(c.name + "_b.out");
        INFO(c.name);
        REQUIRE(run_cli(c.args + " --output \"" + first + "\"").exit_code == 0);
        REQUIRE(run_cli(c.args + " --output \"" + second + "\"").exit_code == 0);
        REQUIRE(read_bytes(first) == read_bytes(second));
    }
    SECTION("different seeds change the simulated trajectory") {
        const std::string args =
            "simulate --model " + quoted_fixture("example2.json") + " --T 8 --impulse --seed ";
        const std::string a = scratch_path("seed_a.out");
        const std::string b = scratch_path("seed_b.out");
        REQUIRE(run_cli(args + "1 --output \"" + a + "\"").exit_code == 0);
        REQUIRE(run_cli(args + "2 --output \"" + b + "\"").exit_code == 0);
        REQUIRE(read_bytes(a) != read_bytes(b));
    }
}
