#include <cstdlib>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "jls/io.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_model_error = 2;
constexpr int exit_config_error = 3;
constexpr int exit_inference_error = 4;

// A bare model name resolves against the directory in JLS_FIXTURE_DIR when
// the path itself does not exist.
std::string resolve_model_path(const std::string& path) {
    std::ifstream probe(path);
    if (probe.good()) return path;
    const char* dir = std::getenv("JLS_FIXTURE_DIR");
    if (dir != nullptr && *dir != '\0') {
        const std::string candidate = std::string(dir) + "/" + path;
        std::ifstream probe2(candidate);
        if (probe2.good()) return candidate;
    }
    return path;
}

jls::JlsModel load_model_or_exit(const std::string& path) {
    try {
        return jls::load_model(resolve_model_path(path));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::exit(exit_model_error);
    }
}

void emit(const std::string& output, const std::string& content) {
    if (output.empty() || output == "-") {
        std::cout << content;
        return;
    }
    jls::write_text_file(output, content);
}

std::vector<int> parse_switch_list(const std::string& text) {
    std::vector<int> entries;
    std::string token;
    std::stringstream stream(text);
    while (std::getline(stream, token, ',')) {
        if (token.empty()) throw std::invalid_argument("empty entry in --switches list");
        size_t used = 0;
        const int value = std::stoi(token, &used);
        if (used != token.size())
            throw std::invalid_argument("bad entry in --switches list: " + token);
        entries.push_back(value);
    }
    if (entries.empty()) throw std::invalid_argument("--switches list is empty");
    return entries;
}

int default_horizon(const jls::JlsModel& model) { return model.n * model.n + model.n - 1; }

struct Options {
    std::string model_path;
    int T = 0;  // 0 selects the per-command default
    int N = 10000;
    std::uint64_t seed = 0;
    double tol = jls::default_rank_tol;
    std::string mode = "exact";
    std::string factorization = "oracle";
    std::string output = "-";
    std::string format;
    std::string switches;
    bool impulse = false;
    double b = 0.0;
    int max_iter = 200;
    int starts = 8;
};

jls::ObservationPair make_bundle(const jls::JlsModel& model, const Options& opt, int T) {
    const jls::InputBasis basis = jls::standard_basis(model.p, T);
    if (opt.mode == "exact") return jls::exact_observations(model, basis, T);
    return jls::collect_observations(model, basis, T, opt.N, opt.seed);
}

std::string config_echo(const Options& opt, int T) {
    std::string out = "{";
    out += "\"model\":" + jls::json_escape(opt.model_path);
    out += ",\"T\":" + std::to_string(T);
    out += ",\"N\":" + std::to_string(opt.N);
    out += ",\"seed\":" + std::to_string(opt.seed);
    out += ",\"tol\":" + jls::format_double(opt.tol);
    out += ",\"mode\":" + jls::json_escape(opt.mode);
    out += ",\"factorization\":" + jls::json_escape(opt.factorization);
    out += ",\"b\":" + jls::format_double(opt.b);
    out += ",\"max_iter\":" + std::to_string(opt.max_iter);
    out += ",\"starts\":" + std::to_string(opt.starts);
    out += "}";
    return out;
}

int cmd_simulate(const Options& opt) {
    const jls::JlsModel model = load_model_or_exit(opt.model_path);
    jls::SwitchSequence switches;
    if (!opt.switches.empty()) {
        switches = jls::SwitchSequence::from_one_based(parse_switch_list(opt.switches));
        for (int e : switches.entries)
            if (e < 0 || e >= model.s) {
                std::cerr << "error: switch index out of range in --switches\n";
                return exit_config_error;
            }
    } else {
        const int T = opt.T > 0 ? opt.T : 4;
        std::mt19937_64 engine(jls::substream_seed(opt.seed, 0, 0));
        switches = jls::draw_switches(model, 2 * T, engine);
    }
    std::vector<jls::Vector> inputs;
    if (opt.impulse) {
        jls::Vector e1 = jls::Vector::Zero(model.p);
        e1(0) = 1.0;
        inputs.push_back(e1);
    }
    const jls::Trajectory traj = jls::simulate_with_switches(model, switches, inputs);
    const std::string format = opt.format.empty() ? "json" : opt.format;
    emit(opt.output, format == "csv" ? jls::trajectory_to_csv(traj)
                                     : jls::trajectory_to_json(traj) + "\n");
    return exit_ok;
}

int cmd_estimate_dim(const Options& opt) {
    const jls::JlsModel model = load_model_or_exit(opt.model_path);
    const int T = opt.T > 0 ? opt.T : default_horizon(model);
    const jls::ObservationPair bundle = make_bundle(model, opt, T);
    const jls::ObservationPair next = make_bundle(model, opt, T + 1);
    const int rank_here = jls::numerical_rank(bundle.Y_O, opt.tol).rank;
    const int rank_next = jls::numerical_rank(next.Y_O, opt.tol).rank;
    if (rank_next != rank_here) {
        std::cerr << "error: rank of the observation matrix is still changing (" << rank_here
                  << " at T=" << T << ", " << rank_next << " at T=" << T + 1
                  << "); horizon below saturation\n";
        return exit_inference_error;
    }
    jls::RealizationReport report;
    try {
        report = jls::infer_state_dim(bundle.Y_O, opt.tol);
    } catch (const jls::triangular_rank_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_inference_error;
    }
    report.saturation_T = T;
    report.r_B = jls::controllability_rank(model);
    report.r_C = jls::observability_rank(model);
    emit(opt.output, "{\"config\":" + config_echo(opt, T) +
                         ",\"report\":" + jls::realization_report_to_json(report) + "}\n");
    return exit_ok;
}

int cmd_estimate_modes(const Options& opt) {
    const jls::JlsModel model = load_model_or_exit(opt.model_path);
    const int T = opt.T > 0 ? opt.T : default_horizon(model);
    const jls::ObservationPair bundle = make_bundle(model, opt, T);
    jls::ModeEstimationConfig config;
    config.factorization = jls::factorization_from_string(opt.factorization);
    config.rank_tol = opt.tol;
    config.solver.b = opt.b;
    config.solver.max_iter = opt.max_iter;
    config.solver.starts = opt.starts;
    config.solver.seed = opt.seed;
    jls::ModeSolution solution;
    try {
        solution = jls::estimate_modes(bundle, config, &model);
    } catch (const jls::triangular_rank_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_inference_error;
    }
    emit(opt.output, "{\"config\":" + config_echo(opt, T) +
                         ",\"solution\":" + jls::mode_solution_to_json(solution) + "}\n");
    return exit_ok;
}

int cmd_check(const Options& opt) {
    const jls::JlsModel model = load_model_or_exit(opt.model_path);
    const int T = opt.T > 0 ? opt.T : default_horizon(model);
    const jls::StabilityReport stability = jls::mean_square_stable(model);
    const jls::ModeSpanReport span = jls::minimality_check(model);
    const jls::Assumption4Diagnostic diag = jls::assumption4_diagnostic(model, T, opt.tol);
    std::string out = "{";
    out += "\"r_B\":" + std::to_string(jls::controllability_rank(model));
    out += ",\"r_C\":" + std::to_string(jls::observability_rank(model));
    out += ",\"spectral_radius\":" + jls::format_double(stability.spectral_radius);
    out += ",\"mean_square_stable\":" + std::string(stability.stable ? "true" : "false");
    out += ",\"mode_span_rank\":" + std::to_string(span.rank);
    out += ",\"minimal\":" + std::string(span.minimal ? "true" : "false");
    out += ",\"assumption4\":{\"T\":" + std::to_string(diag.T);
    out += ",\"required\":" + std::to_string(diag.required);
    out += ",\"rank_obs_sym\":" + std::to_string(diag.rank_obs_sym);
    out += ",\"rank_ctrl_sym\":" + std::to_string(diag.rank_ctrl_sym);
    out += ",\"satisfied\":" + std::string(diag.satisfied ? "true" : "false") + "}";
    if (!opt.switches.empty()) {
        const auto seq = jls::SwitchSequence::from_one_based(parse_switch_list(opt.switches));
        out += ",\"worst_case_bound\":" +
               jls::format_double(jls::worst_case_sample_bound(model, seq));
    }
    out += "}";
    emit(opt.output, out + "\n");
    return exit_ok;
}

int cmd_scan(const Options& opt) {
    const jls::JlsModel model = load_model_or_exit(opt.model_path);
    const int T_max = opt.T > 0 ? opt.T : model.n * model.n + model.n + 2;
    const jls::ScanResult result = jls::rank_saturation_scan(model, T_max, opt.tol);
    const std::string format = opt.format.empty() ? "csv" : opt.format;
    emit(opt.output,
         format == "json" ? jls::scan_to_json(result) + "\n" : jls::scan_to_csv(result));
    return exit_ok;
}

void add_common_flags(CLI::App* cmd, Options& opt, bool solver_flags) {
    cmd->add_option("--model", opt.model_path, "model JSON file")->required();
    cmd->add_option("--T", opt.T, "horizon length")->check(CLI::PositiveNumber);
    cmd->add_option("--N", opt.N, "Monte Carlo copies per input")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", opt.seed, "random seed");
    cmd->add_option("--tol", opt.tol, "rank tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--mode", opt.mode, "observation mode")
        ->check(CLI::IsMember({"exact", "monte-carlo"}));
    cmd->add_option("--output", opt.output, "output file, - for stdout");
    cmd->add_option("--format", opt.format, "output format")
        ->check(CLI::IsMember({"json", "csv"}));
    if (solver_flags) {
        cmd->add_option("--factorization", opt.factorization, "factorization path")
            ->check(CLI::IsMember({"oracle", "blind"}));
        cmd->add_option("--b", opt.b, "trace normalization")->check(CLI::PositiveNumber);
        cmd->add_option("--max-iter", opt.max_iter, "solver iteration cap")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--starts", opt.starts, "solver multi-start count")
            ->check(CLI::PositiveNumber);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"jump linear system realization toolkit"};
    app.require_subcommand(1);

    Options opt;
    std::function<int()> action;

    CLI::App* sim = app.add_subcommand("simulate", "simulate one switch realization");
    add_common_flags(sim, opt, false);
    sim->add_option("--switches", opt.switches, "comma-separated 1-based switch sequence");
    sim->add_flag("--impulse", opt.impulse, "apply a unit impulse at time 0");
    sim->callback([&] { action = [&] { return cmd_simulate(opt); }; });

    CLI::App* dim = app.add_subcommand("estimate-dim", "infer the minimal state dimension");
    add_common_flags(dim, opt, false);
    dim->callback([&] { action = [&] { return cmd_estimate_dim(opt); }; });

    CLI::App* modes = app.add_subcommand("estimate-modes", "estimate the minimal mode count");
    add_common_flags(modes, opt, true);
    modes->callback([&] { action = [&] { return cmd_estimate_modes(opt); }; });

    CLI::App* check = app.add_subcommand("check", "model diagnostics");
    add_common_flags(check, opt, false);
    check->add_option("--switches", opt.switches,
                      "switch sequence for the worst-case sample bound");
    check->callback([&] { action = [&] { return cmd_check(opt); }; });

    CLI::App* scan = app.add_subcommand("scan", "rank saturation scan over horizons");
    add_common_flags(scan, opt, false);
    scan->callback([&] { action = [&] { return cmd_scan(opt); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n";
        return exit_config_error;
    }

    try {
        return action();
    } catch (const jls::triangular_rank_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_inference_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_config_error;
    }
}
