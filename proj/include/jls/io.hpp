#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "jls/modes.hpp"

namespace jls {

// All numeric output uses 17 significant digits so files round-trip doubles
// exactly and reruns are byte-identical.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "\"nan\"";
    if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return buffer;
}

inline std::string json_escape(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += "\"";
    return out;
}

inline std::string json_matrix(const Matrix& M) {
    std::string out = "[";
    for (int r = 0; r < M.rows(); ++r) {
        if (r) out += ",";
        out += "[";
        for (int c = 0; c < M.cols(); ++c) {
            if (c) out += ",";
            out += format_double(M(r, c));
        }
        out += "]";
    }
    out += "]";
    return out;
}

inline std::string json_doubles(const std::vector<double>& v) {
    std::string out = "[";
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v[i]);
    }
    out += "]";
    return out;
}

inline std::string json_vec(const Vector& v) {
    std::string out = "[";
    for (int i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v(i));
    }
    out += "]";
    return out;
}

inline std::string json_ints(const std::vector<int>& v) {
    std::string out = "[";
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    out += "]";
    return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << content;
    if (!out) throw std::runtime_error("failed writing output file: " + path);
}

namespace detail {

inline Matrix matrix_from_json(const nlohmann::json& j, int rows, int cols,
                               const std::string& what) {
    if (!j.is_array() || static_cast<int>(j.size()) != rows)
        throw std::runtime_error("model field " + what + " must be a " + std::to_string(rows) +
                                 "x" + std::to_string(cols) + " array");
    Matrix M(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const auto& row = j.at(r);
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            throw std::runtime_error("model field " + what + " row " + std::to_string(r) +
                                     " must have " + std::to_string(cols) + " entries");
        for (int c = 0; c < cols; ++c) {
            const auto& cell = row.at(c);
            if (!cell.is_number())
                throw std::runtime_error("model field " + what + " has a non-numeric entry");
            const double v = cell.get<double>();
            if (!std::isfinite(v))
                throw std::runtime_error("model field " + what + " has a non-finite entry");
            M(r, c) = v;
        }
    }
    return M;
}

inline int int_field(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key) || !j.at(key).is_number_integer())
        throw std::runtime_error("model file missing integer field \"" + key + "\"");
    return j.at(key).get<int>();
}

}  // namespace detail

inline JlsModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("model file " + path + " is not valid JSON: " + e.what());
    }
    JlsModel model;
    model.n = detail::int_field(j, "n");
    model.m = detail::int_field(j, "m");
    model.p = detail::int_field(j, "p");
    model.s = detail::int_field(j, "s");
    if (model.n < 1 || model.m < 1 || model.p < 1 || model.s < 1)
        throw std::runtime_error("model dimensions must be positive");
    if (!j.contains("modes") || !j.at("modes").is_array() ||
        static_cast<int>(j.at("modes").size()) != model.s)
        throw std::runtime_error("model field \"modes\" must list s matrices");
    for (int l = 0; l < model.s; ++l)
        model.modes.push_back(detail::matrix_from_json(j.at("modes").at(l), model.n, model.n,
                                                       "modes[" + std::to_string(l) + "]"));
    model.B = detail::matrix_from_json(j.at("B"), model.n, model.p, "B");
    model.C = detail::matrix_from_json(j.at("C"), model.m, model.n, "C");
    if (!j.contains("probs") || !j.at("probs").is_array() ||
        static_cast<int>(j.at("probs").size()) != model.s)
        throw std::runtime_error("model field \"probs\" must list s probabilities");
    for (int l = 0; l < model.s; ++l) {
        const double v = j.at("probs").at(l).get<double>();
        if (!std::isfinite(v)) throw std::runtime_error("model probabilities must be finite");
        model.probs.push_back(v);
    }
    require_valid(model);
    return model;
}

inline std::string model_to_json(const JlsModel& model) {
    std::string out = "{";
    out += "\"n\":" + std::to_string(model.n);
    out += ",\"m\":" + std::to_string(model.m);
    out += ",\"p\":" + std::to_string(model.p);
    out += ",\"s\":" + std::to_string(model.s);
    out += ",\"modes\":[";
    for (int l = 0; l < model.s; ++l) {
        if (l) out += ",";
        out += json_matrix(model.modes[l]);
    }
    out += "],\"B\":" + json_matrix(model.B);
    out += ",\"C\":" + json_matrix(model.C);
    out += ",\"probs\":" + json_doubles(model.probs);
    out += "}";
    return out;
}

inline void save_model(const JlsModel& model, const std::string& path) {
    write_text_file(path, model_to_json(model) + "\n");
}

// Trajectory files carry 1-based mode indices; rows are time steps.
inline std::string trajectory_to_json(const Trajectory& traj) {
    std::string out = "{";
    out += "\"horizon\":" + std::to_string(traj.switches.length());
    out += ",\"switches\":" + json_ints(traj.switches.to_one_based());
    out += ",\"inputs\":[";
    for (size_t i = 0; i < traj.inputs.size(); ++i) {
        if (i) out += ",";
        out += json_vec(traj.inputs[i]);
    }
    out += "],\"outputs\":[";
    for (size_t i = 0; i < traj.outputs.size(); ++i) {
        if (i) out += ",";
        out += json_vec(traj.outputs[i]);
    }
    out += "],\"states\":[";
    for (size_t i = 0; i < traj.states.size(); ++i) {
        if (i) out += ",";
        out += json_vec(traj.states[i]);
    }
    out += "]}";
    return out;
}

inline std::string trajectory_to_csv(const Trajectory& traj) {
    const int K = traj.switches.length();
    const int p = traj.inputs.empty() ? 0 : static_cast<int>(traj.inputs[0].size());
    const int m = traj.outputs.empty() ? 0 : static_cast<int>(traj.outputs[0].size());
    std::string out = "k,switch";
    for (int i = 1; i <= p; ++i) out += ",u" + std::to_string(i);
    for (int i = 1; i <= m; ++i) out += ",y" + std::to_string(i);
    out += "\n";
    for (int k = 1; k <= K; ++k) {
        out += std::to_string(k) + "," + std::to_string(traj.switches.entries[k - 1] + 1);
        for (int i = 0; i < p; ++i) {
            const double v =
                static_cast<size_t>(k - 1) < traj.inputs.size() ? traj.inputs[k - 1](i) : 0.0;
            std::string cell = format_double(v);
            out += "," + cell;
        }
        for (int i = 0; i < m; ++i) out += "," + format_double(traj.outputs[k - 1](i));
        out += "\n";
    }
    return out;
}

inline std::string observations_to_json(const ObservationPair& bundle) {
    std::string out = "{";
    out += "\"mode\":" + json_escape(bundle.mode);
    out += ",\"T\":" + std::to_string(bundle.T);
    out += ",\"N\":" + std::to_string(bundle.N);
    out += ",\"d\":" + std::to_string(bundle.d);
    out += ",\"seed\":" + std::to_string(bundle.seed);
    out += ",\"stability_warning\":" + std::string(bundle.stability_warning ? "true" : "false");
    out += ",\"Y_O\":" + json_matrix(bundle.Y_O);
    out += ",\"Y_O_plus\":" + json_matrix(bundle.Y_O_plus);
    out += "}";
    return out;
}

inline std::string realization_report_to_json(const RealizationReport& report) {
    std::string out = "{";
    out += "\"rank\":" + std::to_string(report.rank);
    out += ",\"n\":" + std::to_string(report.n);
    out += ",\"tolerance\":" + format_double(report.tolerance);
    out += ",\"T\":" + std::to_string(report.saturation_T);
    out += ",\"r_B\":" + std::to_string(report.r_B);
    out += ",\"r_C\":" + std::to_string(report.r_C);
    out += ",\"singular_values\":" + json_doubles(report.singular_values);
    out += "}";
    return out;
}

inline std::string scan_to_csv(const ScanResult& result) {
    std::string out = "T,rank_C,rank_B,rank_H,rank_C_sym\n";
    for (const ScanRow& row : result.rows) {
        out += std::to_string(row.T) + "," + std::to_string(row.rank_C) + "," +
               std::to_string(row.rank_B) + "," + std::to_string(row.rank_H) + "," +
               std::to_string(row.rank_C_sym) + "\n";
    }
    return out;
}

inline std::string scan_to_json(const ScanResult& result) {
    std::string out = "{\"rows\":[";
    for (size_t i = 0; i < result.rows.size(); ++i) {
        const ScanRow& row = result.rows[i];
        if (i) out += ",";
        out += "{\"T\":" + std::to_string(row.T);
        out += ",\"rank_C\":" + std::to_string(row.rank_C);
        out += ",\"rank_B\":" + std::to_string(row.rank_B);
        out += ",\"rank_H\":" + std::to_string(row.rank_H);
        out += ",\"rank_C_sym\":" + std::to_string(row.rank_C_sym) + "}";
    }
    out += "],\"saturation\":{";
    out += "\"rank_C\":" + std::to_string(result.saturation_T_C);
    out += ",\"rank_B\":" + std::to_string(result.saturation_T_B);
    out += ",\"rank_H\":" + std::to_string(result.saturation_T_H);
    out += ",\"rank_C_sym\":" + std::to_string(result.saturation_T_C_sym);
    out += "}}";
    return out;
}

inline std::string mode_solution_to_json(const ModeSolution& solution) {
    std::string out = "{";
    out += "\"s\":" + std::to_string(solution.s);
    out += ",\"inferred_n\":" + std::to_string(solution.inferred_n);
    out += ",\"method\":" + json_escape(solution.method);
    out += ",\"residual\":" + format_double(solution.residual);
    out += ",\"converged\":" + std::string(solution.converged ? "true" : "false");
    out += ",\"feasible\":" + std::string(solution.feasible ? "true" : "false");
    out += ",\"gauge_ambiguous\":" + std::string(solution.gauge_ambiguous ? "true" : "false");
    out += ",\"factor_full_rank\":" + std::string(solution.factor_full_rank ? "true" : "false");
    out += ",\"suggested_s\":" + std::to_string(solution.suggested_s);
    out += ",\"best_start\":" + std::to_string(solution.best_start);
    out += ",\"iterations\":" + std::to_string(solution.iterations);
    out += ",\"b\":" + format_double(solution.b);
    out += ",\"spectral_gap\":" + format_double(solution.spectral_gap);
    out += ",\"spectrum\":" + json_doubles(solution.spectrum);
    out += ",\"completion_curve\":" + json_doubles(solution.completion_curve);
    out += ",\"objective_trace\":" + json_doubles(solution.objective_trace);
    out += ",\"warning\":" + json_escape(solution.warning);
    out += ",\"P\":" + json_matrix(solution.P);
    out += ",\"Z\":" + json_matrix(solution.Z);
    out += "}";
    return out;
}

}  // namespace jls
