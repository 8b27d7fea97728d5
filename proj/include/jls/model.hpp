#pragma once

#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "jls/matrix_ops.hpp"

namespace jls {

// Jump linear system x_{k+1} = A[theta(k)] x_k + B u_k, y_k = C x_k with
// theta(k) i.i.d., P(theta = i) = probs[i]. Mode indices are 0-based in
// memory; file formats and CLI output use 1-based indices.
struct JlsModel {
    int n = 0;  // state dimension
    int m = 0;  // output dimension
    int p = 0;  // input dimension
    int s = 0;  // mode count
    std::vector<Matrix> modes;
    Matrix B;
    Matrix C;
    std::vector<double> probs;
};

// One realization of the switching process; entries are 0-based mode ids.
struct SwitchSequence {
    std::vector<int> entries;

    int length() const { return static_cast<int>(entries.size()); }

    static SwitchSequence from_one_based(const std::vector<int>& one_based) {
        SwitchSequence seq;
        seq.entries.reserve(one_based.size());
        for (int e : one_based) seq.entries.push_back(e - 1);
        return seq;
    }

    std::vector<int> to_one_based() const {
        std::vector<int> out;
        out.reserve(entries.size());
        for (int e : entries) out.push_back(e + 1);
        return out;
    }
};

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> violations;
};

inline ValidationReport validate_model(const JlsModel& model) {
    ValidationReport report;
    auto fail = [&](const std::string& msg) {
        report.ok = false;
        report.violations.push_back(msg);
    };

    if (model.n < 1) fail("state dimension n must be >= 1");
    if (model.m < 1) fail("output dimension m must be >= 1");
    if (model.p < 1) fail("input dimension p must be >= 1");
    if (model.s < 1) fail("mode count s must be >= 1");
    if (static_cast<int>(model.modes.size()) != model.s)
        fail("expected s = " + std::to_string(model.s) + " mode matrices, got " +
             std::to_string(model.modes.size()));
    for (size_t i = 0; i < model.modes.size(); ++i) {
        if (model.modes[i].rows() != model.n || model.modes[i].cols() != model.n) {
            std::ostringstream oss;
            oss << "mode " << (i + 1) << " is " << model.modes[i].rows() << "x"
                << model.modes[i].cols() << ", expected " << model.n << "x" << model.n;
            fail(oss.str());
        }
    }
    if (model.B.rows() != model.n || model.B.cols() != model.p) {
        std::ostringstream oss;
        oss << "B is " << model.B.rows() << "x" << model.B.cols() << ", expected " << model.n
            << "x" << model.p;
        fail(oss.str());
    }
    if (model.C.rows() != model.m || model.C.cols() != model.n) {
        std::ostringstream oss;
        oss << "C is " << model.C.rows() << "x" << model.C.cols() << ", expected " << model.m
            << "x" << model.n;
        fail(oss.str());
    }
    if (static_cast<int>(model.probs.size()) != model.s) {
        fail("expected s = " + std::to_string(model.s) + " probabilities, got " +
             std::to_string(model.probs.size()));
    } else {
        double sum = 0.0;
        bool positive = true;
        for (double q : model.probs) {
            if (!(q > 0.0)) positive = false;
            sum += q;
        }
        if (!positive) fail("probabilities must be strictly positive");
        if (std::abs(sum - 1.0) > 1e-12) {
            std::ostringstream oss;
            oss << "probabilities sum to " << sum << ", expected 1 within 1e-12";
            fail(oss.str());
        }
    }
    return report;
}

inline void require_valid(const JlsModel& model) {
    ValidationReport report = validate_model(model);
    if (report.ok) return;
    std::string msg = "invalid model:";
    for (const std::string& v : report.violations) msg += " " + v + ";";
    throw std::invalid_argument(msg);
}

inline Matrix mean_matrix(const JlsModel& model) {
    require_valid(model);
    Matrix m = Matrix::Zero(model.n, model.n);
    for (int i = 0; i < model.s; ++i) m += model.probs[i] * model.modes[i];
    return m;
}

inline Matrix second_moment(const JlsModel& model) {
    require_valid(model);
    Matrix s = Matrix::Zero(model.n * model.n, model.n * model.n);
    for (int i = 0; i < model.s; ++i) s += model.probs[i] * kron(model.modes[i], model.modes[i]);
    return s;
}

struct StabilityReport {
    double spectral_radius = 0.0;  // rho of the second-moment operator
    bool stable = false;
    double tolerance = 1e-9;
};

// Mean-square stability: rho(sum_i p_i A_i (x) A_i) < 1 - tol.
inline StabilityReport mean_square_stable(const JlsModel& model, double tol = 1e-9) {
    StabilityReport report;
    report.tolerance = tol;
    report.spectral_radius = spectral_radius(second_moment(model));
    report.stable = report.spectral_radius < 1.0 - tol;
    return report;
}

struct ModeSpanReport {
    int rank = 0;      // rank of [vec(A_1) ... vec(A_s)]
    bool minimal = true;  // rank == s
    RankReport detail;
};

inline ModeSpanReport minimality_check(const JlsModel& model, double tol = default_rank_tol) {
    require_valid(model);
    Matrix stack(model.n * model.n, model.s);
    for (int i = 0; i < model.s; ++i) stack.col(i) = vec(model.modes[i]);
    ModeSpanReport report;
    report.detail = numerical_rank(stack, tol);
    report.rank = report.detail.rank;
    report.minimal = report.rank == model.s;
    return report;
}

// Product of 1/p_{sigma_j} over the sequence: the number of ensemble copies
// needed per realization of that exact switch sequence, in the worst case.
inline double worst_case_sample_bound(const JlsModel& model, const SwitchSequence& seq) {
    require_valid(model);
    double bound = 1.0;
    for (int e : seq.entries) {
        if (e < 0 || e >= model.s)
            throw std::out_of_range("worst_case_sample_bound: switch index out of range");
        if (model.probs[e] == 0.0) return std::numeric_limits<double>::infinity();
        bound /= model.probs[e];
    }
    return bound;
}

}  // namespace jls
