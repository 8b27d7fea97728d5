#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "jls/excitation.hpp"

namespace jls {

inline constexpr double default_subspace_tol = 1e-10;

namespace detail {

// Orthonormal basis of the column space, deflating directions whose
// singular value falls below tol relative to the largest.
inline Matrix orthonormal_columns(const Matrix& A, double tol = default_subspace_tol) {
    if (A.cols() == 0) return Matrix(A.rows(), 0);
    Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    const double top = sv.size() > 0 ? sv(0) : 0.0;
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > tol * std::max(top, 1.0)) ++rank;
    return svd.matrixU().leftCols(rank);
}

}  // namespace detail

// Dimension of the smallest subspace containing col(B) and invariant under
// every mode: V_0 = col(B), V_{k+1} = V_k + sum_l A_l V_k, re-orthonormalized
// each step. The dimension is nondecreasing and caps at n, so the fixed
// point arrives within n steps.
inline int controllability_rank(const JlsModel& model, double tol = default_subspace_tol) {
    require_valid(model);
    Matrix basis = detail::orthonormal_columns(model.B, tol);
    for (int step = 0; step < model.n; ++step) {
        const int before = static_cast<int>(basis.cols());
        if (before == model.n) break;
        Matrix extended(model.n, before * (model.s + 1));
        extended.leftCols(before) = basis;
        for (int l = 0; l < model.s; ++l)
            extended.middleCols((l + 1) * before, before) = model.modes[l] * basis;
        basis = detail::orthonormal_columns(extended, tol);
        if (static_cast<int>(basis.cols()) == before) break;
    }
    return static_cast<int>(basis.cols());
}

// Dual fixed point on row(C) under right multiplication by the modes.
inline int observability_rank(const JlsModel& model, double tol = default_subspace_tol) {
    require_valid(model);
    JlsModel transposed = model;
    transposed.m = model.p;
    transposed.p = model.m;
    transposed.B = model.C.transpose();
    transposed.C = model.B.transpose();
    for (auto& mode : transposed.modes) mode = mode.transpose().eval();
    return controllability_rank(transposed, tol);
}

struct triangular_rank_error : std::runtime_error {
    int rank;
    int lower;  // largest triangular number <= rank
    int upper;  // smallest triangular number > rank
    triangular_rank_error(int rank_, int lower_, int upper_)
        : std::runtime_error("rank " + std::to_string(rank_) +
                             " is not a triangular number; nearest are " +
                             std::to_string(lower_) + " and " + std::to_string(upper_) +
                             " (horizon too small, sampling noise, or rank condition fails)"),
          rank(rank_),
          lower(lower_),
          upper(upper_) {}
};

// Solves r = n(n+1)/2 for integer n, rejecting non-triangular ranks with
// the two nearest triangular numbers attached.
inline int state_dim_from_rank(int rank) {
    if (rank < 1) throw triangular_rank_error(rank, 0, 1);
    int n = 1;
    while (n * (n + 1) / 2 < rank) ++n;
    if (n * (n + 1) / 2 != rank) throw triangular_rank_error(rank, n * (n - 1) / 2, n * (n + 1) / 2);
    return n;
}

struct RealizationReport {
    int rank = 0;
    int n = 0;
    double tolerance = default_rank_tol;
    std::vector<double> singular_values;
    int saturation_T = 0;  // horizon the observations were taken at
    int r_B = -1;          // -1 when the model side was not evaluated
    int r_C = -1;
};

// Minimal state dimension from an observation matrix whose rank equals
// n(n+1)/2 at saturation.
inline RealizationReport infer_state_dim(const Matrix& Y_O, double tol = default_rank_tol) {
    RealizationReport report;
    const RankReport rank = numerical_rank(Y_O, tol);
    report.rank = rank.rank;
    report.tolerance = tol;
    report.singular_values = rank.singular_values;
    report.n = state_dim_from_rank(rank.rank);
    return report;
}

struct ScanRow {
    int T = 0;
    int rank_C = 0;
    int rank_B = 0;
    int rank_H = 0;
    int rank_C_sym = 0;
};

struct ScanResult {
    std::vector<ScanRow> rows;
    // First T attaining the final value of each column, or -1 if the
    // column is still growing at T_max.
    int saturation_T_C = -1;
    int saturation_T_B = -1;
    int saturation_T_H = -1;
    int saturation_T_C_sym = -1;
};

namespace detail {

inline int first_stable_T(const std::vector<ScanRow>& rows, int ScanRow::*column) {
    if (rows.size() < 2) return -1;
    if (rows[rows.size() - 1].*column != rows[rows.size() - 2].*column) return -1;
    const int final_value = rows.back().*column;
    for (const ScanRow& row : rows)
        if (row.*column == final_value) return row.T;
    return -1;
}

}  // namespace detail

// Ranks of the exact operators for T = 1..T_max, plus the rank of C_T
// restricted to the symmetric subspace (the quantity that saturates at
// n(n+1)/2 for weakly observable models).
inline ScanResult rank_saturation_scan(const JlsModel& model, int T_max,
                                       double tol = default_rank_tol) {
    require_valid(model);
    if (T_max < 1) throw std::invalid_argument("rank_saturation_scan: T_max must be >= 1");
    ScanResult result;
    const Matrix sym = symmetric_basis(model.n);
    for (int T = 1; T <= T_max; ++T) {
        const Matrix C_T = expected_obs_kron(model, T);
        const Matrix B_T = expected_ctrl_kron(model, T);
        ScanRow row;
        row.T = T;
        row.rank_C = numerical_rank(C_T, tol).rank;
        row.rank_B = numerical_rank(B_T, tol).rank;
        row.rank_H = numerical_rank(Matrix(C_T * B_T), tol).rank;
        row.rank_C_sym = numerical_rank(Matrix(C_T * sym), tol).rank;
        result.rows.push_back(row);
    }
    result.saturation_T_C = detail::first_stable_T(result.rows, &ScanRow::rank_C);
    result.saturation_T_B = detail::first_stable_T(result.rows, &ScanRow::rank_B);
    result.saturation_T_H = detail::first_stable_T(result.rows, &ScanRow::rank_H);
    result.saturation_T_C_sym = detail::first_stable_T(result.rows, &ScanRow::rank_C_sym);
    return result;
}

struct Assumption4Diagnostic {
    int T = 0;
    int required = 0;  // n(n+1)/2
    int rank_obs_sym = 0;
    int rank_ctrl_sym = 0;
    bool satisfied = false;
};

// Necessary condition for dimension recovery at horizon T: both expectation
// operators must carry the full symmetric subspace, rank >= n(n+1)/2 each.
inline Assumption4Diagnostic assumption4_diagnostic(const JlsModel& model, int T,
                                                    double tol = default_rank_tol) {
    require_valid(model);
    Assumption4Diagnostic diag;
    diag.T = T;
    diag.required = model.n * (model.n + 1) / 2;
    const Matrix sym_state = symmetric_basis(model.n);
    const Matrix sym_input = symmetric_basis(model.p * T);
    const Matrix C_T = expected_obs_kron(model, T);
    const Matrix B_T = expected_ctrl_kron(model, T);
    diag.rank_obs_sym = numerical_rank(Matrix(C_T * sym_state), tol).rank;
    diag.rank_ctrl_sym = numerical_rank(Matrix(B_T * sym_input), tol).rank;
    diag.satisfied = diag.rank_obs_sym >= diag.required && diag.rank_ctrl_sym >= diag.required;
    return diag;
}

}  // namespace jls
