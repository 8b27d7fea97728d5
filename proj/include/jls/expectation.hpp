#pragma once

#include <cstdint>
#include <string>

#include "jls/simulate.hpp"

namespace jls {

// Closed-form expectation operators over the switching ensemble.
//
// Stacking conventions (shared with hankel_for_copy and the excitation
// module): the output stack is (y_T, ..., y_{2T-1}) in time order; the input
// stack is most-recent-first, so block column i of a per-copy map carries
// i switch factors. Block (j, k) of the Kronecker-square operators is
// interleaved the way kron(stack, stack) interleaves it: row (j*m+a)*m*T +
// (k*m+b), column (j*p+u)*p*T + (k*p+w).
struct ExpectationOperators {
    Matrix M;    // sum_i p_i A_i
    Matrix S;    // sum_i p_i A_i (x) A_i
    int T = 0;
    Matrix C_T;  // m^2 T^2 x n^2
    Matrix B_T;  // n^2 x p^2 T^2
    Matrix H_T;  // C_T * B_T
};

namespace detail {

inline std::vector<Matrix> matrix_powers(const Matrix& base, int count) {
    std::vector<Matrix> powers;
    powers.reserve(count);
    Matrix acc = Matrix::Identity(base.rows(), base.cols());
    for (int i = 0; i < count; ++i) {
        powers.push_back(acc);
        acc = base * acc;
    }
    return powers;
}

}  // namespace detail

// E[C_mu (x) C_mu]: block (j,k) = (C M^{j-k} (x) C) S^k for j >= k and
// (C (x) C M^{k-j}) S^j for k > j, prefix lengths 0..T-1.
inline Matrix expected_obs_kron(const JlsModel& model, int T) {
    require_valid(model);
    if (T < 1) throw std::invalid_argument("expected_obs_kron: T must be >= 1");
    const int n = model.n, m = model.m;
    const Matrix M = mean_matrix(model);
    const Matrix S = second_moment(model);
    const std::vector<Matrix> Mp = detail::matrix_powers(M, T);
    const std::vector<Matrix> Sp = detail::matrix_powers(S, T);
    Matrix out = Matrix::Zero(m * m * T * T, n * n);
    for (int j = 0; j < T; ++j)
        for (int k = 0; k < T; ++k) {
            Matrix block = j >= k ? Matrix(kron(model.C * Mp[j - k], model.C) * Sp[k])
                                  : Matrix(kron(model.C, model.C * Mp[k - j]) * Sp[j]);
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b)
                    out.row((j * m + a) * m * T + k * m + b) = block.row(a * m + b);
        }
    return out;
}

// E[B_sigma (x) B_sigma]: block (j,k) = S^j (I (x) M^{k-j}) (B (x) B) for
// k >= j and S^k (M^{j-k} (x) I) (B (x) B) for j > k. The per-copy B_sigma
// grows by appending older switches on the right (simulator semantics), so
// blocks share their newest factors and the S power multiplies on the left.
inline Matrix expected_ctrl_kron(const JlsModel& model, int T) {
    require_valid(model);
    if (T < 1) throw std::invalid_argument("expected_ctrl_kron: T must be >= 1");
    const int n = model.n, p = model.p;
    const Matrix M = mean_matrix(model);
    const Matrix S = second_moment(model);
    const std::vector<Matrix> Mp = detail::matrix_powers(M, T);
    const std::vector<Matrix> Sp = detail::matrix_powers(S, T);
    const Matrix BB = kron(model.B, model.B);
    const Matrix eye = Matrix::Identity(n, n);
    Matrix out = Matrix::Zero(n * n, p * p * T * T);
    for (int j = 0; j < T; ++j)
        for (int k = 0; k < T; ++k) {
            Matrix block = k >= j ? Matrix(Sp[j] * kron(eye, Mp[k - j]) * BB)
                                  : Matrix(Sp[k] * kron(Mp[j - k], eye) * BB);
            for (int u = 0; u < p; ++u)
                for (int w = 0; w < p; ++w)
                    out.col((j * p + u) * p * T + k * p + w) = block.col(u * p + w);
        }
    return out;
}

inline Matrix expected_hankel_kron(const JlsModel& model, int T) {
    return expected_obs_kron(model, T) * expected_ctrl_kron(model, T);
}

inline ExpectationOperators expectation_operators(const JlsModel& model, int T) {
    ExpectationOperators ops;
    ops.M = mean_matrix(model);
    ops.S = second_moment(model);
    ops.T = T;
    ops.C_T = expected_obs_kron(model, T);
    ops.B_T = expected_ctrl_kron(model, T);
    ops.H_T = ops.C_T * ops.B_T;
    return ops;
}

// Per-copy observability stack: T blocks C * A_{mu_r} ... A_{mu_1}, prefix
// lengths 0..T-1 (entries past T-1 are ignored).
inline Matrix obs_stack_for_copy(const JlsModel& model, const SwitchSequence& mu, int T) {
    require_valid(model);
    if (T < 1) throw std::invalid_argument("obs_stack_for_copy: T must be >= 1");
    if (mu.length() < T - 1)
        throw std::invalid_argument("obs_stack_for_copy: sequence shorter than T-1");
    Matrix stack(model.m * T, model.n);
    Matrix prefix = Matrix::Identity(model.n, model.n);
    stack.topRows(model.m) = model.C;
    for (int r = 1; r < T; ++r) {
        const int mode = mu.entries[r - 1];
        if (mode < 0 || mode >= model.s)
            throw std::out_of_range("obs_stack_for_copy: switch index out of range");
        prefix = model.modes[mode] * prefix;
        stack.middleRows(r * model.m, model.m) = model.C * prefix;
    }
    return stack;
}

// Per-copy controllability stack against the most-recent-first input stack:
// T block columns A_{sigma_1} ... A_{sigma_i} * B, sigma_1 the newest switch.
inline Matrix ctrl_stack_for_copy(const JlsModel& model, const SwitchSequence& sigma, int T) {
    require_valid(model);
    if (T < 1) throw std::invalid_argument("ctrl_stack_for_copy: T must be >= 1");
    if (sigma.length() < T - 1)
        throw std::invalid_argument("ctrl_stack_for_copy: sequence shorter than T-1");
    Matrix stack(model.n, model.p * T);
    Matrix prefix = Matrix::Identity(model.n, model.n);
    stack.leftCols(model.p) = model.B;
    for (int i = 1; i < T; ++i) {
        const int mode = sigma.entries[i - 1];
        if (mode < 0 || mode >= model.s)
            throw std::out_of_range("ctrl_stack_for_copy: switch index out of range");
        prefix = prefix * model.modes[mode];
        stack.middleCols(i * model.p, model.p) = prefix * model.B;
    }
    return stack;
}

// The mT x pT map from the most-recent-first input stack to (y_T..y_{2T-1})
// for one switch realization: block (r, i) = C P_mu(r) Q_sigma(i) B.
inline Matrix hankel_for_copy(const JlsModel& model, const SwitchSequence& mu,
                              const SwitchSequence& sigma, int T) {
    return obs_stack_for_copy(model, mu, T) * ctrl_stack_for_copy(model, sigma, T);
}

enum class ExpectationTarget { obs, ctrl, hankel };

inline ExpectationTarget expectation_target_from_string(const std::string& name) {
    if (name == "obs") return ExpectationTarget::obs;
    if (name == "ctrl") return ExpectationTarget::ctrl;
    if (name == "hankel") return ExpectationTarget::hankel;
    throw std::invalid_argument("unknown expectation target: " + name);
}

namespace detail {

// Iterates all sequences in [0,s)^L in lexicographic order.
template <typename Fn>
void for_each_sequence(int s, int L, Fn&& fn) {
    SwitchSequence seq;
    seq.entries.assign(L, 0);
    while (true) {
        fn(const_cast<const SwitchSequence&>(seq));
        int pos = L - 1;
        while (pos >= 0 && seq.entries[pos] == s - 1) {
            seq.entries[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
        ++seq.entries[pos];
    }
}

inline double sequence_weight(const JlsModel& model, const SwitchSequence& seq) {
    double w = 1.0;
    for (int e : seq.entries) w *= model.probs[e];
    return w;
}

}  // namespace detail

// Probability-weighted enumeration over all switch sequences; the
// independent oracle for the closed forms above.
inline Matrix brute_force_expectation(const JlsModel& model, int T, ExpectationTarget target,
                                      double enumeration_cap = 1e6) {
    require_valid(model);
    if (T < 1) throw std::invalid_argument("brute_force_expectation: T must be >= 1");
    const int L = T - 1;
    const double per_side = std::pow(static_cast<double>(model.s), L);
    const double terms = target == ExpectationTarget::hankel ? per_side * per_side : per_side;
    if (terms > enumeration_cap)
        throw std::runtime_error("brute_force_expectation: enumeration cap exceeded (" +
                                 std::to_string(terms) + " > " +
                                 std::to_string(enumeration_cap) + " weighted terms)");

    const int m = model.m, n = model.n, p = model.p;
    switch (target) {
        case ExpectationTarget::obs: {
            Matrix acc = Matrix::Zero(m * m * T * T, n * n);
            detail::for_each_sequence(model.s, L, [&](const SwitchSequence& mu) {
                const Matrix stack = obs_stack_for_copy(model, mu, T);
                acc += detail::sequence_weight(model, mu) * kron(stack, stack);
            });
            return acc;
        }
        case ExpectationTarget::ctrl: {
            Matrix acc = Matrix::Zero(n * n, p * p * T * T);
            detail::for_each_sequence(model.s, L, [&](const SwitchSequence& sigma) {
                const Matrix stack = ctrl_stack_for_copy(model, sigma, T);
                acc += detail::sequence_weight(model, sigma) * kron(stack, stack);
            });
            return acc;
        }
        case ExpectationTarget::hankel: {
            Matrix acc = Matrix::Zero(m * m * T * T, p * p * T * T);
            detail::for_each_sequence(model.s, L, [&](const SwitchSequence& mu) {
                const Matrix obs = obs_stack_for_copy(model, mu, T);
                const double wm = detail::sequence_weight(model, mu);
                detail::for_each_sequence(model.s, L, [&](const SwitchSequence& sigma) {
                    const Matrix hank = obs * ctrl_stack_for_copy(model, sigma, T);
                    acc += wm * detail::sequence_weight(model, sigma) * kron(hank, hank);
                });
            });
            return acc;
        }
    }
    throw std::logic_error("brute_force_expectation: unreachable");
}

}  // namespace jls
