#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "jls/expectation.hpp"

namespace jls {

// Deterministic excitation design. Columns are stacked inputs
// (u_0; ...; u_{T-1}) in time order, one experiment per column; the first
// pT columns are the base vectors, the rest the polarization pairs.
struct InputBasis {
    int p = 0;
    int T = 0;
    Matrix columns;  // pT x d
    int base_dimension() const { return p * T; }
    int dimension() const { return static_cast<int>(columns.cols()); }
};

// Unit vectors followed by pairwise sums and differences e_i +- e_j over
// i < j, d = (pT)^2 columns in total. The Kronecker squares of these
// columns span the symmetric subspace, dimension pT(pT+1)/2.
inline InputBasis standard_basis(int p, int T) {
    if (p < 1 || T < 1) throw std::invalid_argument("standard_basis: p and T must be >= 1");
    const int q = p * T;
    InputBasis basis;
    basis.p = p;
    basis.T = T;
    basis.columns = Matrix::Zero(q, q * q);
    int col = 0;
    for (int i = 0; i < q; ++i) basis.columns(i, col++) = 1.0;
    for (int i = 0; i < q; ++i)
        for (int j = i + 1; j < q; ++j) {
            basis.columns(i, col) = 1.0;
            basis.columns(j, col) = 1.0;
            ++col;
            basis.columns(i, col) = 1.0;
            basis.columns(j, col) = -1.0;
            ++col;
        }
    // q unit vectors plus q(q-1) signed pairs fill all q^2 columns.
    return basis;
}

// Unstacks a pT-vector into the experiment inputs u_0..u_{T-1} (consecutive
// p-blocks, oldest first); the simulator supplies the zero padding beyond T.
inline std::vector<Vector> embed_input(const Vector& stacked, int p) {
    if (p < 1 || stacked.size() % p != 0)
        throw std::invalid_argument("embed_input: length not a multiple of p");
    const int T = static_cast<int>(stacked.size()) / p;
    std::vector<Vector> inputs(T);
    for (int t = 0; t < T; ++t) inputs[t] = stacked.segment(t * p, p);
    return inputs;
}

// Reverses the p-blocks of a stacked input, oldest-first to newest-first.
inline Vector reverse_blocks(const Vector& stacked, int p) {
    if (p < 1 || stacked.size() % p != 0)
        throw std::invalid_argument("reverse_blocks: length not a multiple of p");
    const int T = static_cast<int>(stacked.size()) / p;
    Vector out(stacked.size());
    for (int t = 0; t < T; ++t) out.segment(t * p, p) = stacked.segment((T - 1 - t) * p, p);
    return out;
}

// The expectation operators act on Kronecker squares of newest-first
// stacks, so a time-ordered experiment embeds as rev (x) rev.
inline Vector embedded_kron_square(const Vector& stacked, int p) {
    const Vector rev = reverse_blocks(stacked, p);
    return kron_vec(rev, rev);
}

struct ObservationPair {
    Matrix Y_O;             // m^2 T^2 x d, columns E[Yhat (x) Yhat]
    Matrix Y_O_plus;        // m^2 T^2 x d, columns E[Yhat+ (x) Yhat+]
    Matrix embedded_inputs; // p^2 T^2 x d, Kronecker squares of the reversed inputs
    int T = 0;
    int N = 0;  // copies per column, 0 in exact mode
    int d = 0;
    std::uint64_t seed = 0;
    std::string mode;  // "exact" or "monte-carlo"
    bool stability_warning = false;
};

inline Matrix embed_basis(const InputBasis& basis) {
    const int q = basis.p * basis.T;
    Matrix embedded(q * q, basis.dimension());
    for (int j = 0; j < basis.dimension(); ++j)
        embedded.col(j) = embedded_kron_square(basis.columns.col(j), basis.p);
    return embedded;
}

// One exact observation matrix with an operator inserted between the
// stacks; identity gives Y_O and the second moment gives Y_O_plus.
inline Matrix exact_observation_matrix(const JlsModel& model, const InputBasis& basis, int T,
                                       const Matrix& middle) {
    const Matrix C_T = expected_obs_kron(model, T);
    const Matrix B_T = expected_ctrl_kron(model, T);
    if (middle.rows() != C_T.cols() || middle.cols() != B_T.rows())
        throw std::invalid_argument("exact_observation_matrix: middle operator has wrong shape");
    return C_T * middle * B_T * embed_basis(basis);
}

inline ObservationPair exact_observations(const JlsModel& model, const InputBasis& basis, int T) {
    require_valid(model);
    if (basis.p != model.p || basis.T != T)
        throw std::invalid_argument("exact_observations: basis does not match model and T");
    ObservationPair pair;
    pair.T = T;
    pair.N = 0;
    pair.d = basis.dimension();
    pair.mode = "exact";
    pair.embedded_inputs = embed_basis(basis);
    const Matrix C_T = expected_obs_kron(model, T);
    const Matrix B_W = expected_ctrl_kron(model, T) * pair.embedded_inputs;
    pair.Y_O = C_T * B_W;
    pair.Y_O_plus = C_T * second_moment(model) * B_W;
    pair.stability_warning = !mean_square_stable(model).stable;
    return pair;
}

// Sample-average estimate of the same pair. Column j averages N
// independent copies driven by basis column j; copy (j, c) draws its 2T
// switches from substream (seed, j, c), so reruns are bit-reproducible and
// columns are statistically independent.
inline ObservationPair collect_observations(const JlsModel& model, const InputBasis& basis, int T,
                                            int N, std::uint64_t seed) {
    require_valid(model);
    if (T < 1) throw std::invalid_argument("collect_observations: T must be >= 1");
    if (N < 1) throw std::invalid_argument("collect_observations: N must be >= 1");
    if (basis.p != model.p || basis.T != T)
        throw std::invalid_argument("collect_observations: basis does not match model and T");

    ObservationPair pair;
    pair.T = T;
    pair.N = N;
    pair.d = basis.dimension();
    pair.seed = seed;
    pair.mode = "monte-carlo";
    pair.embedded_inputs = embed_basis(basis);
    pair.stability_warning = !mean_square_stable(model).stable;

    const int m = model.m;
    const int rows = m * m * T * T;
    pair.Y_O = Matrix::Zero(rows, pair.d);
    pair.Y_O_plus = Matrix::Zero(rows, pair.d);

    const double inv_n = 1.0 / static_cast<double>(N);
    for (int j = 0; j < pair.d; ++j) {
        const std::vector<Vector> inputs = embed_input(basis.columns.col(j), model.p);
        for (int c = 0; c < N; ++c) {
            std::mt19937_64 engine(substream_seed(seed, static_cast<std::uint64_t>(j),
                                                  static_cast<std::uint64_t>(c)));
            const SwitchSequence switches = draw_switches(model, 2 * T, engine);
            const Trajectory traj = simulate_with_switches(model, switches, inputs);
            Vector yhat(m * T), yhat_plus(m * T);
            for (int r = 0; r < T; ++r) {
                yhat.segment(r * m, m) = traj.outputs[T - 1 + r];
                yhat_plus.segment(r * m, m) = traj.outputs[T + r];
            }
            pair.Y_O.col(j) += inv_n * kron_vec(yhat, yhat);
            pair.Y_O_plus.col(j) += inv_n * kron_vec(yhat_plus, yhat_plus);
        }
    }
    return pair;
}

}  // namespace jls
