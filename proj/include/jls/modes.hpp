#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "jls/realization.hpp"

namespace jls {

// Entry permutation carrying second-moment operators to Gram form:
// sum_i p_i A_i (x) A_i  ->  sum_i p_i vec(A_i) vec(A_i)^T.
struct SwapPermutation {
    int n = 0;
    int side = 0;  // n^2

    explicit SwapPermutation(int side_) : side(side_) {
        if (side_ < 1) throw std::invalid_argument("SwapPermutation: side must be >= 1");
        n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(side_))));
        if (n * n != side_)
            throw std::invalid_argument("SwapPermutation: side " + std::to_string(side_) +
                                        " is not a perfect square");
    }

    // Destination of entry (row, col), both 0-based.
    std::pair<int, int> image(int row, int col) const {
        const int r1 = row / n, r2 = row % n;
        const int c1 = col / n, c2 = col % n;
        return {c1 * n + r1, c2 * n + r2};
    }
};

inline Matrix swap_transform(const Matrix& M) {
    if (M.rows() != M.cols()) throw std::invalid_argument("swap_transform: matrix must be square");
    const SwapPermutation perm(static_cast<int>(M.rows()));
    const int n = perm.n;
    Matrix out(M.rows(), M.cols());
    for (int r1 = 0; r1 < n; ++r1)
        for (int r2 = 0; r2 < n; ++r2)
            for (int c1 = 0; c1 < n; ++c1)
                for (int c2 = 0; c2 < n; ++c2)
                    out(c1 * n + r1, c2 * n + r2) = M(r1 * n + r2, c1 * n + c2);
    return out;
}

inline Matrix swap_inverse(const Matrix& M) {
    if (M.rows() != M.cols()) throw std::invalid_argument("swap_inverse: matrix must be square");
    const SwapPermutation perm(static_cast<int>(M.rows()));
    const int n = perm.n;
    Matrix out(M.rows(), M.cols());
    for (int r1 = 0; r1 < n; ++r1)
        for (int r2 = 0; r2 < n; ++r2)
            for (int c1 = 0; c1 < n; ++c1)
                for (int c2 = 0; c2 < n; ++c2)
                    out(r1 * n + r2, c1 * n + c2) = M(c1 * n + r1, c2 * n + r2);
    return out;
}

struct ConjugatedMoment {
    Matrix S_hat;
    RankReport rank_U;
    RankReport rank_W;
    bool full_rank = false;
    std::string warning;
};

// S_hat = pinv(U) * Y_plus * pinv(W). Similar to the true second moment
// when the factors are exact and full rank; rank deficiency is flagged, not
// swallowed.
inline ConjugatedMoment recover_conjugated_moment(const Matrix& Y_plus, const Matrix& U,
                                                  const Matrix& W,
                                                  double tol = default_rank_tol) {
    if (U.rows() != Y_plus.rows() || W.cols() != Y_plus.cols())
        throw std::invalid_argument("recover_conjugated_moment: factor shapes do not match data");
    ConjugatedMoment out;
    out.rank_U = numerical_rank(U, tol);
    out.rank_W = numerical_rank(W, tol);
    out.S_hat = pinv(U, tol) * Y_plus * pinv(W, tol);
    out.full_rank =
        out.rank_U.rank == static_cast<int>(U.cols()) && out.rank_W.rank == static_cast<int>(W.rows());
    if (!out.full_rank)
        out.warning = "factor rank deficient (U " + std::to_string(out.rank_U.rank) + "/" +
                      std::to_string(U.cols()) + ", W " + std::to_string(out.rank_W.rank) + "/" +
                      std::to_string(W.rows()) + "); conjugation is a projection, not a similarity";
    return out;
}

inline constexpr double default_eig_tol = 1e-6;

struct ExactModeCount {
    int s = 0;
    std::vector<double> eigenvalues;  // of the symmetrized swap image, descending magnitude
    double spectral_gap = std::numeric_limits<double>::infinity();
    double asymmetry = 0.0;  // relative asymmetry of the swap image
    std::string warning;
};

// Mode count when the conjugating gauge is the identity: the swap image of
// the second moment is then a PSD Gram matrix whose rank is the minimal
// number of modes.
inline ExactModeCount mode_count_exact(const Matrix& S_hat, double eig_tol = default_eig_tol) {
    ExactModeCount out;
    const Matrix L = swap_transform(S_hat);
    const double scale = std::max(L.cwiseAbs().maxCoeff(), 1e-300);
    out.asymmetry = (L - L.transpose()).cwiseAbs().maxCoeff() / scale;
    if (out.asymmetry > 1e-6)
        out.warning = "swap image asymmetric (relative deviation " + std::to_string(out.asymmetry) +
                      "); gauge is not identity, count unreliable";
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Matrix(0.5 * (L + L.transpose())));
    std::vector<double> lambda(eig.eigenvalues().data(),
                               eig.eigenvalues().data() + eig.eigenvalues().size());
    std::sort(lambda.begin(), lambda.end(),
              [](double a, double b) { return std::abs(a) > std::abs(b); });
    out.eigenvalues = lambda;
    const double top = lambda.empty() ? 0.0 : std::abs(lambda.front());
    int s = 0;
    for (double v : lambda)
        if (std::abs(v) > eig_tol * top) ++s;
    out.s = s;
    if (s > 0 && s < static_cast<int>(lambda.size()) && std::abs(lambda[s]) > 0.0)
        out.spectral_gap = std::abs(lambda[s - 1]) / std::abs(lambda[s]);
    return out;
}

struct AltMinConfig {
    double b = 0.0;  // trace normalization, 0 selects n^2
    int max_iter = 200;
    double tol = 1e-10;  // relative objective improvement stop
    std::uint64_t seed = 0;
    int starts = 8;
    double eig_tol = default_eig_tol;
};

struct ModeSolution {
    Matrix P;  // n^2 x n^2, symmetric PSD
    Matrix Z;  // n^2 x n^2, trace(Z) = b
    double residual = std::numeric_limits<double>::infinity();
    int s = 0;
    int inferred_n = 0;
    std::vector<double> spectrum;  // eigenvalues of P, descending
    double spectral_gap = std::numeric_limits<double>::infinity();
    std::vector<double> objective_trace;  // objective after each full iteration, winning start
    bool converged = false;
    int best_start = -1;
    int iterations = 0;
    double b = 0.0;
    bool gauge_ambiguous = false;
    bool factor_full_rank = true;
    std::vector<double> completion_curve;  // relative residual per candidate rank
    int suggested_s = 0;
    bool feasible = false;
    std::string method;
    std::string warning;
};

namespace detail {

inline double gaussian(std::mt19937_64& engine) {
    const double u1 = std::max(uniform01(engine), 1e-300);
    const double u2 = uniform01(engine);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238462643383279 * u2);
}

inline double altmin_objective(const Matrix& Y_plus, const Matrix& Z, const Matrix& X) {
    return (Y_plus * Z - Z * X).squaredNorm();
}

// Least squares over Z with trace(Z) = b, solved through the stationarity
// system of the quadratic; singular normal matrices fall back to the
// minimum-norm solution.
inline Matrix altmin_z_step(const Matrix& Y_plus, const Matrix& X, double b) {
    const int d = static_cast<int>(Y_plus.rows());
    const Matrix eye = Matrix::Identity(d, d);
    const Matrix M = kron(eye, Y_plus) - kron(X.transpose(), eye);
    const Matrix G = M.transpose() * M;
    const int d2 = d * d;
    Matrix kkt = Matrix::Zero(d2 + 1, d2 + 1);
    kkt.topLeftCorner(d2, d2) = 2.0 * G;
    kkt.block(0, d2, d2, 1) = vec(eye);
    kkt.block(d2, 0, 1, d2) = vec(eye).transpose();
    Vector rhs = Vector::Zero(d2 + 1);
    rhs(d2) = b;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(kkt);
    const Vector sol = cod.solve(rhs);
    return unvec(Vector(sol.head(d2)), d, d);
}

struct PStepResult {
    Matrix X;
    double objective;
};

// Feasible P update: unconstrained least squares, swap, symmetrize, PSD
// projection, then keep-best against the incumbent plus a short projected
// gradient descent. Never increases the objective.
inline PStepResult altmin_p_step(const Matrix& Y_plus, const Matrix& Z, const Matrix* X_prev) {
    const Matrix target = Y_plus * Z;
    Matrix X_cand = swap_inverse(psd_project(swap_transform(Matrix(pinv(Z) * target))));
    double f_cand = altmin_objective(Y_plus, Z, X_cand);
    if (X_prev != nullptr) {
        const double f_prev = altmin_objective(Y_plus, Z, *X_prev);
        if (f_prev < f_cand) {
            X_cand = *X_prev;
            f_cand = f_prev;
        }
    }
    const double sigma = Z.squaredNorm() > 0 ? Z.operatorNorm() : 0.0;
    double step = 1.0 / (2.0 * sigma * sigma + 1e-12);
    Matrix P = swap_transform(X_cand);
    for (int it = 0; it < 40; ++it) {
        const Matrix grad_X = -2.0 * Z.transpose() * (target - Z * X_cand);
        const Matrix P_next = psd_project(Matrix(P - step * swap_transform(grad_X)));
        const Matrix X_next = swap_inverse(P_next);
        const double f_next = altmin_objective(Y_plus, Z, X_next);
        if (f_next < f_cand) {
            X_cand = X_next;
            P = P_next;
            f_cand = f_next;
        } else {
            step *= 0.5;
            if (step * (2.0 * sigma * sigma + 1e-12) < 1e-6) break;
        }
    }
    return {X_cand, f_cand};
}

inline void fill_spectrum(const Matrix& P, double eig_tol, int& s, std::vector<double>& spectrum,
                          double& gap) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(P);
    spectrum.assign(eig.eigenvalues().data(), eig.eigenvalues().data() + eig.eigenvalues().size());
    std::sort(spectrum.begin(), spectrum.end(), std::greater<double>());
    const double top = spectrum.empty() ? 0.0 : std::max(spectrum.front(), 0.0);
    s = 0;
    for (double v : spectrum)
        if (v > eig_tol * top && v > 0.0) ++s;
    gap = std::numeric_limits<double>::infinity();
    if (s > 0 && s < static_cast<int>(spectrum.size()) && spectrum[s] > 0.0)
        gap = spectrum[s - 1] / spectrum[s];
}

}  // namespace detail

// Alternating minimization for the rank-revealing PSD program: minimize
// ||Y_plus Z - Z L_inv(P)||_F^2 over PSD P and trace-normalized Z. Start 0
// is the identity gauge, start 1 the symmetric projector, the rest random.
// Each half step is monotone, so the recorded objective never increases.
inline ModeSolution solve_pf_altmin(const Matrix& Y_plus, const AltMinConfig& config = {}) {
    if (Y_plus.rows() != Y_plus.cols())
        throw std::invalid_argument("solve_pf_altmin: Y_plus must be square");
    const int d = static_cast<int>(Y_plus.rows());
    const SwapPermutation perm(d);  // validates the perfect-square side
    const int n = perm.n;
    const double b = config.b > 0.0 ? config.b : static_cast<double>(d);
    if (config.starts < 1) throw std::invalid_argument("solve_pf_altmin: starts must be >= 1");
    if (config.max_iter < 1) throw std::invalid_argument("solve_pf_altmin: max_iter must be >= 1");

    ModeSolution best;
    best.inferred_n = n;
    best.b = b;
    best.method = "altmin";

    for (int start = 0; start < config.starts; ++start) {
        Matrix Z;
        if (start == 0) {
            Z = (b / static_cast<double>(d)) * Matrix::Identity(d, d);
        } else if (start == 1) {
            const Matrix proj = symmetric_projector(n);
            Z = (b / proj.trace()) * proj;
        } else {
            std::mt19937_64 engine(substream_seed(config.seed, static_cast<std::uint64_t>(start), 0));
            Matrix G(d, d);
            for (int c = 0; c < d; ++c)
                for (int r = 0; r < d; ++r) G(r, c) = detail::gaussian(engine);
            G += ((b - G.trace()) / static_cast<double>(d)) * Matrix::Identity(d, d);
            Z = G;
        }

        std::vector<double> trace_log;
        Matrix X;
        bool have_X = false;
        bool converged = false;
        double objective = std::numeric_limits<double>::infinity();
        int iterations = 0;
        for (int iter = 1; iter <= config.max_iter; ++iter) {
            const detail::PStepResult p_step =
                detail::altmin_p_step(Y_plus, Z, have_X ? &X : nullptr);
            X = p_step.X;
            have_X = true;
            const Matrix Z_next = detail::altmin_z_step(Y_plus, X, b);
            if (detail::altmin_objective(Y_plus, Z_next, X) <= p_step.objective) Z = Z_next;
            const double f = detail::altmin_objective(Y_plus, Z, X);
            trace_log.push_back(f);
            iterations = iter;
            const double prev = objective;
            objective = f;
            if (f < 1e-24 || (std::isfinite(prev) && prev - f <= config.tol * std::max(prev, 1e-30))) {
                converged = true;
                break;
            }
        }

        const double residual = std::sqrt(objective);
        if (residual < best.residual) {
            best.P = psd_project(swap_transform(X));
            best.Z = Z;
            best.residual = residual;
            best.objective_trace = trace_log;
            best.converged = converged;
            best.best_start = start;
            best.iterations = iterations;
        }
    }

    detail::fill_spectrum(best.P, config.eig_tol, best.s, best.spectrum, best.spectral_gap);
    return best;
}

struct CompletionConfig {
    int max_rank = 0;  // 0 selects n^2
    int inner_iters = 300;
    double feas_tol = 1e-6;
    double eig_tol = default_eig_tol;
};

struct CompletionResult {
    int n = 0;
    std::vector<double> residual_curve;  // index k-1 holds the rank-k residual
    int s = 0;
    bool feasible = false;
    int suggested_s = 0;  // largest drop in the curve when nothing is feasible
    Matrix P;
    Matrix X;
    std::vector<double> spectrum;
    double spectral_gap = std::numeric_limits<double>::infinity();
};

// The data pin the second moment on the symmetric subspace only; the
// antisymmetric block is a free completion. For each candidate rank k,
// alternate a rank-k PSD truncation of the swap image with a least-squares
// refit of the free block, and accept the smallest k whose truncation error
// vanishes. On exact data this recovers the minimal mode count.
inline CompletionResult complete_mode_count(const Matrix& S_sym, int n,
                                            const CompletionConfig& config = {}) {
    const int r = n * (n + 1) / 2;
    if (S_sym.rows() != r || S_sym.cols() != r)
        throw std::invalid_argument("complete_mode_count: S_sym must be n(n+1)/2 square");
    CompletionResult out;
    out.n = n;
    const Matrix Q = symmetric_basis(n);
    const Matrix Qa = antisymmetric_basis(n);
    const int a = static_cast<int>(Qa.cols());
    const Matrix X_pinned = Q * S_sym * Q.transpose();
    const double scale = std::max(swap_transform(X_pinned).norm(), 1e-300);
    const int max_rank = config.max_rank > 0 ? config.max_rank : n * n;

    std::vector<Matrix> P_by_rank, X_by_rank;
    std::vector<std::vector<double>> spectrum_by_rank;
    for (int k = 1; k <= max_rank; ++k) {
        Matrix Xa = Matrix::Zero(a, a);
        Matrix P_full, P_k;
        std::vector<double> lambda;
        for (int it = 0; it < config.inner_iters; ++it) {
            const Matrix X = X_pinned + Qa * Xa * Qa.transpose();
            P_full = swap_transform(X);
            P_full = 0.5 * (P_full + P_full.transpose());
            Eigen::SelfAdjointEigenSolver<Matrix> eig(P_full);
            lambda.assign(eig.eigenvalues().data(),
                          eig.eigenvalues().data() + eig.eigenvalues().size());
            Vector clipped = eig.eigenvalues();
            std::vector<std::pair<double, int>> order;
            for (int i = 0; i < clipped.size(); ++i) order.push_back({clipped(i), i});
            std::sort(order.begin(), order.end(), std::greater<>());
            Vector kept = Vector::Zero(clipped.size());
            for (int i = 0; i < k && i < static_cast<int>(order.size()); ++i)
                if (order[i].first > 0.0) kept(order[i].second) = order[i].first;
            P_k = eig.eigenvectors() * kept.asDiagonal() * eig.eigenvectors().transpose();
            const Matrix Xa_next = Qa.transpose() * swap_inverse(P_k) * Qa;
            const double delta = (Xa_next - Xa).norm();
            Xa = Xa_next;
            if (delta < 1e-14 * std::max(1.0, Xa.norm())) break;
        }
        const Matrix X_final = X_pinned + Qa * Xa * Qa.transpose();
        P_full = swap_transform(X_final);
        P_full = 0.5 * (P_full + P_full.transpose());
        out.residual_curve.push_back((P_full - P_k).norm() / scale);
        P_by_rank.push_back(P_k);
        X_by_rank.push_back(X_final);
        std::sort(lambda.begin(), lambda.end(), std::greater<double>());
        spectrum_by_rank.push_back(lambda);
        if (!out.feasible && out.residual_curve.back() < config.feas_tol) {
            out.feasible = true;
            out.s = k;
        }
    }

    int suggested = 1;
    double best_ratio = -1.0;
    for (int k = 2; k <= max_rank; ++k) {
        const double ratio =
            out.residual_curve[k - 2] / std::max(out.residual_curve[k - 1], 1e-300);
        if (ratio > best_ratio) {
            best_ratio = ratio;
            suggested = k;
        }
    }
    out.suggested_s = out.feasible ? out.s : suggested;

    const int chosen = (out.feasible ? out.s : out.suggested_s) - 1;
    out.P = P_by_rank[chosen];
    out.X = X_by_rank[chosen];
    out.spectrum = spectrum_by_rank[chosen];
    const int kk = chosen + 1;
    if (kk < static_cast<int>(out.spectrum.size()) && out.spectrum[kk] > 0.0)
        out.spectral_gap = out.spectrum[kk - 1] / out.spectrum[kk];
    return out;
}

enum class FactorizationPath { oracle, blind };

inline FactorizationPath factorization_from_string(const std::string& name) {
    if (name == "oracle") return FactorizationPath::oracle;
    if (name == "blind") return FactorizationPath::blind;
    throw std::invalid_argument("unknown factorization path: " + name);
}

struct ModeEstimationConfig {
    FactorizationPath factorization = FactorizationPath::oracle;
    double rank_tol = default_rank_tol;
    int known_n = 0;  // 0 infers the dimension from the data
    CompletionConfig completion;
    AltMinConfig solver;
    bool run_altmin_fallback = true;
};

// Full pipeline: infer n from Y_O, factor, recover the compressed second
// moment, count modes by rank completion; when no completion is feasible
// (noisy or gauge-ambiguous data), fall back to the alternating solver and
// report rather than assert.
inline ModeSolution estimate_modes(const ObservationPair& bundle,
                                   const ModeEstimationConfig& config = {},
                                   const JlsModel* model = nullptr) {
    ModeSolution solution;
    int n = config.known_n;
    if (n > 0) {
        solution.warning = "state dimension supplied by caller; ";
    } else {
        n = infer_state_dim(bundle.Y_O, config.rank_tol).n;
    }
    solution.inferred_n = n;
    const int r = n * (n + 1) / 2;
    const Matrix Q = symmetric_basis(n);

    Matrix U_sym, W_sym;
    if (config.factorization == FactorizationPath::oracle) {
        if (model == nullptr)
            throw std::invalid_argument("estimate_modes: oracle factorization needs the model");
        if (model->n != n)
            throw std::invalid_argument("estimate_modes: inferred n " + std::to_string(n) +
                                        " disagrees with the model (" + std::to_string(model->n) +
                                        ")");
        if (bundle.embedded_inputs.size() == 0)
            throw std::invalid_argument("estimate_modes: bundle lacks embedded inputs");
        U_sym = expected_obs_kron(*model, bundle.T) * Q;
        W_sym = Q.transpose() * (expected_ctrl_kron(*model, bundle.T) * bundle.embedded_inputs);
    } else {
        Eigen::BDCSVD<Matrix> svd(bundle.Y_O, Eigen::ComputeThinU | Eigen::ComputeThinV);
        U_sym = svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal();
        W_sym = svd.matrixV().leftCols(r).transpose();
        solution.gauge_ambiguous = true;
    }

    const ConjugatedMoment peel =
        recover_conjugated_moment(bundle.Y_O_plus, U_sym, W_sym, config.rank_tol);
    solution.factor_full_rank = peel.full_rank;
    if (!peel.warning.empty()) solution.warning += peel.warning;

    const CompletionResult completion = complete_mode_count(peel.S_hat, n, config.completion);
    solution.completion_curve = completion.residual_curve;
    solution.suggested_s = completion.suggested_s;
    solution.feasible = completion.feasible;

    if (completion.feasible) {
        solution.method = "completion";
        solution.s = completion.s;
        solution.P = completion.P;
        solution.spectrum = completion.spectrum;
        solution.spectral_gap = completion.spectral_gap;
        const double b = config.solver.b > 0.0 ? config.solver.b : static_cast<double>(n * n);
        solution.b = b;
        const Matrix proj = symmetric_projector(n);
        solution.Z = (b / proj.trace()) * proj;
        const Matrix Y_emb = Q * peel.S_hat * Q.transpose();
        solution.residual = (Y_emb * solution.Z - solution.Z * completion.X).norm();
        solution.converged = true;
        solution.objective_trace = {solution.residual * solution.residual};
        solution.iterations = 1;
        return solution;
    }

    if (!config.run_altmin_fallback) {
        solution.method = "completion";
        solution.s = completion.suggested_s;
        solution.P = completion.P;
        solution.spectrum = completion.spectrum;
        solution.spectral_gap = completion.spectral_gap;
        solution.gauge_ambiguous = true;
        solution.warning += "; no feasible completion rank, reporting the largest residual drop";
        return solution;
    }

    const Matrix Y_emb = Q * peel.S_hat * Q.transpose();
    ModeSolution alt = solve_pf_altmin(Y_emb, config.solver);
    alt.inferred_n = n;
    alt.completion_curve = completion.residual_curve;
    alt.suggested_s = completion.suggested_s;
    alt.feasible = false;
    alt.gauge_ambiguous = true;
    alt.factor_full_rank = peel.full_rank;
    alt.warning = solution.warning +
                  "; no feasible completion rank, alternating solver result is heuristic";
    return alt;
}

}  // namespace jls
