#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace jls {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double default_rank_tol = 1e-9;

inline Matrix kron(const Matrix& a, const Matrix& b) {
    return Eigen::kroneckerProduct(a, b).eval();
}

inline Vector kron_vec(const Vector& a, const Vector& b) {
    return Eigen::kroneckerProduct(a, b).eval();
}

// Column-stacking vectorization: entry (r, c) lands at c*rows + r.
inline Vector vec(const Matrix& a) {
    return Eigen::Map<const Vector>(a.data(), a.size());
}

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
    if (v.size() != rows * cols)
        throw std::invalid_argument("unvec: size mismatch");
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

struct RankReport {
    int rank = 0;
    std::vector<double> singular_values;  // descending
    double tolerance = default_rank_tol;  // relative tolerance used
    double threshold = 0.0;               // absolute cutoff applied
};

// rank = #{sigma_i > tol * sigma_max * max(rows, cols)}
inline RankReport numerical_rank(const Matrix& m, double tol = default_rank_tol) {
    RankReport report;
    report.tolerance = tol;
    if (m.size() == 0) return report;
    Eigen::BDCSVD<Matrix> svd(m);
    const Vector& sv = svd.singularValues();
    report.singular_values.assign(sv.data(), sv.data() + sv.size());
    const double sigma_max = sv.size() > 0 ? sv(0) : 0.0;
    report.threshold = tol * sigma_max * static_cast<double>(std::max(m.rows(), m.cols()));
    for (double s : report.singular_values)
        if (s > report.threshold) ++report.rank;
    return report;
}

inline Matrix pinv(const Matrix& m, double tol = default_rank_tol) {
    if (m.size() == 0) return Matrix(m.cols(), m.rows());
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double threshold =
        tol * (sv.size() > 0 ? sv(0) : 0.0) * static_cast<double>(std::max(m.rows(), m.cols()));
    Vector inv_sv = Vector::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > threshold) inv_sv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

inline double spectral_radius(const Matrix& m) {
    if (m.rows() != m.cols())
        throw std::invalid_argument("spectral_radius: matrix must be square");
    if (m.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Nearest PSD matrix in Frobenius norm; input is symmetrized first.
inline Matrix psd_project(const Matrix& m) {
    if (m.rows() != m.cols())
        throw std::invalid_argument("psd_project: matrix must be square");
    Matrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    Vector clipped = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
}

// Orthonormal basis of vec'd symmetric n x n matrices, n^2 x n(n+1)/2.
inline Matrix symmetric_basis(int n) {
    if (n < 1) throw std::invalid_argument("symmetric_basis: n must be positive");
    const int q = n * (n + 1) / 2;
    Matrix basis = Matrix::Zero(n * n, q);
    int col = 0;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < n; ++i) {
        basis(i * n + i, col++) = 1.0;
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            basis(j * n + i, col) = inv_sqrt2;
            basis(i * n + j, col) = inv_sqrt2;
            ++col;
        }
    return basis;
}

// Orthonormal basis of vec'd antisymmetric n x n matrices, n^2 x n(n-1)/2.
inline Matrix antisymmetric_basis(int n) {
    if (n < 1) throw std::invalid_argument("antisymmetric_basis: n must be positive");
    const int q = n * (n - 1) / 2;
    Matrix basis = Matrix::Zero(n * n, q);
    int col = 0;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            basis(j * n + i, col) = inv_sqrt2;
            basis(i * n + j, col) = -inv_sqrt2;
            ++col;
        }
    return basis;
}

// K vec(A) = vec(A') for all n x n A.
inline Matrix commutation_matrix(int n) {
    Matrix k = Matrix::Zero(n * n, n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            k(j * n + i, i * n + j) = 1.0;
    return k;
}

// Projector onto the symmetric subspace of R^{n^2}.
inline Matrix symmetric_projector(int n) {
    return 0.5 * (Matrix::Identity(n * n, n * n) + commutation_matrix(n));
}

}  // namespace jls
