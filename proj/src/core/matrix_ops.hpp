#pragma once

#include <Eigen/Dense>

namespace cpkit {

// All dense matrices are row-major doubles so flat storage, file formats and
// tensor layouts share one linearization rule (last index fastest).
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Column-wise Kronecker product: for A (I x K) and B (J x K), returns the
// (I*J) x K matrix whose k-th column is kron(a_k, b_k).
Matrix khatri_rao(const Matrix& a, const Matrix& b);

// Elementwise product; shapes must match.
Matrix hadamard(const Matrix& a, const Matrix& b);

// A^T A, symmetrized exactly.
Matrix gram(const Matrix& a);

// Solves Y (S + lambda I) = B for Y, with S symmetric and S + lambda I
// positive definite. Uses a Cholesky factorization with one jitter retry;
// throws SingularSystem if the retry also fails.
Matrix spd_solve(const Matrix& s, const Matrix& b, double lambda);

// (S + lambda I)^{-1}, symmetrized exactly.
Matrix spd_inverse(const Matrix& s, double lambda);

}  // namespace cpkit
