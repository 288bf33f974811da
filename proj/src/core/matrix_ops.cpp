#include "core/matrix_ops.hpp"

#include <Eigen/Cholesky>

#include "core/errors.hpp"

namespace cpkit {

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw InvalidArgument("khatri_rao: column counts differ");
    }
    const Eigen::Index rows_a = a.rows();
    const Eigen::Index rows_b = b.rows();
    Matrix out(rows_a * rows_b, a.cols());
    for (Eigen::Index i = 0; i < rows_a; ++i) {
        out.middleRows(i * rows_b, rows_b) =
            b.array().rowwise() * a.row(i).array();
    }
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw InvalidArgument("hadamard: shape mismatch");
    }
    return a.cwiseProduct(b);
}

Matrix gram(const Matrix& a) {
    Matrix g = a.transpose() * a;
    g = 0.5 * (g + Matrix(g.transpose()));
    return g;
}

namespace {

// Cholesky of S + shift*I with a single jitter retry. The Gram-structured
// systems solved here are positive semidefinite and can be numerically
// singular at rank-deficient iterates.
Eigen::LLT<Matrix> factor_shifted(const Matrix& s, double lambda) {
    const Eigen::Index n = s.rows();
    Matrix shifted = s;
    shifted.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() == Eigen::Success) {
        return llt;
    }
    const double jitter = 1e-12 * s.trace() / static_cast<double>(n);
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() != Eigen::Success) {
        throw SingularSystem("spd_solve: factorization failed after jitter retry");
    }
    return llt;
}

}  // namespace

Matrix spd_solve(const Matrix& s, const Matrix& b, double lambda) {
    if (s.rows() != s.cols()) {
        throw InvalidArgument("spd_solve: S must be square");
    }
    if (b.cols() != s.rows()) {
        throw InvalidArgument("spd_solve: B column count must match S");
    }
    auto llt = factor_shifted(s, lambda);
    // Y (S + lambda I) = B  <=>  (S + lambda I) Y^T = B^T.
    Matrix yt = llt.solve(Matrix(b.transpose()));
    return yt.transpose();
}

Matrix spd_inverse(const Matrix& s, double lambda) {
    if (s.rows() != s.cols()) {
        throw InvalidArgument("spd_inverse: S must be square");
    }
    auto llt = factor_shifted(s, lambda);
    Matrix inv = llt.solve(Matrix::Identity(s.rows(), s.cols()));
    inv = 0.5 * (inv + Matrix(inv.transpose()));
    return inv;
}

}  // namespace cpkit
