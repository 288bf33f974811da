#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <random>

#include "core/errors.hpp"
#include "core/mttkrp.hpp"
#include "core/tensor.hpp"

using namespace cpkit;

namespace {

DenseTensor random_tensor(const std::vector<std::uint64_t>& dims,
                          std::mt19937& gen) {
    std::normal_distribution<double> dist;
    DenseTensor t(dims);
    for (std::uint64_t f = 0; f < t.size(); ++f) t[f] = dist(gen);
    return t;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937& gen) {
    std::normal_distribution<double> dist;
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(gen);
    return m;
}

double rel_err(const Matrix& got, const Matrix& expected) {
    return (got - expected).norm() / expected.norm();
}

}  // namespace

TEST_CASE("matricize of a constant tensor") {
    DenseTensor t = DenseTensor::from_data({2, 2, 2}, std::vector<double>(8, 1.0));
    Matrix m = matricize(t, 0);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 4);
    CHECK(m.isApprox(Matrix::Ones(2, 4)));
}

TEST_CASE("matricize of an order-2 tensor is the matrix itself") {
    DenseTensor t = DenseTensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Matrix m = matricize(t, 0);
    REQUIRE(m.rows() == 2);
    REQUIRE(m.cols() == 3);
    for (std::uint64_t i = 0; i < 2; ++i) {
        for (std::uint64_t j = 0; j < 3; ++j) {
            CHECK(m(i, j) == t.at({i, j}));
        }
    }
}

TEST_CASE("matricize places a single nonzero by the linearization rule") {
    // Entry (0,0,0) of a 2x2x2 tensor, unfolded along the second mode, lands
    // at row 0, column 0 (the remaining indices (i1,i3) = (0,0)).
    std::vector<double> data(8, 0.0);
    data[0] = 1.0;
    DenseTensor t = DenseTensor::from_data({2, 2, 2}, data);
    Matrix m = matricize(t, 1);
    REQUIRE(m.rows() == 2);
    REQUIRE(m.cols() == 4);
    for (Eigen::Index i = 0; i < 2; ++i) {
        for (Eigen::Index j = 0; j < 4; ++j) {
            CHECK(m(i, j) == ((i == 0 && j == 0) ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("matricize mode out of range") {
    DenseTensor t({2, 2});
    CHECK_THROWS_AS(matricize(t, 2), InvalidArgument);
}

TEST_CASE("matricize round-trips through dematricize") {
    std::mt19937 gen(7);
    const std::vector<std::vector<std::uint64_t>> shapes = {
        {3}, {2, 5}, {2, 3, 4}, {3, 2, 2, 3}, {2, 2, 2, 2, 2}};
    for (const auto& dims : shapes) {
        DenseTensor t = random_tensor(dims, gen);
        for (std::size_t n = 0; n < dims.size(); ++n) {
            DenseTensor back = dematricize(matricize(t, n), dims, n);
            for (std::uint64_t f = 0; f < t.size(); ++f) {
                REQUIRE(back[f] == t[f]);  // exact: pure data movement
            }
        }
    }
}

TEST_CASE("khatri_rao with identity selects blocks") {
    Matrix a = Matrix::Identity(2, 2);
    Matrix b(2, 2);
    b << 1, 2, 3, 4;
    Matrix kr = khatri_rao(a, b);
    Matrix expected(4, 2);
    expected << 1, 0, 3, 0, 0, 2, 0, 4;
    CHECK(kr.isApprox(expected));
}

TEST_CASE("khatri_rao expands columnwise Kronecker products") {
    Matrix a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 5, 6, 7, 8;
    Matrix expected(4, 2);
    expected << 5, 12, 7, 16, 15, 24, 21, 32;
    CHECK(khatri_rao(a, b).isApprox(expected));
}

TEST_CASE("khatri_rao of all-ones matrices") {
    CHECK(khatri_rao(Matrix::Ones(2, 2), Matrix::Ones(2, 2))
              .isApprox(Matrix::Ones(4, 2)));
}

TEST_CASE("khatri_rao rejects mismatched column counts") {
    CHECK_THROWS_AS(khatri_rao(Matrix::Ones(2, 2), Matrix::Ones(2, 3)),
                    InvalidArgument);
}

TEST_CASE("khatri_rao columns are Kronecker products of columns") {
    std::mt19937 gen(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index i = 1 + static_cast<Eigen::Index>(gen() % 5);
        const Eigen::Index j = 1 + static_cast<Eigen::Index>(gen() % 5);
        const Eigen::Index k = 1 + static_cast<Eigen::Index>(gen() % 4);
        Matrix a = random_matrix(i, k, gen);
        Matrix b = random_matrix(j, k, gen);
        Matrix kr = khatri_rao(a, b);
        REQUIRE(kr.rows() == i * j);
        for (Eigen::Index col = 0; col < k; ++col) {
            for (Eigen::Index ia = 0; ia < i; ++ia) {
                for (Eigen::Index ib = 0; ib < j; ++ib) {
                    REQUIRE(kr(ia * j + ib, col) ==
                            doctest::Approx(a(ia, col) * b(ib, col)).epsilon(1e-14));
                }
            }
        }
    }
}

TEST_CASE("hadamard examples and errors") {
    Matrix a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 5, 6, 7, 8;
    Matrix expected(2, 2);
    expected << 5, 12, 21, 32;
    CHECK(hadamard(a, b).isApprox(expected));
    CHECK(hadamard(a, Matrix::Ones(2, 2)).isApprox(a));
    Matrix diag = hadamard(Matrix::Identity(2, 2), a);
    CHECK(diag.isApprox(Matrix(Eigen::Vector2d(1, 4).asDiagonal())));
    CHECK_THROWS_AS(hadamard(a, Matrix::Ones(3, 2)), InvalidArgument);
}

TEST_CASE("gram examples") {
    CHECK(gram(Matrix::Identity(3, 3)).isApprox(Matrix::Identity(3, 3)));
    CHECK(gram(Matrix::Ones(3, 2)).isApprox(3.0 * Matrix::Ones(2, 2)));
    Matrix a(2, 2);
    a << 1, 2, 3, 4;
    Matrix expected(2, 2);
    expected << 10, 14, 14, 20;
    CHECK(gram(a).isApprox(expected));
}

TEST_CASE("gram outputs factorize after a tiny shift") {
    std::mt19937 gen(3);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix a = random_matrix(4 + static_cast<Eigen::Index>(gen() % 4),
                                 2 + static_cast<Eigen::Index>(gen() % 3), gen);
        Matrix s = gram(a);
        CHECK(s.isApprox(Matrix(s.transpose())));
        const double eps = 1e-12 * s.operatorNorm();
        // PSD up to roundoff: the shifted matrix must admit a Cholesky solve.
        CHECK_NOTHROW(spd_solve(s, Matrix::Identity(s.rows(), s.cols()), eps));
    }
}

TEST_CASE("mttkrp on all-ones data") {
    DenseTensor t = DenseTensor::from_data({2, 2, 2}, std::vector<double>(8, 1.0));
    std::vector<Matrix> factors(3, Matrix::Ones(2, 2));
    CHECK(mttkrp(t, factors, 0).isApprox(4.0 * Matrix::Ones(2, 2)));
}

TEST_CASE("mttkrp of a rank-1 tensor") {
    Eigen::Vector3d a(1.0, -2.0, 0.5), b(2.0, 1.0, 1.0), c(0.5, 3.0, -1.0);
    std::vector<std::uint64_t> dims{3, 3, 3};
    DenseTensor t(dims);
    for (std::uint64_t i = 0; i < 3; ++i) {
        for (std::uint64_t j = 0; j < 3; ++j) {
            for (std::uint64_t k = 0; k < 3; ++k) {
                t[(i * 3 + j) * 3 + k] = a(i) * b(j) * c(k);
            }
        }
    }
    std::vector<Matrix> factors{a, b, c};
    Matrix m = mttkrp(t, factors, 0);
    Matrix expected = a * (b.squaredNorm() * c.squaredNorm());
    CHECK(rel_err(m, expected) < 1e-12);
}

TEST_CASE("mttkrp matches the unfolding route") {
    std::mt19937 gen(17);
    DenseTensor t = random_tensor({3, 3, 3}, gen);
    std::vector<Matrix> factors{random_matrix(3, 2, gen), random_matrix(3, 2, gen),
                                random_matrix(3, 2, gen)};
    Matrix naive = matricize(t, 0) * khatri_rao(factors[1], factors[2]);
    CHECK(rel_err(mttkrp(t, factors, 0), naive) < 1e-12);
}

TEST_CASE("workspace mttkrp matches the unfolding route within budget") {
    std::mt19937 gen(23);
    for (std::size_t order = 3; order <= 5; ++order) {
        std::vector<std::uint64_t> dims(order, 3);
        DenseTensor t = random_tensor(dims, gen);
        std::vector<Matrix> factors;
        for (std::size_t n = 0; n < order; ++n) {
            factors.push_back(random_matrix(3, 4, gen));
        }
        MttkrpWorkspace ws;
        for (std::size_t n = 0; n < order; ++n) {
            Matrix tree = mttkrp(t, factors, n, ws);
            Matrix kr = Matrix::Ones(1, 4);
            for (std::size_t m = 0; m < order; ++m) {
                if (m != n) kr = khatri_rao(kr, factors[m]);
            }
            Matrix naive = matricize(t, n) * kr;
            REQUIRE(rel_err(tree, naive) < 1e-12);
        }
        CHECK(ws.full_contractions() <= 2);
    }
}

TEST_CASE("workspace invalidation tracks factor updates") {
    std::mt19937 gen(29);
    DenseTensor t = random_tensor({3, 4, 2}, gen);
    std::vector<Matrix> factors{random_matrix(3, 2, gen), random_matrix(4, 2, gen),
                                random_matrix(2, 2, gen)};
    MttkrpWorkspace ws;
    (void)mttkrp(t, factors, 0, ws);
    factors[2] = random_matrix(2, 2, gen);
    ws.note_factor_update(2);
    Matrix fresh = mttkrp(t, factors, 0, ws);
    CHECK(rel_err(fresh, mttkrp(t, factors, 0)) < 1e-12);
}

TEST_CASE("mttkrp input validation") {
    DenseTensor t({2, 2, 2});
    std::vector<Matrix> factors(3, Matrix::Ones(2, 2));
    CHECK_THROWS_AS(mttkrp(t, factors, 3), InvalidArgument);
    factors[1] = Matrix::Ones(2, 3);
    CHECK_THROWS_AS(mttkrp(t, factors, 0), InvalidArgument);
}

TEST_CASE("spd_solve examples") {
    Matrix s = 2.0 * Matrix::Identity(2, 2);
    CHECK(spd_solve(s, Matrix::Identity(2, 2), 0.0)
              .isApprox(0.5 * Matrix::Identity(2, 2)));

    std::mt19937 gen(31);
    Matrix b = random_matrix(3, 2, gen);
    CHECK(spd_solve(Matrix::Identity(2, 2), b, 1.0).isApprox(0.5 * b));
}

TEST_CASE("spd_solve satisfies the multiply-back residual bound") {
    std::mt19937 gen(37);
    Matrix half = random_matrix(4, 4, gen);
    Matrix s = gram(half);
    Matrix b = random_matrix(4, 4, gen);
    const double lambda = 1e-3;
    Matrix y = spd_solve(s, b, lambda);
    Matrix shifted = s + lambda * Matrix::Identity(4, 4);
    CHECK((y * shifted - b).norm() <= 1e-10 * b.norm());
}

TEST_CASE("spd_solve reports singular systems") {
    Matrix zero = Matrix::Zero(2, 2);
    CHECK_THROWS_AS(spd_solve(zero, Matrix::Identity(2, 2), 0.0), SingularSystem);
}

TEST_CASE("spd_solve recovers from an exactly singular system via jitter") {
    // Rank-1 Gram matrix: the plain factorization hits a zero pivot, the
    // jittered retry succeeds.
    Matrix s(2, 2);
    s << 1, 1, 1, 1;
    Matrix y;
    CHECK_NOTHROW(y = spd_solve(s, Matrix::Ones(1, 2), 0.0));
    CHECK(y.allFinite());
}

TEST_CASE("spd_inverse examples") {
    CHECK(spd_inverse(Matrix::Identity(2, 2), 0.0).isApprox(Matrix::Identity(2, 2)));
    Matrix s = Matrix(Eigen::Vector2d(1, 3).asDiagonal());
    CHECK(spd_inverse(s, 1.0).isApprox(
        Matrix(Eigen::Vector2d(0.5, 0.25).asDiagonal())));

    std::mt19937 gen(41);
    Matrix sp = gram(random_matrix(5, 4, gen));
    Matrix inv = spd_inverse(sp, 1e-3);
    Matrix shifted = sp + 1e-3 * Matrix::Identity(4, 4);
    CHECK((inv * shifted - Matrix::Identity(4, 4)).norm() < 1e-10);
    CHECK((inv - Matrix(inv.transpose())).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("tensor file round trip is bitwise") {
    std::mt19937 gen(43);
    DenseTensor t = random_tensor({2, 3, 2}, gen);
    const std::string path = "test_tensor_roundtrip.cpkt";
    write_tensor(t, path);
    DenseTensor back = read_tensor(path);
    REQUIRE(back.dims() == t.dims());
    for (std::uint64_t f = 0; f < t.size(); ++f) REQUIRE(back[f] == t[f]);
    std::remove(path.c_str());
}

TEST_CASE("tensor reader rejects foreign files") {
    const std::string path = "test_tensor_bad.cpkt";
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    std::fputs("NOTATENSOR", fp);
    std::fclose(fp);
    CHECK_THROWS_AS(read_tensor(path), ParseError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_tensor("does_not_exist.cpkt"), IoError);
}

TEST_CASE("tensor validation catches bad shapes and values") {
    CHECK_THROWS_AS(DenseTensor::from_data({2, 2}, {1.0, 2.0}), InvalidArgument);
    DenseTensor t({2});
    t[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(t.validate(), InvalidArgument);
    CHECK_THROWS_AS(DenseTensor({0, 2}), InvalidArgument);
}
