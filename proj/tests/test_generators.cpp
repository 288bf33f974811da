#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "core/errors.hpp"
#include "core/generators.hpp"

using namespace cpkit;

TEST_CASE("positive uniform factors give strictly positive tensors") {
    ProblemSpec spec{UniformFamily{0.0, 1.0}, {4, 4, 4}, 3, 11};
    auto [model, x] = random_low_rank(spec);
    for (std::uint64_t f = 0; f < x.size(); ++f) {
        REQUIRE(x[f] > 0.0);
    }
}

TEST_CASE("generation is bitwise deterministic in the seed") {
    ProblemSpec spec{GaussianFamily{}, {3, 4, 2}, 2, 321};
    auto [m1, x1] = random_low_rank(spec);
    auto [m2, x2] = random_low_rank(spec);
    for (std::uint64_t f = 0; f < x1.size(); ++f) {
        REQUIRE(x1[f] == x2[f]);
    }
    for (std::size_t n = 0; n < 3; ++n) {
        REQUIRE(m1.factors[n] == m2.factors[n]);
    }

    ProblemSpec other = spec;
    other.seed = 322;
    auto [m3, x3] = random_low_rank(other);
    CHECK(x3[0] != x1[0]);
}

TEST_CASE("gaussian factor entries have near-zero sample mean") {
    KruskalModel m = random_model({50, 50, 50}, 10, 99, GaussianFamily{});
    double sum = 0.0;
    std::uint64_t count = 0;
    for (const auto& a : m.factors) {
        sum += a.sum();
        count += static_cast<std::uint64_t>(a.size());
    }
    const double mean = sum / static_cast<double>(count);
    CHECK(std::abs(mean) <= 4.0 / std::sqrt(static_cast<double>(count)));
}

TEST_CASE("uniform entries stay inside their interval") {
    KruskalModel m = random_model({20, 20}, 5, 7, UniformFamily{-1.0, 1.0});
    for (const auto& a : m.factors) {
        REQUIRE(a.minCoeff() >= -1.0);
        REQUIRE(a.maxCoeff() < 1.0);
    }
}

TEST_CASE("matmul tensor base cases") {
    DenseTensor t1 = matmul_tensor(1);
    REQUIRE(t1.size() == 1);
    CHECK(t1[0] == 1.0);

    DenseTensor t2 = matmul_tensor(2);
    REQUIRE(t2.dims() == std::vector<std::uint64_t>({4, 4, 4}));
    int ones = 0;
    for (std::uint64_t f = 0; f < t2.size(); ++f) {
        REQUIRE((t2[f] == 0.0 || t2[f] == 1.0));
        if (t2[f] == 1.0) ++ones;
    }
    CHECK(ones == 8);
}

TEST_CASE("matmul tensor contracts to the matrix product") {
    std::mt19937 gen(5);
    std::normal_distribution<double> dist;
    for (std::uint64_t n = 1; n <= 3; ++n) {
        DenseTensor t = matmul_tensor(n);
        const std::uint64_t sq = n * n;
        for (int trial = 0; trial < 10; ++trial) {
            Matrix a(n, n), b(n, n);
            for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = dist(gen);
            for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = dist(gen);
            Matrix ab = a * b;
            for (std::uint64_t i = 0; i < n; ++i) {
                for (std::uint64_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (std::uint64_t kl = 0; kl < sq; ++kl) {
                        for (std::uint64_t mp = 0; mp < sq; ++mp) {
                            acc += t[((i * n + j) * sq + kl) * sq + mp] *
                                   a(static_cast<Eigen::Index>(kl / n),
                                     static_cast<Eigen::Index>(kl % n)) *
                                   b(static_cast<Eigen::Index>(mp / n),
                                     static_cast<Eigen::Index>(mp % n));
                        }
                    }
                    REQUIRE(std::abs(acc - ab(static_cast<Eigen::Index>(i),
                                              static_cast<Eigen::Index>(j))) <=
                            1e-13);
                }
            }
        }
    }
}

TEST_CASE("delta-constructed factors reconstruct the matmul tensor exactly") {
    // Columns indexed by (alpha, beta, gamma) encode the classical n^3
    // bilinear algorithm; its reconstruction must reproduce every entry.
    const std::uint64_t n = 2;
    const std::uint64_t sq = n * n;
    const Eigen::Index rank = static_cast<Eigen::Index>(n * n * n);
    KruskalModel m;
    m.dims = {sq, sq, sq};
    m.rank = rank;
    Matrix f0 = Matrix::Zero(static_cast<Eigen::Index>(sq), rank);
    Matrix f1 = Matrix::Zero(static_cast<Eigen::Index>(sq), rank);
    Matrix f2 = Matrix::Zero(static_cast<Eigen::Index>(sq), rank);
    Eigen::Index col = 0;
    for (std::uint64_t alpha = 0; alpha < n; ++alpha) {
        for (std::uint64_t beta = 0; beta < n; ++beta) {
            for (std::uint64_t gamma = 0; gamma < n; ++gamma) {
                f0(static_cast<Eigen::Index>(alpha * n + gamma), col) = 1.0;
                f1(static_cast<Eigen::Index>(alpha * n + beta), col) = 1.0;
                f2(static_cast<Eigen::Index>(beta * n + gamma), col) = 1.0;
                ++col;
            }
        }
    }
    m.factors = {f0, f1, f2};
    DenseTensor rec = reconstruct(m);
    DenseTensor t = matmul_tensor(n);
    for (std::uint64_t f = 0; f < t.size(); ++f) {
        REQUIRE(rec[f] == t[f]);
    }
}

TEST_CASE("ground-truth models have vanishing residual on their tensors") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ProblemSpec spec{UniformFamily{-1.0, 1.0}, {4, 4, 4}, 6, seed};
        auto [model, x] = random_low_rank(spec);
        // Densely evaluated; the fast formula bottoms out near sqrt(eps).
        DenseTensor rec = reconstruct(model);
        double acc = 0.0;
        for (std::uint64_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - rec[i];
            acc += d * d;
        }
        REQUIRE(std::sqrt(acc) / x.frobenius_norm() <= 1e-12);

        auto [r, f] = residual_fitness(model, x, x.norm2());
        REQUIRE(r <= 1e-7);  // fast-formula floor
    }
}

TEST_CASE("spec validation") {
    ProblemSpec bad_uniform{UniformFamily{1.0, 0.0}, {3, 3}, 2, 0};
    CHECK_THROWS_AS(bad_uniform.validate(), InvalidArgument);

    ProblemSpec bad_matmul{MatmulFamily{2}, {4, 4, 2}, 7, 0};
    CHECK_THROWS_AS(bad_matmul.validate(), InvalidArgument);

    ProblemSpec matmul_ok{MatmulFamily{2}, {4, 4, 4}, 7, 0};
    CHECK_NOTHROW(matmul_ok.validate());
    CHECK_THROWS_AS(random_low_rank(matmul_ok), InvalidArgument);

    ProblemSpec caps{GaussianFamily{}, {100, 100, 100}, 2, 0};
    CHECK_THROWS_AS(random_low_rank(caps, 1000), LimitExceeded);
    CHECK_THROWS_AS(matmul_tensor(100, 1000), LimitExceeded);
}
