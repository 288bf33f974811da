#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "core/als.hpp"
#include "core/errors.hpp"
#include "core/generators.hpp"

using namespace cpkit;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937& gen) {
    std::normal_distribution<double> dist;
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(gen);
    return m;
}

KruskalModel model_from(const std::vector<Matrix>& factors) {
    KruskalModel m;
    for (const auto& a : factors) {
        m.dims.push_back(static_cast<std::uint64_t>(a.rows()));
    }
    m.rank = factors[0].cols();
    m.factors = factors;
    return m;
}

double dense_residual(const KruskalModel& m, const DenseTensor& x) {
    DenseTensor rec = reconstruct(m);
    double acc = 0.0;
    for (std::uint64_t f = 0; f < x.size(); ++f) {
        const double d = x[f] - rec[f];
        acc += d * d;
    }
    return std::sqrt(acc) / x.frobenius_norm();
}

}  // namespace

TEST_CASE("first subproblem of a rank-1 fit is exact") {
    std::mt19937 gen(3);
    Matrix a = random_matrix(3, 1, gen);
    Matrix b = random_matrix(3, 1, gen);
    Matrix c = random_matrix(3, 1, gen);
    DenseTensor x = reconstruct(model_from({a, b, c}));

    KruskalModel m = model_from({random_matrix(3, 1, gen), b, c});
    MttkrpWorkspace ws;
    AlsSweepDiag diag = als_sweep(x, m, 0.0, ws);

    // With the other factors exact, the mode-0 normal equations recover the
    // ground-truth factor and the sweep reaches an exact fit.
    CHECK((m.factors[0] - a).norm() < 1e-12 * a.norm());
    CHECK(dense_residual(m, x) < 1e-12);
    CHECK(diag.full_contractions <= 2);
}

TEST_CASE("huge regularization collapses the update") {
    std::mt19937 gen(7);
    KruskalModel truth = model_from({random_matrix(4, 2, gen),
                                     random_matrix(4, 2, gen),
                                     random_matrix(4, 2, gen)});
    DenseTensor x = reconstruct(truth);
    KruskalModel m = model_from({random_matrix(4, 2, gen),
                                 random_matrix(4, 2, gen),
                                 random_matrix(4, 2, gen)});
    Matrix m0 = mttkrp(x, m.factors, 0);

    MttkrpWorkspace ws;
    als_sweep(x, m, 1e12, ws);
    CHECK(m.factors[0].norm() <= 1e-6 * m0.norm());
}

TEST_CASE("an unregularized sweep does not increase the objective") {
    std::mt19937 gen(11);
    for (int trial = 0; trial < 10; ++trial) {
        KruskalModel truth = model_from({random_matrix(4, 4, gen),
                                         random_matrix(4, 4, gen),
                                         random_matrix(4, 4, gen)});
        DenseTensor x = reconstruct(truth);
        KruskalModel m = model_from({random_matrix(4, 4, gen),
                                     random_matrix(4, 4, gen),
                                     random_matrix(4, 4, gen)});
        const double before = dense_residual(m, x);
        MttkrpWorkspace ws;
        als_sweep(x, m, 0.0, ws);
        const double after = dense_residual(m, x);
        REQUIRE(after <= before + 1e-12);
    }
}

TEST_CASE("sweeps at a stationary point leave the factors in place") {
    std::mt19937 gen(13);
    KruskalModel m = model_from({random_matrix(3, 2, gen),
                                 random_matrix(3, 2, gen),
                                 random_matrix(3, 2, gen)});
    DenseTensor x = reconstruct(m);
    KruskalModel before = m;
    MttkrpWorkspace ws;
    als_sweep(x, m, 0.0, ws);
    for (std::size_t n = 0; n < 3; ++n) {
        REQUIRE((m.factors[n] - before.factors[n]).norm() <=
                1e-10 * before.factors[n].norm());
    }
}

TEST_CASE("exact rank-1 problems converge for most seeds") {
    int converged = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ProblemSpec spec{GaussianFamily{}, {3, 3, 3}, 1, seed};
        auto [truth, x] = random_low_rank(spec);
        KruskalModel init =
            random_model({3, 3, 3}, 1, seed + 1000, GaussianFamily{});
        AlsConfig cfg;
        cfg.max_sweeps = 50;
        cfg.residual_tol = 5e-5;
        cfg.step_tol = 0.0;
        auto [model, report] = als_optimize(x, init, cfg);
        if (report.status == TerminalStatus::converged_residual) ++converged;
    }
    CHECK(converged >= 9);
}

TEST_CASE("zero sweep cap returns the input unchanged") {
    std::mt19937 gen(17);
    KruskalModel truth = model_from({random_matrix(3, 2, gen),
                                     random_matrix(3, 2, gen),
                                     random_matrix(3, 2, gen)});
    DenseTensor x = reconstruct(truth);
    KruskalModel init = model_from({random_matrix(3, 2, gen),
                                    random_matrix(3, 2, gen),
                                    random_matrix(3, 2, gen)});
    AlsConfig cfg;
    cfg.max_sweeps = 0;
    auto [model, report] = als_optimize(x, init, cfg);
    CHECK(report.records.empty());
    CHECK(report.status == TerminalStatus::cap_hit);
    for (std::size_t n = 0; n < 3; ++n) {
        REQUIRE(model.factors[n] == init.factors[n]);
    }
}

TEST_CASE("the decay schedule divides lambda on time") {
    ProblemSpec spec{UniformFamily{0.0, 1.0}, {3, 3, 3}, 2, 5};
    auto [truth, x] = random_low_rank(spec);
    KruskalModel init = random_model({3, 3, 3}, 2, 77, UniformFamily{0.0, 1.0});
    AlsConfig cfg;
    cfg.max_sweeps = 7;
    cfg.residual_tol = 0.0;
    cfg.step_tol = 0.0;
    cfg.lambda0 = 0.01;
    cfg.decay_factor = 2.0;
    cfg.decay_every = 3;
    auto [model, report] = als_optimize(x, init, cfg);
    REQUIRE(report.records.size() == 7);
    const double expected[] = {0.01,  0.01,  0.01, 0.005,
                               0.005, 0.005, 0.0025};
    for (int k = 0; k < 7; ++k) {
        REQUIRE(report.records[static_cast<std::size_t>(k)].lambda ==
                doctest::Approx(expected[k]));
    }
}

TEST_CASE("unregularized optimization is monotone in the dense residual") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ProblemSpec spec{UniformFamily{-1.0, 1.0}, {4, 4, 4}, 5, seed};
        auto [truth, x] = random_low_rank(spec);
        KruskalModel m =
            random_model({4, 4, 4}, 5, seed + 500, UniformFamily{-1.0, 1.0});
        MttkrpWorkspace ws;
        double prev = dense_residual(m, x);
        for (int sweep = 0; sweep < 40; ++sweep) {
            als_sweep(x, m, 0.0, ws);
            const double cur = dense_residual(m, x);
            REQUIRE(cur <= prev + 1e-12);
            prev = cur;
        }
    }
}

TEST_CASE("config validation") {
    AlsConfig cfg;
    cfg.decay_factor = 0.5;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = AlsConfig{};
    cfg.decay_every = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = AlsConfig{};
    cfg.lambda0 = -1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}
