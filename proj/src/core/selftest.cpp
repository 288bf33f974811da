#include "core/selftest.hpp"

#include <chrono>
#include <cmath>

#include "core/errors.hpp"
#include "core/generators.hpp"
#include "core/rng.hpp"

namespace cpkit {

using nlohmann::json;

namespace oracle {

DenseTensor random_dense_tensor(const std::vector<std::uint64_t>& dims,
                                std::uint64_t seed) {
    DenseTensor t(dims);
    for (std::uint64_t f = 0; f < t.size(); ++f) {
        t[f] = rng::gaussian(seed, 0xDD, f);
    }
    return t;
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) =
                a(i, j) * b;
        }
    }
    return out;
}

double dense_objective(const KruskalModel& model, const DenseTensor& x) {
    const DenseTensor rec = reconstruct(model);
    double acc = 0.0;
    for (std::uint64_t f = 0; f < x.size(); ++f) {
        const double d = x[f] - rec[f];
        acc += d * d;
    }
    return 0.5 * acc;
}

std::vector<Matrix> finite_difference_gradient(const KruskalModel& model,
                                               const DenseTensor& x, double h) {
    std::vector<Matrix> g;
    KruskalModel probe = model;
    for (std::size_t n = 0; n < model.order(); ++n) {
        Matrix gn(model.factors[n].rows(), model.factors[n].cols());
        for (Eigen::Index i = 0; i < gn.rows(); ++i) {
            for (Eigen::Index r = 0; r < gn.cols(); ++r) {
                const double saved = probe.factors[n](i, r);
                probe.factors[n](i, r) = saved + h;
                const double fp = dense_objective(probe, x);
                probe.factors[n](i, r) = saved - h;
                const double fm = dense_objective(probe, x);
                probe.factors[n](i, r) = saved;
                gn(i, r) = (fp - fm) / (2.0 * h);
            }
        }
        g.push_back(std::move(gn));
    }
    return g;
}

}  // namespace oracle

namespace {

struct CheckAccum {
    double max_rel = 0.0;
    int instances = 0;

    void add(double rel) {
        if (rel > max_rel) max_rel = rel;
        ++instances;
    }
};

std::vector<std::uint64_t> random_dims(std::uint64_t seed, std::uint64_t salt,
                                       std::size_t order, std::uint64_t lo,
                                       std::uint64_t hi) {
    std::vector<std::uint64_t> dims(order);
    for (std::size_t m = 0; m < order; ++m) {
        dims[m] = lo + rng::keyed(seed, salt, m, 7) % (hi - lo + 1);
    }
    return dims;
}

double matvec_vs_explicit(const KruskalModel& model, std::uint64_t w_seed) {
    GammaSet gammas = build_gamma_set(model);
    KruskalModel w = random_model(model.dims, model.rank, w_seed, GaussianFamily{});
    std::vector<Matrix> u = hessian_matvec(model, gammas, w.factors, 0.0,
                                           RegShape::identity);
    Matrix h = explicit_jtj(model);
    Eigen::VectorXd expected = h * vec_stack(w.factors);
    Eigen::VectorXd got = vec_stack(u);
    return (got - expected).norm() / expected.norm();
}

double gradient_vs_fd(const KruskalModel& model, const DenseTensor& x) {
    std::vector<Matrix> mttkrps;
    for (std::size_t n = 0; n < model.order(); ++n) {
        mttkrps.push_back(mttkrp(x, model.factors, n));
    }
    GammaSet gammas = build_gamma_set(model);
    std::vector<Matrix> g = gradient(model, mttkrps, gammas);
    std::vector<Matrix> fd = oracle::finite_difference_gradient(model, x, 1e-5);
    double num = 0.0, den = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
        num += (g[n] - fd[n]).squaredNorm();
        den += g[n].squaredNorm();
    }
    return std::sqrt(num / den);
}

double diag_blocks_vs_kron(const KruskalModel& model) {
    GammaSet gammas = build_gamma_set(model);
    Matrix h = explicit_jtj(model);
    double worst = 0.0;
    Eigen::Index off = 0;
    for (std::size_t n = 0; n < model.order(); ++n) {
        const Eigen::Index sz =
            static_cast<Eigen::Index>(model.dims[n]) * model.rank;
        Matrix block = h.block(off, off, sz, sz);
        Matrix expected = oracle::kron(
            gammas.gamma(n, n),
            Matrix::Identity(static_cast<Eigen::Index>(model.dims[n]),
                             static_cast<Eigen::Index>(model.dims[n])));
        worst = std::max(worst, (block - expected).norm() / expected.norm());
        off += sz;
    }
    return worst;
}

double cg_vs_dense(const KruskalModel& model, const DenseTensor& x,
                   double lambda) {
    std::vector<Matrix> mttkrps;
    for (std::size_t n = 0; n < model.order(); ++n) {
        mttkrps.push_back(mttkrp(x, model.factors, n));
    }
    GammaSet gammas = build_gamma_set(model);
    std::vector<Matrix> g = gradient(model, mttkrps, gammas);

    GnConfig cfg;
    cfg.cg_tol = 1e-10;
    cfg.cg_max_iters = 100000;
    cfg.schedule = RegSchedule::constant(lambda);
    CgResult cg = cp_cg(model, gammas, g, lambda, cfg);

    Matrix h = explicit_jtj(model);
    h.diagonal().array() += lambda;
    Eigen::VectorXd rhs = -vec_stack(g);
    Eigen::VectorXd dense = h.ldlt().solve(rhs);
    return (vec_stack(cg.v) - dense).norm() / dense.norm();
}

double tree_vs_naive(const KruskalModel& model, const DenseTensor& x,
                     int* worst_contractions) {
    MttkrpWorkspace ws;
    double worst = 0.0;
    for (std::size_t n = 0; n < model.order(); ++n) {
        Matrix tree = mttkrp(x, model.factors, n, ws);
        Matrix unfolded = matricize(x, n);
        Matrix kr = Matrix::Ones(1, model.rank);
        for (std::size_t m = 0; m < model.order(); ++m) {
            if (m != n) kr = khatri_rao(kr, model.factors[m]);
        }
        Matrix naive = unfolded * kr;
        worst = std::max(worst, (tree - naive).norm() / naive.norm());
    }
    if (worst_contractions != nullptr) {
        *worst_contractions =
            std::max(*worst_contractions, ws.full_contractions());
    }
    return worst;
}

double fast_vs_dense_residual(const KruskalModel& model, const DenseTensor& x) {
    const double fast = residual_fitness(model, x, x.norm2()).first;
    const DenseTensor rec = reconstruct(model);
    double acc = 0.0;
    for (std::uint64_t f = 0; f < x.size(); ++f) {
        const double d = x[f] - rec[f];
        acc += d * d;
    }
    const double dense = std::sqrt(acc) / x.frobenius_norm();
    return std::abs(fast - dense);
}

}  // namespace

Report run_selftest_oracle(const json& config) {
    const std::uint64_t seed = config.value("seed", std::uint64_t{0});
    const int instances = config.value("instances", 20);
    if (instances < 1) {
        throw InvalidArgument("selftest: instances must be >= 1");
    }

    Report report;
    report.kind = Report::Kind::selftest;
    json cfg = json{{"kind", "selftest"}, {"seed", seed}, {"instances", instances}};
    report.config = cfg;

    CheckAccum matvec, grad, diag, cg, tree, resid;
    int worst_contractions = 0;

    for (int k = 0; k < instances; ++k) {
        const std::uint64_t inst = rng::derive(rng::mix64(seed), k);

        // Small instances for the dense-route comparisons.
        const std::size_t order = 2 + rng::keyed(inst, 1, 0, 0) % 3;
        const auto dims = random_dims(inst, 2, order, 2, 4);
        const int rank = 1 + static_cast<int>(rng::keyed(inst, 3, 0, 0) % 3);
        KruskalModel model =
            random_model(dims, rank, rng::derive(inst, 10), GaussianFamily{});
        DenseTensor x = oracle::random_dense_tensor(dims, rng::derive(inst, 11));

        matvec.add(matvec_vs_explicit(model, rng::derive(inst, 12)));
        grad.add(gradient_vs_fd(model, x));
        diag.add(diag_blocks_vs_kron(model));
        cg.add(cg_vs_dense(model, x, 1e-3));
        resid.add(fast_vs_dense_residual(model, x));

        // Wider orders for the dimension-tree check.
        const std::size_t tree_order = 3 + rng::keyed(inst, 4, 0, 0) % 3;
        const auto tree_dims = random_dims(inst, 5, tree_order, 2, 4);
        const int tree_rank = 2 + static_cast<int>(rng::keyed(inst, 6, 0, 0) % 3);
        KruskalModel tree_model = random_model(
            tree_dims, tree_rank, rng::derive(inst, 13), GaussianFamily{});
        DenseTensor tree_x =
            oracle::random_dense_tensor(tree_dims, rng::derive(inst, 14));
        tree.add(tree_vs_naive(tree_model, tree_x, &worst_contractions));
    }

    auto push = [&](const char* name, const CheckAccum& acc, double tol) {
        SelftestRow row;
        row.name = name;
        row.instances = acc.instances;
        row.max_rel_error = acc.max_rel;
        row.tolerance = tol;
        row.pass = acc.max_rel <= tol;
        report.selftest.checks.push_back(std::move(row));
    };
    push("hessian_matvec_vs_explicit_jtj", matvec, 1e-12);
    push("gradient_vs_finite_difference", grad, 1e-6);
    push("jtj_diagonal_blocks_vs_kron", diag, 1e-12);
    push("cg_vs_dense_solve", cg, 1e-6);
    push("tree_mttkrp_vs_naive", tree, 1e-12);
    push("fast_vs_dense_residual", resid, 1e-10);

    SelftestRow budget;
    budget.name = "tree_contraction_budget";
    budget.instances = instances;
    budget.max_rel_error = worst_contractions;
    budget.tolerance = 2.0;
    budget.pass = worst_contractions <= 2;
    report.selftest.checks.push_back(budget);

    report.selftest.all_pass = true;
    for (const auto& c : report.selftest.checks) {
        report.selftest.all_pass = report.selftest.all_pass && c.pass;
    }
    return report;
}

Report run_bench_matvec(const json& config) {
    const std::size_t order =
        config.value("order", static_cast<std::size_t>(3));
    const std::vector<std::uint64_t> sizes =
        config.value("s", std::vector<std::uint64_t>{200});
    const std::vector<int> ranks = config.value("ranks", std::vector<int>{100});
    const int reps = config.value("reps", 5);
    const std::uint64_t seed = config.value("seed", std::uint64_t{0});
    if (order < 2 || sizes.empty() || ranks.empty() || reps < 1) {
        throw InvalidArgument("bench: bad configuration");
    }

    Report report;
    report.kind = Report::Kind::bench;
    report.config = json{{"kind", "bench"}, {"order", order}, {"s", sizes},
                         {"ranks", ranks}, {"reps", reps}, {"seed", seed}};

    for (std::uint64_t s : sizes) {
        for (int rank : ranks) {
            std::vector<std::uint64_t> dims(order, s);
            KruskalModel model =
                random_model(dims, rank, rng::derive(seed, s), GaussianFamily{});
            GammaSet gammas = build_gamma_set(model);
            KruskalModel w = random_model(
                dims, rank, rng::derive(rng::derive(seed, s), rank),
                GaussianFamily{});

            // Warm-up, then keep the fastest rep.
            volatile double sink = 0.0;
            auto once = [&] {
                std::vector<Matrix> u = hessian_matvec(model, gammas, w.factors,
                                                       1e-3, RegShape::identity);
                sink = sink + u[0](0, 0);
            };
            once();
            double best = std::numeric_limits<double>::infinity();
            for (int rep = 0; rep < reps; ++rep) {
                const auto t0 = std::chrono::steady_clock::now();
                once();
                const double dt = std::chrono::duration<double>(
                                      std::chrono::steady_clock::now() - t0)
                                      .count();
                best = std::min(best, dt);
            }
            report.bench.rows.push_back(
                {order, s, rank, reps, best});
        }
    }
    return report;
}

}  // namespace cpkit
