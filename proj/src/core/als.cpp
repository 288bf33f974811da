#include "core/als.hpp"

#include <chrono>
#include <cmath>

#include "core/errors.hpp"

namespace cpkit {

void AlsConfig::validate() const {
    if (max_sweeps < 0 || residual_tol < 0 || step_tol < 0 || lambda0 < 0) {
        throw InvalidArgument("als config: negative tolerance, cap or lambda");
    }
    if (decay_factor < 1.0) {
        throw InvalidArgument("als config: decay_factor must be >= 1");
    }
    if (decay_every && *decay_every < 1) {
        throw InvalidArgument("als config: decay_every must be positive");
    }
}

AlsSweepDiag als_sweep(const DenseTensor& x, KruskalModel& model, double lambda,
                       MttkrpWorkspace& ws) {
    model.validate();
    const std::size_t order = model.order();
    ws.reset_contraction_counter();

    std::vector<Matrix> grams;
    grams.reserve(order);
    for (const auto& a : model.factors) grams.push_back(gram(a));

    AlsSweepDiag diag;
    for (std::size_t n = 0; n < order; ++n) {
        Matrix gamma = Matrix::Ones(model.rank, model.rank);
        for (std::size_t m = 0; m < order; ++m) {
            if (m != n) gamma = hadamard(gamma, grams[m]);
        }
        Matrix m_n = mttkrp(x, model.factors, n, ws);
        Matrix a_new = spd_solve(gamma, m_n, lambda);
        diag.step_norm += (a_new - model.factors[n]).norm();
        model.factors[n] = std::move(a_new);
        ws.note_factor_update(n);
        grams[n] = gram(model.factors[n]);
        if (n == order - 1) {
            // Depends only on the other modes, all updated this sweep, so it
            // is the MTTKRP of the post-sweep factors.
            diag.last_mode_mttkrp = std::move(m_n);
        }
    }
    diag.full_contractions = ws.full_contractions();
    return diag;
}

std::pair<KruskalModel, ConvergenceReport> als_optimize(const DenseTensor& x,
                                                        KruskalModel model,
                                                        const AlsConfig& config) {
    config.validate();
    model.validate();
    const double xnorm2 = x.norm2();
    if (!(xnorm2 > 0.0)) {
        throw InvalidArgument("als_optimize: tensor norm must be positive");
    }

    ConvergenceReport report;
    report.status = TerminalStatus::cap_hit;
    MttkrpWorkspace ws;
    const auto t0 = std::chrono::steady_clock::now();

    for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
        double lambda = config.lambda0;
        if (config.decay_every) {
            lambda /= std::pow(config.decay_factor,
                               static_cast<double>((sweep - 1) / *config.decay_every));
        }
        AlsSweepDiag diag = als_sweep(x, model, lambda, ws);
        auto [res, fit] =
            residual_fitness(model, x, xnorm2, &diag.last_mode_mttkrp);

        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        report.records.push_back({sweep, res, fit, lambda, 0, seconds});

        if (res < config.residual_tol) {
            report.status = TerminalStatus::converged_residual;
            break;
        }
        if (diag.step_norm < config.step_tol) {
            report.status = TerminalStatus::converged_step;
            break;
        }
    }
    return {std::move(model), std::move(report)};
}

}  // namespace cpkit
