#pragma once

#include <optional>
#include <utility>

#include "core/kruskal.hpp"
#include "core/report.hpp"

namespace cpkit {

struct AlsConfig {
    int max_sweeps = 10000;
    double residual_tol = 5e-5;
    double step_tol = 1e-7;
    double lambda0 = 0.0;
    // lambda is divided by decay_factor after every decay_every sweeps; no
    // decay when decay_every is unset.
    double decay_factor = 2.0;
    std::optional<int> decay_every;

    void validate() const;
};

struct AlsSweepDiag {
    double step_norm = 0.0;       // sum over modes of |A_new - A_old|_F
    int full_contractions = 0;    // tensor-sized contractions this sweep
    Matrix last_mode_mttkrp;      // valid for the post-sweep factors
};

// One pass over all modes in ascending order: for each mode, rebuild the
// normal-equation matrix from the current factors, compute the MTTKRP via
// the dimension tree and replace the factor with the regularized solve.
// Throws SingularSystem if a subproblem cannot be factorized.
AlsSweepDiag als_sweep(const DenseTensor& x, KruskalModel& model, double lambda,
                       MttkrpWorkspace& ws);

// Runs sweeps until the relative residual or the sweep step norm drops below
// its tolerance or the sweep cap is reached. The reported residual is always
// the true unregularized value.
std::pair<KruskalModel, ConvergenceReport> als_optimize(const DenseTensor& x,
                                                        KruskalModel model,
                                                        const AlsConfig& config);

}  // namespace cpkit
