#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/als.hpp"
#include "core/gauss_newton.hpp"
#include "core/generators.hpp"
#include "core/report.hpp"

namespace cpkit {

enum class OptimizerKind { als, gn };

// How experiment initializations are drawn. `family_default` resolves to
// uniform(0,1) for nonnegative uniform problem families and to standard
// gaussian otherwise; the resolved choice is always recorded in the report.
struct InitDistribution {
    enum class Kind { family_default, uniform, gaussian };
    Kind kind = Kind::family_default;
    double a = 0.0;
    double b = 1.0;
};

struct ExperimentSpec {
    Family family = UniformFamily{0.0, 1.0};
    std::vector<std::uint64_t> dims;
    std::vector<int> ranks{1};
    OptimizerKind optimizer = OptimizerKind::als;
    AlsConfig als;
    GnConfig gn;
    int num_problems = 1;
    int num_inits = 1;
    InitDistribution init;
    std::uint64_t master_seed = 0;
    int threads = 0;  // 0 resolves to the hardware concurrency

    void validate() const;
    InitDistribution resolved_init() const;
    int resolved_threads() const;

    static ExperimentSpec from_json(const nlohmann::json& j);
    nlohmann::json resolved_json() const;
};

// Pipeline for matrix-multiplication tensors: a decaying-regularization ALS
// arm, plus hybrid arms that warm-start with a fixed number of regularized
// ALS sweeps and continue with Gauss-Newton (constant damping, with and
// without Armijo step control).
struct MatmulProtocolSpec {
    std::uint64_t n = 2;
    int rank = 7;
    int num_inits = 100;
    std::uint64_t master_seed = 0;
    int threads = 0;
    InitDistribution init;  // family_default resolves to gaussian here

    double als_lambda0 = 0.01;
    double als_decay_factor = 2.0;
    int als_decay_every = 100;
    int als_max_sweeps = 20000;
    double als_residual_tol = 1e-8;

    int warm_sweeps = 200;
    double warm_lambda = 0.01;

    double gn_lambda = 1e-3;
    int gn_max_iters = 500;
    double gn_residual_tol = 1e-8;
    double gn_cg_tol = 1e-3;
    ArmijoParams armijo;

    double hybrid_success_tol = 1e-5;  // best residual threshold for GN arms

    void validate() const;
    int resolved_threads() const;

    static MatmulProtocolSpec from_json(const nlohmann::json& j);
    nlohmann::json resolved_json() const;
};

// Deterministic per-instance seeds: both derivations chain the master seed
// with the rank, problem index and init index.
std::uint64_t problem_seed(std::uint64_t master, int rank, int problem);
std::uint64_t init_seed(std::uint64_t master, int rank, int problem, int init);

// One problem, one initialization, full per-iteration trace. Optimizer
// numerical failures are recorded in the report status, not thrown.
Report run_trace(const ExperimentSpec& spec);

// ranks x problems x inits study; instances run in a work pool and results
// are keyed by index, so reports are identical for any thread count.
Report run_likelihood(const ExperimentSpec& spec);

Report run_matmul_protocol(const MatmulProtocolSpec& spec);
Report run_matmul_protocol(std::uint64_t n, int rank, int num_inits,
                           std::uint64_t seed);

// Runs fn(0..count-1) on `threads` workers pulling from a shared counter.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace cpkit
